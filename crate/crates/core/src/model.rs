//! Hubbard graphs and the impurity/environment split of their adjacency.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{default_tolerance, symmetric_eigen};
use crate::scalar::Real;
use crate::{Error, Result};

/// Built-in graph families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphKind {
    Dimer,
    /// Cycle on `L` vertices.
    Ring(usize),
    /// Periodic `n × n` square grid.
    Torus(usize),
}

impl FromStr for GraphKind {
    type Err = Error;

    /// Accepts `dimer`, `ring:L` and `torus:n`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("unknown graph {s:?}; expected dimer, ring:L or torus:n"));
        let s = s.trim();
        if s == "dimer" {
            return Ok(GraphKind::Dimer);
        }
        let (name, size) = s.split_once(':').ok_or_else(bad)?;
        let size: usize = size.trim().parse().map_err(|_| bad())?;
        match name.trim() {
            "ring" => Ok(GraphKind::Ring(size)),
            "torus" => Ok(GraphKind::Torus(size)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::Dimer => write!(f, "dimer"),
            GraphKind::Ring(l) => write!(f, "ring:{l}"),
            GraphKind::Torus(n) => write!(f, "torus:{n}"),
        }
    }
}

/// Simple undirected loopless regular graph.
///
/// Regularity is checked on construction. Vertex transitivity, which the
/// impurity mapping assumes, is not verified; the built-in families have it.
#[derive(Debug, Clone, PartialEq)]
pub struct HubbardGraph {
    l: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<u8>>,
    degree: usize,
}

/// On-disk custom graph: `{"L": 4, "edges": [[0,1], ...]}`, 0-based vertices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    #[serde(rename = "L")]
    pub l: usize,
    pub edges: Vec<[usize; 2]>,
}

impl HubbardGraph {
    pub fn build(kind: GraphKind) -> Result<Self> {
        match kind {
            GraphKind::Dimer => Self::from_edges(2, [(0, 1)]),
            GraphKind::Ring(l) => {
                if l < 3 {
                    return Err(Error::Parameter(format!("ring needs L >= 3, got {l}")));
                }
                Self::from_edges(l, (0..l).map(|i| (i, (i + 1) % l)))
            }
            GraphKind::Torus(n) => {
                if n < 2 {
                    return Err(Error::Parameter(format!("torus needs n >= 2, got {n}")));
                }
                let idx = |r: usize, c: usize| (r % n) * n + (c % n);
                let edges = (0..n).flat_map(|r| {
                    (0..n).flat_map(move |c| [(idx(r, c), idx(r, c + 1)), (idx(r, c), idx(r + 1, c))])
                });
                Self::from_edges(n * n, edges)
            }
        }
    }

    /// Builds a graph from an edge list, collapsing duplicates.
    pub fn from_edges(l: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if l < 2 {
            return Err(Error::Graph(format!("need at least 2 vertices, got {l}")));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= l || j >= l {
                return Err(Error::Graph(format!("edge ({i},{j}) out of range for L={l}")));
            }
            if i == j {
                return Err(Error::Graph(format!("self-loop at vertex {i}")));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let mut adjacency = vec![vec![0u8; l]; l];
        for &(i, j) in &set {
            adjacency[i][j] = 1;
            adjacency[j][i] = 1;
        }
        let degrees: Vec<usize> = adjacency
            .iter()
            .map(|row| row.iter().map(|&x| x as usize).sum())
            .collect();
        let degree = degrees[0];
        if let Some(v) = degrees.iter().position(|&d| d != degree) {
            return Err(Error::Graph(format!(
                "graph is not regular: vertex 0 has degree {degree}, vertex {v} has {}",
                degrees[v]
            )));
        }
        if degree == 0 {
            return Err(Error::Graph("graph has no edges".into()));
        }
        Ok(HubbardGraph {
            l,
            edges: set,
            adjacency,
            degree,
        })
    }

    /// Parses the JSON graph format. Only regularity is checked.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::Graph(format!("bad graph JSON: {e}")))?;
        let g = Self::from_edges(file.l, file.edges.iter().map(|e| (e[0], e[1])))?;
        log::warn!(
            "custom graph with L={} is regular (degree {}) but vertex transitivity is not verified",
            g.l,
            g.degree
        );
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.l
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    /// Splits the adjacency around vertex 0 and diagonalises the environment
    /// block with the default tolerance for the requested width.
    pub fn partition<T: Real>(&self, bits: u32) -> ImpurityPartition<T> {
        let m = self.l - 1;
        let w: Vec<T> = (1..self.l)
            .map(|j| T::from_int(self.adjacency[0][j] as i64, bits))
            .collect();
        let h0_perp: Vec<Vec<T>> = (1..self.l)
            .map(|i| {
                (1..self.l)
                    .map(|j| T::from_int(self.adjacency[i][j] as i64, bits))
                    .collect()
            })
            .collect();
        let (eigenvalues, eigenvectors) = if m == 1 {
            // 1×1 block: nothing to rotate
            (vec![h0_perp[0][0].clone()], vec![vec![T::one()]])
        } else {
            symmetric_eigen(&h0_perp, &default_tolerance::<T>(bits))
        };
        let weights = eigenvectors
            .iter()
            .map(|v| {
                let proj = v
                    .iter()
                    .zip(&w)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
                proj.clone() * proj
            })
            .collect();
        ImpurityPartition {
            degree: self.degree,
            w,
            h0_perp,
            eigenvalues,
            eigenvectors,
            weights,
        }
    }

    /// Breadth-first two-colouring; `None` when an odd cycle exists.
    pub fn bipartition(&self) -> Option<Vec<Side>> {
        let mut color: Vec<Option<Side>> = vec![None; self.l];
        for start in 0..self.l {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(Side::A);
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                let c = color[v].unwrap();
                for (u, &adj) in self.adjacency[v].iter().enumerate() {
                    if adj == 0 {
                        continue;
                    }
                    match color[u] {
                        None => {
                            color[u] = Some(c.other());
                            queue.push_back(u);
                        }
                        Some(cu) if cu == c => return None,
                        Some(_) => {}
                    }
                }
            }
        }
        color.into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// Adjacency split `[[0, wᵀ], [w, h0_perp]]` around the impurity vertex with
/// the spectral data of `h0_perp`.
#[derive(Debug, Clone)]
pub struct ImpurityPartition<T> {
    pub degree: usize,
    pub w: Vec<T>,
    pub h0_perp: Vec<Vec<T>>,
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<T>>,
    /// Squared projections of `w` on the eigenvectors.
    pub weights: Vec<T>,
}

/// Weights aggregated per distinct eigenvalue magnitude, as used by the
/// bipartite reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSpectrum {
    /// `(ν, ρ_ν)` for each distinct positive eigenvalue; `ρ_ν` is the weight on
    /// `+ν` alone (the mirrored `−ν` carries the same weight).
    pub positive: Vec<(f64, f64)>,
    pub kernel_weight: f64,
    /// Largest `|ρ(ν) − ρ(−ν)|` observed while pairing.
    pub pairing_defect: f64,
}

/// Eigenvalue clustering threshold for distinct-eigenvalue bookkeeping.
pub const CLUSTER_TOL: f64 = 1e-9;

impl<T: Real> ImpurityPartition<T> {
    /// `max_k ‖h0_perp v_k − ε_k v_k‖₂`.
    pub fn max_residual(&self) -> f64 {
        let mut worst = 0f64;
        for (k, v) in self.eigenvectors.iter().enumerate() {
            let mut acc = 0.0;
            for (i, row) in self.h0_perp.iter().enumerate() {
                let mut s = T::zero();
                for (a, b) in row.iter().zip(v) {
                    s = s + a.clone() * b.clone();
                }
                let r = (s - self.eigenvalues[k].clone() * v[i].clone()).to_f64();
                acc += r * r;
            }
            worst = worst.max(acc.sqrt());
        }
        worst
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, b| a + b.clone())
    }

    /// Groups eigenvalues into clusters of width [`CLUSTER_TOL`] and pairs
    /// `+ν` with `−ν`. Unpaired positive or negative clusters fold into the
    /// defect, which is zero for bipartite graphs.
    pub fn paired_spectrum(&self) -> PairedSpectrum {
        let eps: Vec<f64> = self.eigenvalues.iter().map(Real::to_f64).collect();
        let rho: Vec<f64> = self.weights.iter().map(Real::to_f64).collect();
        let mut clusters: Vec<(f64, f64)> = Vec::new();
        for (e, r) in eps.iter().zip(&rho) {
            match clusters.last_mut() {
                Some((c, w)) if (e - *c).abs() <= CLUSTER_TOL => *w += r,
                _ => clusters.push((*e, *r)),
            }
        }
        let mut kernel_weight = 0.0;
        let mut positive = Vec::new();
        let mut defect = 0f64;
        let find = |target: f64| {
            clusters
                .iter()
                .find(|(c, _)| (c - target).abs() <= CLUSTER_TOL)
                .map(|&(_, w)| w)
        };
        for &(c, w) in &clusters {
            if c.abs() <= CLUSTER_TOL {
                kernel_weight += w;
            } else if c > 0.0 {
                let mirror = find(-c).unwrap_or(0.0);
                defect = defect.max((w - mirror).abs());
                positive.push((c, w));
            } else if find(-c).is_none() {
                defect = defect.max(w);
            }
        }
        PairedSpectrum {
            positive,
            kernel_weight,
            pairing_defect: defect,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(kind: GraphKind) -> ImpurityPartition<f64> {
        HubbardGraph::build(kind).unwrap().partition(53)
    }

    #[test]
    fn dimer_partition() {
        let g = HubbardGraph::build(GraphKind::Dimer).unwrap();
        assert_eq!(g.adjacency(), &[vec![0, 1], vec![1, 0]]);
        assert_eq!(g.degree(), 1);
        let p = g.partition::<f64>(53);
        assert_eq!(p.w, vec![1.0]);
        assert_eq!(p.eigenvalues, vec![0.0]);
        assert_eq!(p.weights, vec![1.0]);
    }

    #[test]
    fn ring4_partition() {
        let p = part(GraphKind::Ring(4));
        assert_eq!(p.w, vec![1.0, 0.0, 1.0]);
        let s = 2f64.sqrt();
        for (e, x) in p.eigenvalues.iter().zip([-s, 0.0, s]) {
            assert!((e - x).abs() < 1e-14);
        }
        for (r, x) in p.weights.iter().zip([1.0, 0.0, 1.0]) {
            assert!((r - x).abs() < 1e-14);
        }
        assert!(p.max_residual() < 1e-12);
    }

    #[test]
    fn ring3_partition() {
        let p = part(GraphKind::Ring(3));
        assert_eq!(p.w, vec![1.0, 1.0]);
        assert!((p.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((p.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(p.weights[0].abs() < 1e-14);
        assert!((p.weights[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn torus2_collapses_duplicate_edges() {
        // (Z/2Z)²: right and left neighbours coincide, so each vertex keeps
        // one horizontal and one vertical neighbour
        let g = HubbardGraph::build(GraphKind::Torus(2)).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.degree(), 2);
        assert_eq!(g.edges().count(), 4);
    }

    #[test]
    fn size_limits() {
        assert!(HubbardGraph::build(GraphKind::Ring(2)).is_err());
        assert!(HubbardGraph::build(GraphKind::Torus(1)).is_err());
    }

    #[test]
    fn bipartitions() {
        let d = HubbardGraph::build(GraphKind::Dimer).unwrap().bipartition();
        assert_eq!(d, Some(vec![Side::A, Side::B]));
        assert!(HubbardGraph::build(GraphKind::Ring(3)).unwrap().bipartition().is_none());
        let g = HubbardGraph::build(GraphKind::Torus(4)).unwrap();
        let c = g.bipartition().unwrap();
        assert!(g.edges().all(|(i, j)| c[i] != c[j]));
    }

    #[test]
    fn weights_sum_to_degree_and_pair() {
        for kind in [
            GraphKind::Dimer,
            GraphKind::Ring(3),
            GraphKind::Ring(4),
            GraphKind::Ring(7),
            GraphKind::Ring(10),
            GraphKind::Torus(2),
            GraphKind::Torus(3),
            GraphKind::Torus(4),
        ] {
            let g = HubbardGraph::build(kind).unwrap();
            let p = g.partition::<f64>(53);
            assert!((p.total_weight() - g.degree() as f64).abs() < 1e-12, "{kind}");
            assert!(p.max_residual() < 1e-12, "{kind}");
            if g.bipartition().is_some() {
                assert!(p.paired_spectrum().pairing_defect < 1e-10, "{kind}");
            }
        }
    }

    #[test]
    fn rejects_irregular_and_parses_json() {
        assert!(HubbardGraph::from_edges(3, [(0, 1)]).is_err());
        assert!(HubbardGraph::from_edges(2, [(0, 0)]).is_err());
        let g = HubbardGraph::from_json(r#"{"L": 4, "edges": [[0,1],[1,2],[2,3],[3,0]]}"#).unwrap();
        assert_eq!(g, HubbardGraph::build(GraphKind::Ring(4)).unwrap());
        assert!(HubbardGraph::from_json(r#"{"L": 3, "edges": [[0,1],[1,2]]}"#).is_err());
    }

    #[test]
    fn graph_kind_parsing() {
        assert_eq!("dimer".parse::<GraphKind>().unwrap(), GraphKind::Dimer);
        assert_eq!("ring:6".parse::<GraphKind>().unwrap(), GraphKind::Ring(6));
        assert_eq!("torus:4".parse::<GraphKind>().unwrap(), GraphKind::Torus(4));
        assert!("cube:3".parse::<GraphKind>().is_err());
        assert_eq!(GraphKind::Ring(5).to_string(), "ring:5");
    }
}
