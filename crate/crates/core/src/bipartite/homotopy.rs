//! Total-degree homotopy continuation for small square polynomial systems.
//!
//! Start system `x_i^{d_i} − γ_i = 0`, homotopy `H(x, s) = γ₀(1−s)G(x) + sF(x)`
//! with random unit-modulus `γ` (the gamma trick keeps paths regular for
//! almost every choice). Paths are tracked with an Euler predictor and a
//! Newton corrector under an adaptive step, then polished on `F`.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{dimer_system, PolySystem, SparsePolynomial};
use crate::linalg::solve_complex;
use crate::{Error, Result};

type C64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyOptions {
    pub seed: u64,
    /// Roots closer than this (max-norm, relative to `1 + |x|`) are merged.
    pub dedup_tol: f64,
    /// A root is real when every `|Im x_n|` is at most this.
    pub real_tol: f64,
    /// Polished roots must reach this max-norm residual.
    pub residual_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Paths whose iterate exceeds this norm are declared divergent.
    pub divergence: f64,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions {
            seed: 0x5eed,
            dedup_tol: 1e-8,
            real_tol: 1e-8,
            residual_tol: 1e-10,
            max_step: 0.05,
            min_step: 1e-13,
            divergence: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathOutcome {
    Converged,
    /// The iterate ran off to infinity: fewer finite roots than the Bézout bound.
    Diverged,
    /// Step size underflow or a polished residual above tolerance.
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Root {
    /// `[re, im]` per variable.
    pub x: Vec<[f64; 2]>,
    pub residual: f64,
    pub real: bool,
    pub admissible: bool,
    /// Real, inside `[0, 1]` up to tolerance, with some coordinate at 0.
    pub boundary: bool,
    /// Index of the start point whose path produced this root.
    pub path: usize,
    pub steps: usize,
}

impl Root {
    pub fn point(&self) -> Vec<C64> {
        self.x.iter().map(|v| C64::new(v[0], v[1])).collect()
    }

    pub fn real_point(&self) -> Vec<f64> {
        self.x.iter().map(|v| v[0]).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RootSet {
    pub complex_roots: Vec<Root>,
    pub admissible_roots: Vec<Vec<f64>>,
    pub boundary_roots: Vec<Vec<f64>>,
    pub real_count: usize,
    pub total_paths: usize,
    pub failed_paths: usize,
    pub diverged_paths: usize,
    /// Converged paths that landed on an already found root.
    pub duplicate_paths: usize,
    pub complete: bool,
    pub seed: u64,
    pub degrees: Vec<u32>,
}

impl RootSet {
    pub fn admissible_count(&self) -> usize {
        self.admissible_roots.len()
    }
}

struct Compiled {
    f: Vec<SparsePolynomial<f64>>,
    jac: Vec<Vec<SparsePolynomial<f64>>>,
    degrees: Vec<u32>,
}

impl Compiled {
    fn new(sys: &PolySystem) -> Self {
        let n = sys.nvars();
        Compiled {
            f: sys.equations.clone(),
            jac: sys
                .equations
                .iter()
                .map(|e| (0..n).map(|j| e.derivative(j)).collect())
                .collect(),
            degrees: sys.degrees(),
        }
    }

    fn eval(&self, x: &[C64]) -> Vec<C64> {
        self.f.iter().map(|e| e.eval(x)).collect()
    }

    fn jacobian(&self, x: &[C64]) -> Vec<Vec<C64>> {
        self.jac
            .iter()
            .map(|row| row.iter().map(|d| d.eval(x)).collect())
            .collect()
    }
}

struct Homotopy<'a> {
    target: &'a Compiled,
    gamma: C64,
    start_consts: Vec<C64>,
}

impl Homotopy<'_> {
    fn start(&self, x: &[C64]) -> Vec<C64> {
        x.iter()
            .zip(&self.target.degrees)
            .zip(&self.start_consts)
            .map(|((xi, &d), g)| xi.powu(d) - g)
            .collect()
    }

    fn h(&self, x: &[C64], s: f64) -> Vec<C64> {
        let g = self.start(x);
        let f = self.target.eval(x);
        g.iter()
            .zip(&f)
            .map(|(gi, fi)| self.gamma * (1.0 - s) * gi + fi * s)
            .collect()
    }

    fn hx(&self, x: &[C64], s: f64) -> Vec<Vec<C64>> {
        let mut j = self.target.jacobian(x);
        for (i, row) in j.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v *= s;
            }
            let d = self.target.degrees[i];
            row[i] += self.gamma * (1.0 - s) * (d as f64) * x[i].powu(d - 1);
        }
        j
    }

    fn hs(&self, x: &[C64]) -> Vec<C64> {
        let g = self.start(x);
        let f = self.target.eval(x);
        f.iter().zip(&g).map(|(fi, gi)| fi - self.gamma * gi).collect()
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn newton_polish(sys: &Compiled, mut x: Vec<C64>) -> Vec<C64> {
    for _ in 0..50 {
        let f = sys.eval(&x);
        let Some(dx) = solve_complex(sys.jacobian(&x), f.iter().map(|v| -v).collect()) else {
            break;
        };
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        if norm(&dx) <= 1e-15 * (1.0 + norm(&x)) {
            break;
        }
    }
    x
}

struct Tracked {
    x: Vec<C64>,
    outcome: PathOutcome,
    steps: usize,
}

fn track(hom: &Homotopy, x0: Vec<C64>, opts: &HomotopyOptions) -> Tracked {
    let mut x = x0;
    let mut s = 0.0;
    let mut h = opts.max_step / 4.0;
    let mut streak = 0;
    let mut steps = 0;
    while s < 1.0 {
        steps += 1;
        if steps > 200_000 {
            return Tracked { x, outcome: PathOutcome::Failed, steps };
        }
        let step = h.min(1.0 - s);
        let s1 = if step >= 1.0 - s { 1.0 } else { s + step };
        let mut ok = false;
        let mut y = x.clone();
        if let Some(dx) = solve_complex(hom.hx(&x, s), hom.hs(&x).iter().map(|v| -v).collect()) {
            for (yi, d) in y.iter_mut().zip(&dx) {
                *yi += d * step;
            }
            let mut prev = f64::INFINITY;
            for _ in 0..4 {
                let Some(c) = solve_complex(hom.hx(&y, s1), hom.h(&y, s1).iter().map(|v| -v).collect()) else {
                    break;
                };
                let dn = norm(&c);
                if dn > prev * 0.5 && dn > 1e-12 * (1.0 + norm(&y)) {
                    break;
                }
                prev = dn;
                for (yi, d) in y.iter_mut().zip(&c) {
                    *yi += d;
                }
                if dn <= 1e-10 * (1.0 + norm(&y)) {
                    ok = true;
                    break;
                }
            }
        }
        if ok {
            x = y;
            s = s1;
            streak += 1;
            if streak >= 3 {
                h = (h * 2.0).min(opts.max_step);
                streak = 0;
            }
            if norm(&x) > opts.divergence {
                return Tracked { x, outcome: PathOutcome::Diverged, steps };
            }
        } else {
            streak = 0;
            h *= 0.5;
            if h < opts.min_step {
                let outcome = if norm(&x) > opts.divergence.sqrt() {
                    PathOutcome::Diverged
                } else {
                    PathOutcome::Failed
                };
                return Tracked { x, outcome, steps };
            }
        }
    }
    Tracked { x, outcome: PathOutcome::Converged, steps }
}

fn unit(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>())
}

fn start_points(degrees: &[u32], consts: &[C64]) -> Vec<Vec<C64>> {
    let mut points = vec![Vec::new()];
    for (&d, g) in degrees.iter().zip(consts) {
        let base = C64::from_polar(g.norm().powf(1.0 / d as f64), g.arg() / d as f64);
        let roots: Vec<C64> = (0..d)
            .map(|k| base * C64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64))
            .collect();
        points = points
            .into_iter()
            .flat_map(|p| {
                roots.iter().map(move |r| {
                    let mut q = p.clone();
                    q.push(*r);
                    q
                })
            })
            .collect();
    }
    points
}

/// All isolated complex roots of a square system with at most three
/// variables and degree at most four per equation.
pub fn homotopy_solve(sys: &PolySystem, opts: &HomotopyOptions) -> Result<RootSet> {
    let n = sys.nvars();
    if n == 0 || n > 3 {
        return Err(Error::Parameter(format!("homotopy supports 1 to 3 variables, got {n}")));
    }
    if sys.equations.iter().any(|e| e.nvars() != n) {
        return Err(Error::Parameter("system is not square".into()));
    }
    let degrees = sys.degrees();
    if degrees.iter().any(|&d| d == 0 || d > 4) {
        return Err(Error::Parameter(format!("equation degrees must lie in 1..=4, got {degrees:?}")));
    }
    let compiled = Compiled::new(sys);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let gamma = unit(&mut rng);
    let start_consts: Vec<C64> = (0..n).map(|_| unit(&mut rng)).collect();
    let hom = Homotopy {
        target: &compiled,
        gamma,
        start_consts: start_consts.clone(),
    };
    let starts = start_points(&degrees, &start_consts);

    let tracked: Vec<Tracked> = starts
        .into_par_iter()
        .map(|x0| {
            let mut t = track(&hom, x0, opts);
            if t.outcome == PathOutcome::Converged {
                t.x = newton_polish(&compiled, t.x);
                let r = norm(&compiled.eval(&t.x));
                if !(r <= opts.residual_tol) {
                    t.outcome = if norm(&t.x) > opts.divergence.sqrt() {
                        PathOutcome::Diverged
                    } else {
                        PathOutcome::Failed
                    };
                }
            }
            t
        })
        .collect();

    let mut set = RootSet {
        complex_roots: Vec::new(),
        admissible_roots: Vec::new(),
        boundary_roots: Vec::new(),
        real_count: 0,
        total_paths: tracked.len(),
        failed_paths: 0,
        diverged_paths: 0,
        duplicate_paths: 0,
        complete: true,
        seed: opts.seed,
        degrees,
    };
    for (path, t) in tracked.into_iter().enumerate() {
        match t.outcome {
            PathOutcome::Failed => {
                set.failed_paths += 1;
                continue;
            }
            PathOutcome::Diverged => {
                set.diverged_paths += 1;
                continue;
            }
            PathOutcome::Converged => {}
        }
        let dup = set.complex_roots.iter().any(|r| {
            let p = r.point();
            let scale = 1.0 + norm(&p);
            p.iter().zip(&t.x).all(|(a, b)| (a - b).norm() <= opts.dedup_tol * scale)
        });
        if dup {
            set.duplicate_paths += 1;
            continue;
        }
        let real = t.x.iter().all(|z| z.im.abs() <= opts.real_tol);
        let lo = opts.real_tol;
        let admissible = real && t.x.iter().all(|z| z.re > lo && z.re <= 1.0 + lo);
        let boundary = real
            && !admissible
            && t.x.iter().all(|z| z.re >= -lo && z.re <= 1.0 + lo)
            && t.x.iter().any(|z| z.re.abs() <= lo);
        let root = Root {
            x: t.x.iter().map(|z| [z.re, if real { 0.0 } else { z.im }]).collect(),
            residual: norm(&compiled.eval(&t.x)),
            real,
            admissible,
            boundary,
            path,
            steps: t.steps,
        };
        if real {
            set.real_count += 1;
        }
        if admissible {
            set.admissible_roots.push(root.real_point());
        }
        if boundary {
            set.boundary_roots.push(root.real_point());
        }
        set.complex_roots.push(root);
    }
    set.complete = set.failed_paths == 0;
    Ok(set)
}

#[derive(Debug, Clone, Serialize)]
pub struct CellCount {
    pub a: f64,
    pub b: f64,
    pub count: usize,
    pub failed_paths: usize,
}

/// Admissible-root counts of the dimer system over an `(a, b)` grid,
/// row-major with `a` outer. Every cell uses the same seed, so results do
/// not depend on scheduling.
pub fn count_admissible(
    cutoff: usize,
    a_grid: &[f64],
    b_grid: &[f64],
    opts: &HomotopyOptions,
) -> Result<Vec<CellCount>> {
    if cutoff > 2 {
        return Err(Error::Parameter(format!("phase counts support N <= 2, got {cutoff}")));
    }
    let cells: Vec<(f64, f64)> = a_grid
        .iter()
        .flat_map(|&a| b_grid.iter().map(move |&b| (a, b)))
        .collect();
    cells
        .into_par_iter()
        .map(|(a, b)| {
            let set = homotopy_solve(&dimer_system(cutoff, a, b), opts)?;
            Ok(CellCount {
                a,
                b,
                count: set.admissible_count(),
                failed_paths: set.failed_paths,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_case_has_unique_root() {
        for cutoff in 0..=2 {
            let a = 1.7;
            let set = homotopy_solve(&dimer_system(cutoff, a, 0.0), &HomotopyOptions::default()).unwrap();
            assert_eq!(set.total_paths, 1);
            assert_eq!(set.admissible_count(), 1);
            for (n, x) in set.admissible_roots[0].iter().enumerate() {
                let w = ((2 * n + 1) * (2 * n + 1)) as f64;
                assert!((x - w / (w + a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn univariate_quartic() {
        // N = 0 dimer: 4 paths, roots agree with the companion-matrix solver
        let sys = dimer_system(0, 1.0, 2.0);
        let set = homotopy_solve(&sys, &HomotopyOptions::default()).unwrap();
        assert_eq!(set.complex_roots.len(), 4);
        let coeffs = sys.equations[0].univariate_coeffs();
        let reference = super::super::poly_roots(&coeffs);
        for r in &reference {
            assert!(set
                .complex_roots
                .iter()
                .any(|s| (s.point()[0] - r).norm() < 1e-9));
        }
    }

    #[test]
    fn rejects_large_systems() {
        assert!(homotopy_solve(&dimer_system(3, 1.0, 1.0), &HomotopyOptions::default()).is_err());
    }
}
