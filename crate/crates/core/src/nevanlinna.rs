//! Pick-matrix admissibility checks and continued-fraction continuation of
//! Matsubara data to the real axis.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dmft::{green_local, SolveResult};
use crate::ipt::MatsubaraVector;
use crate::linalg::{default_tolerance, hermitian_eigen, max_norm};
use crate::scalar::{cabs, ExtFloat, Real};
use crate::{Error, Result};

/// Default broadening of the real-axis evaluation.
pub const DEFAULT_ETA: f64 = 0.01;

fn czero<T: Real>(bits: u32) -> Complex<T> {
    Complex::new(T::from_int(0, bits), T::from_int(0, bits))
}

fn cone<T: Real>(bits: u32) -> Complex<T> {
    Complex::new(T::from_int(1, bits), T::from_int(0, bits))
}

fn cbits<T: Real>(z: &Complex<T>) -> u32 {
    z.re.bits().max(z.im.bits())
}

/// `W(z) = (z − i)/(z + i)`; fails at the pole `z = −i`.
pub fn cayley<T: Real>(z: &Complex<T>) -> Option<Complex<T>> {
    let bits = cbits(z);
    let i = Complex::new(T::from_int(0, bits), T::from_int(1, bits));
    let den = z.clone() + i.clone();
    if den.norm_sqr().is_zero() {
        return None;
    }
    Some((z.clone() - i) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickSource {
    Green,
    Hybridization,
    SelfEnergy,
}

/// Hermitian Pick matrix of values `f_j` (in the closed upper half-plane for
/// an interpolable problem) at nodes `iω_j`.
#[derive(Debug, Clone)]
pub struct PickMatrix<T> {
    pub entries: Vec<Vec<Complex<T>>>,
    pub source: Option<PickSource>,
}

/// `P_ij = (1 − conj(W(f_i)) W(f_j)) / (1 − conj(W(z_i)) W(z_j))`.
///
/// Callers pass `−G`, `−Δ` or `−Σ` so that admissible data lands in the
/// upper half-plane.
pub fn pick_matrix<T: Real>(nodes: &[Complex<T>], values: &[Complex<T>]) -> Result<PickMatrix<T>> {
    if nodes.len() != values.len() {
        return Err(Error::Parameter(format!(
            "{} nodes but {} values",
            nodes.len(),
            values.len()
        )));
    }
    let wf = values
        .iter()
        .enumerate()
        .map(|(k, f)| cayley(f).ok_or(Error::CayleyPole(k)))
        .collect::<Result<Vec<_>>>()?;
    let wz = nodes
        .iter()
        .enumerate()
        .map(|(k, z)| cayley(z).ok_or(Error::CayleyPole(k)))
        .collect::<Result<Vec<_>>>()?;
    let n = nodes.len();
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let bits = cbits(&wf[i]);
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let num = cone::<T>(bits) - wf[i].conj() * wf[j].clone();
            let den = cone::<T>(bits) - wz[i].conj() * wz[j].clone();
            row.push(num / den);
        }
        entries.push(row);
    }
    // make the Hermitian structure exact
    for i in 0..n {
        entries[i][i] = Complex::new(entries[i][i].re.clone(), T::zero());
        for j in 0..i {
            entries[i][j] = entries[j][i].conj();
        }
    }
    Ok(PickMatrix { entries, source: None })
}

#[derive(Debug, Clone)]
pub struct MinEigen<T> {
    pub value: T,
    /// `‖Mv − λv‖₂` for the reported pair.
    pub residual: T,
    /// Max-norm of the matrix.
    pub norm: T,
}

/// Smallest eigenvalue by Hermitian cyclic Jacobi at the entries' width.
pub fn min_eigenvalue<T: Real>(m: &PickMatrix<T>) -> MinEigen<T> {
    let bits = m
        .entries
        .first()
        .and_then(|r| r.first())
        .map(cbits)
        .unwrap_or(53);
    let eig = hermitian_eigen(&m.entries, &default_tolerance::<T>(bits));
    MinEigen {
        value: eig.values[0].clone(),
        residual: eig.residual(&m.entries, 0),
        norm: max_norm(&m.entries),
    }
}

#[derive(Debug, Clone)]
pub struct PickEntry {
    pub min_eig: ExtFloat,
    /// `2^{-bits/2}` times the matrix max-norm.
    pub tolerance: ExtFloat,
    pub residual: ExtFloat,
    pub psd: bool,
    /// `|min_eig| ≤ tolerance`: the interpolation problem would have a unique
    /// (rational) solution.
    pub unique: bool,
}

#[derive(Debug, Clone)]
pub struct PickReport {
    pub bits: u32,
    pub green: PickEntry,
    pub delta: PickEntry,
    pub sigma: PickEntry,
}

impl PickReport {
    pub fn all_psd(&self) -> bool {
        self.green.psd && self.delta.psd && self.sigma.psd
    }

    pub fn entries(&self) -> [(PickSource, &PickEntry); 3] {
        [
            (PickSource::Green, &self.green),
            (PickSource::Hybridization, &self.delta),
            (PickSource::SelfEnergy, &self.sigma),
        ]
    }
}

pub fn pick_entry(m: &PickMatrix<ExtFloat>, bits: u32) -> PickEntry {
    let eig = min_eigenvalue(m);
    let tolerance = ExtFloat::exp2(-(bits as i32) / 2, bits) * eig.norm.clone();
    let psd = eig.value >= -tolerance.clone();
    let unique = eig.value.abs() <= tolerance;
    PickEntry {
        min_eig: eig.value,
        tolerance,
        residual: eig.residual,
        psd,
        unique,
    }
}

/// Physical-unit data `(iω_n, −f_n)` lifted to `bits`.
fn negated_physical<T: Real>(
    v: &MatsubaraVector<T>,
    factor: &ExtFloat,
    bits: u32,
) -> Vec<Complex<ExtFloat>> {
    v.values
        .iter()
        .map(|z| {
            Complex::new(
                -(z.re.to_ext(bits) * factor.clone()),
                -(z.im.to_ext(bits) * factor.clone()),
            )
        })
        .collect()
}

/// Physical Matsubara nodes `i(2n+1)π/β`.
pub fn physical_nodes(n_omega: usize, beta: f64, bits: u32) -> Vec<Complex<ExtFloat>> {
    let pi = ExtFloat::pi(bits);
    let beta = ExtFloat::new(beta, bits);
    (0..=n_omega)
        .map(|n| {
            Complex::new(
                ExtFloat::from_int(0, bits),
                ExtFloat::from_int(2 * n as i64 + 1, bits) * pi.clone() / beta.clone(),
            )
        })
        .collect()
}

/// Pick matrices of `−G`, `−Δ`, `−Σ` in physical units at `bits` of
/// precision. `G` is recomputed from Δ and Σ at that width rather than taken
/// from the solve.
pub fn pick_report<T: Real>(result: &SolveResult<T>, beta: f64, bits: u32) -> Result<PickReport> {
    let delta = result.delta.map(|x| x.to_ext(bits));
    let sigma = result.sigma.map(|x| x.to_ext(bits));
    let green = green_local(&delta, &sigma)?;
    let nodes = physical_nodes(delta.n_omega(), beta, bits);
    let b = ExtFloat::new(beta, bits);
    let inv_b = ExtFloat::from_int(1, bits) / b.clone();
    let build = |v: &MatsubaraVector<ExtFloat>, factor: &ExtFloat, source| -> Result<PickEntry> {
        let mut m = pick_matrix(&nodes, &negated_physical(v, factor, bits))?;
        m.source = Some(source);
        Ok(pick_entry(&m, bits))
    };
    Ok(PickReport {
        bits,
        green: build(&green, &b, PickSource::Green)?,
        delta: build(&delta, &inv_b, PickSource::Hybridization)?,
        sigma: build(&sigma, &inv_b, PickSource::SelfEnergy)?,
    })
}

/// Thiele continued fraction
/// `r(x) = a₀ / (1 + a₁(x − z₀) / (1 + a₂(x − z₁) / …))`.
#[derive(Debug, Clone)]
pub struct RationalInterpolant<T> {
    pub nodes: Vec<Complex<T>>,
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Real> RationalInterpolant<T> {
    /// Forward three-term recurrence; `None` at a pole.
    pub fn eval(&self, x: &Complex<T>) -> Option<Complex<T>> {
        let bits = cbits(x).max(cbits(&self.coeffs[0]));
        let (mut a0, mut a1) = (czero::<T>(bits), self.coeffs[0].clone());
        let (mut b0, mut b1) = (cone::<T>(bits), cone::<T>(bits));
        for (k, a) in self.coeffs.iter().enumerate().skip(1) {
            let step = (x.clone() - self.nodes[k - 1].clone()) * a.clone();
            let a2 = a1.clone() + step.clone() * a0;
            let b2 = b1.clone() + step * b0;
            a0 = a1;
            a1 = a2;
            b0 = b1;
            b1 = b2;
        }
        if b1.norm_sqr().is_zero() {
            return None;
        }
        let r = a1 / b1;
        if r.re.is_finite() && r.im.is_finite() {
            Some(r)
        } else {
            None
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

/// Builds the reciprocal-difference table and checks that every node is
/// reproduced within `2^{-bits/2}` relative error; rounding grows with the
/// depth of the fraction, so the check is looser than the working precision.
///
/// A level whose numerators all vanish (relative to `2^{-(bits-10)}`) ends the
/// fraction early: the data is then matched exactly by a lower-order
/// interpolant. A partially vanishing level is a breakdown.
pub fn thiele_interpolant<T: Real>(nodes: &[Complex<T>], values: &[Complex<T>]) -> Result<RationalInterpolant<T>> {
    let n = nodes.len();
    if n == 0 || n != values.len() {
        return Err(Error::Parameter(format!(
            "need matching non-empty nodes and values, got {} and {}",
            n,
            values.len()
        )));
    }
    let bits = cbits(&values[0]).max(cbits(&nodes[0]));
    let rel = T::exp2(-(bits as i32 - 10), bits);
    let node_tol = T::exp2(-(bits as i32) / 2, bits);
    for i in 0..n {
        for j in 0..i {
            if (nodes[i].clone() - nodes[j].clone()).norm_sqr().is_zero() {
                return Err(Error::Parameter(format!("nodes {j} and {i} coincide")));
            }
        }
    }

    let mut level: Vec<Complex<T>> = values.to_vec();
    let mut coeffs = vec![level[0].clone()];
    if cabs(&level[0]).is_zero() {
        return Err(Error::Degenerate(0));
    }
    for p in 1..n {
        let pivot = level[p - 1].clone();
        let mut next = level.clone();
        let mut vanished = 0;
        for i in p..n {
            let num = pivot.clone() - level[i].clone();
            let scale = cabs(&pivot).max_of(cabs(&level[i]));
            if cabs(&num) <= rel.clone() * scale {
                next[i] = czero(bits);
                vanished += 1;
            } else {
                next[i] = num / ((nodes[i].clone() - nodes[p - 1].clone()) * level[i].clone());
            }
        }
        if vanished == n - p {
            break;
        }
        if vanished > 0 {
            return Err(Error::Degenerate(p));
        }
        coeffs.push(next[p].clone());
        level = next;
    }

    let interp = RationalInterpolant {
        nodes: nodes.to_vec(),
        coeffs,
    };
    for (k, (z, f)) in nodes.iter().zip(values).enumerate() {
        let err = match interp.eval(z) {
            Some(r) => {
                let scale = cabs(f);
                let d = cabs(&(r - f.clone()));
                if scale.is_zero() {
                    d
                } else {
                    d / scale
                }
            }
            None => T::from_f64_bits(f64::INFINITY, bits),
        };
        if !(err <= node_tol) {
            return Err(Error::NodeMismatch {
                index: k,
                error: err.to_f64(),
            });
        }
    }
    Ok(interp)
}

/// `ρ(ε) = −Im r(ε + iη)/π`; NaN where `r` has a pole.
pub fn density_at<T: Real>(r: &RationalInterpolant<T>, eps: f64, eta: f64) -> f64 {
    let bits = cbits(&r.coeffs[0]);
    let x = Complex::new(T::from_f64_bits(eps, bits), T::from_f64_bits(eta, bits));
    match r.eval(&x) {
        Some(v) => -v.im.to_f64() / PI,
        None => f64::NAN,
    }
}

/// Uniform mesh `ε_j = ε_min + j(ε_max − ε_min)/(N_mesh − 1)`, both ends included.
pub fn mesh(emin: f64, emax: f64, n_mesh: usize) -> Vec<f64> {
    match n_mesh {
        0 => Vec::new(),
        1 => vec![emin],
        _ => (0..n_mesh)
            .map(|j| emin + (emax - emin) * j as f64 / (n_mesh - 1) as f64)
            .collect(),
    }
}

pub fn spectral_density<T: Real>(
    r: &RationalInterpolant<T>,
    emin: f64,
    emax: f64,
    n_mesh: usize,
    eta: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    Ok(mesh(emin, emax, n_mesh)
        .into_iter()
        .map(|e| (e, density_at(r, e, eta)))
        .collect())
}

/// Continues the physical Green's function of a solve through its first
/// `nodes` Matsubara points (all of them when `None`) at `bits` of precision.
pub fn continue_green<T: Real>(
    result: &SolveResult<T>,
    beta: f64,
    bits: u32,
    nodes: Option<usize>,
) -> Result<RationalInterpolant<ExtFloat>> {
    let delta = result.delta.map(|x| x.to_ext(bits));
    let sigma = result.sigma.map(|x| x.to_ext(bits));
    let green = green_local(&delta, &sigma)?;
    let count = nodes.unwrap_or(green.len()).clamp(1, green.len());
    let b = ExtFloat::new(beta, bits);
    let z = physical_nodes(green.n_omega(), beta, bits);
    let f: Vec<Complex<ExtFloat>> = green
        .values
        .iter()
        .map(|g| g.scale(b.clone()))
        .collect();
    thiele_interpolant(&z[..count], &f[..count])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn matsubara(n: usize) -> Vec<Complex<f64>> {
        (0..n).map(|k| c(0.0, (2 * k + 1) as f64 * PI)).collect()
    }

    #[test]
    fn cayley_values() {
        assert!(cayley(&c(0.0, 1.0)).unwrap().norm() < 1e-16);
        assert!((cayley(&c(0.0, 0.0)).unwrap() - c(-1.0, 0.0)).norm() < 1e-16);
        assert!((cayley(&c(1.0, 1.0)).unwrap() - c(0.2, -0.4)).norm() < 1e-16);
        assert!(cayley(&c(0.0, -1.0)).is_none());
    }

    #[test]
    fn one_by_one_pick_matrices() {
        let z = [c(0.0, PI)];
        let m = pick_matrix(&z, &[c(0.0, 1.0)]).unwrap();
        let w = (PI - 1.0) / (PI + 1.0);
        assert!((m.entries[0][0].re - 1.0 / (1.0 - w * w)).abs() < 1e-14);
        let m = pick_matrix(&z, &[c(0.0, -0.5)]).unwrap();
        assert!(m.entries[0][0].re < 0.0);
        assert!(matches!(pick_matrix(&z, &[c(0.0, -1.0)]), Err(Error::CayleyPole(0))));
    }

    #[test]
    fn pick_function_samples_are_psd() {
        let z = matsubara(3);
        let f: Vec<_> = z.iter().map(|x| -1.0 / x).collect();
        let m = pick_matrix(&z, &f).unwrap();
        assert!(min_eigenvalue(&m).value > -1e-14);
    }

    #[test]
    fn small_spectra() {
        let diag = |a: f64, b: f64| PickMatrix {
            entries: vec![vec![c(a, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(b, 0.0)]],
            source: None,
        };
        assert_eq!(min_eigenvalue(&diag(2.0, -1.0)).value, -1.0);
        let swap = PickMatrix {
            entries: vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
            source: None,
        };
        assert!((min_eigenvalue(&swap).value + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_data_gives_constant_interpolant() {
        let z = matsubara(5);
        let f = vec![c(0.0, -1.0); 5];
        let r = thiele_interpolant(&z, &f).unwrap();
        assert_eq!(r.order(), 1);
        assert!((r.eval(&c(0.3, 0.2)).unwrap() - c(0.0, -1.0)).norm() < 1e-15);
        let rho = spectral_density(&r, -1.0, 1.0, 5, 0.1).unwrap();
        assert!(rho.iter().all(|(_, v)| (v - 1.0 / PI).abs() < 1e-15));
    }

    #[test]
    fn recovers_simple_pole() {
        let z = matsubara(4);
        let f: Vec<_> = z.iter().map(|x| -1.0 / x).collect();
        let r = thiele_interpolant(&z, &f).unwrap();
        for x in [c(0.5, 0.5), c(-2.0, 1.0), c(3.0, 0.01)] {
            assert!((r.eval(&x).unwrap() + 1.0 / x).norm() < 1e-10);
        }
    }

    #[test]
    fn mesh_is_inclusive() {
        let m = mesh(-10.0, 10.0, 1000);
        assert_eq!(m.len(), 1000);
        assert_eq!(m[0], -10.0);
        assert_eq!(m[999], 10.0);
        assert!(spectral_density(
            &RationalInterpolant {
                nodes: vec![c(0.0, 1.0)],
                coeffs: vec![c(0.0, -1.0)]
            },
            0.0,
            1.0,
            3,
            0.0
        )
        .is_err());
    }
}
