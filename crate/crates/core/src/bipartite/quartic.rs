//! The dimer with a single Matsubara frequency.
//!
//! Writing `Δ = iπz`, `ε = 1/t` and `α = u/t`, the fixed-point equation
//! becomes the quartic `(1 + ε²π² z)(z − 1)³ = λ z` with `λ = 3α²/π²`.
//! Admissible (purely imaginary, lower half-plane) solutions are the real
//! roots with `z ≤ 0`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Serialize;

use crate::{Error, Result};

/// Roots with `|Im z| ≤ REAL_TOL · max(1, |z|)` count as real.
const REAL_TOL: f64 = 1e-8;
const CLUSTER: f64 = 1e-5;

fn horner(coeffs: &[f64], z: Complex<f64>) -> Complex<f64> {
    coeffs
        .iter()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let d = coeffs.len() - 1;
    coeffs[..d]
        .iter()
        .enumerate()
        .map(|(k, c)| c * (d - k) as f64)
        .collect()
}

fn newton(coeffs: &[f64], dcoeffs: &[f64], mut z: Complex<f64>) -> Complex<f64> {
    for _ in 0..60 {
        let d = horner(dcoeffs, z);
        if d.norm() == 0.0 {
            break;
        }
        let step = horner(coeffs, z) / d;
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1e-300) {
            break;
        }
    }
    z
}

/// All complex roots of a real polynomial (coefficients highest degree
/// first) from the eigenvalues of its companion matrix, refined by Newton.
/// Near-coincident pairs are re-solved as a root of the derivative, which
/// restores full accuracy at double roots.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let start = coeffs.iter().position(|c| *c != 0.0).unwrap_or(coeffs.len());
    let c = &coeffs[start..];
    if c.len() <= 1 {
        return Vec::new();
    }
    let d = c.len() - 1;
    let lead = c[0];
    let companion = DMatrix::from_fn(d, d, |i, j| {
        if i == 0 {
            -c[j + 1] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let dc = derivative(c);
    let mut roots: Vec<Complex<f64>> = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| newton(c, &dc, *z))
        .collect();

    if d >= 2 {
        let ddc = derivative(&dc);
        for i in 0..d {
            for j in i + 1..d {
                let (ri, rj) = (roots[i], roots[j]);
                if (ri - rj).norm() > CLUSTER * (1.0 + ri.norm()) {
                    continue;
                }
                let mid = newton(&dc, &ddc, (ri + rj) / 2.0);
                let scale: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a.abs() * mid.norm().powi((d - k) as i32))
                    .sum();
                if horner(c, mid).norm() <= 1e-12 * scale.max(1.0) {
                    roots[i] = mid;
                    roots[j] = mid;
                }
            }
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Roots of the `t → ∞` limit `(z − 1)³ = λ z`.
pub fn limiting_cubic_roots(lambda: f64) -> Vec<Complex<f64>> {
    poly_roots(&[1.0, -3.0, 3.0 - lambda, -1.0])
}

#[derive(Debug, Clone, Serialize)]
pub struct QuarticRoot {
    /// `[re, im]` of `z = −iΔ/π`.
    pub z: [f64; 2],
    /// `[re, im]` of the dimensionless hybridization `Δ = iπz`.
    pub delta: [f64; 2],
    pub real: bool,
    pub admissible: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimerN0Roots {
    pub alpha: f64,
    pub t: f64,
    pub lambda: f64,
    pub roots: Vec<QuarticRoot>,
    /// Large-`t` branch `Δ ≈ −it²/π + i3πα²/t²`.
    pub asymptotic_delta: [f64; 2],
    /// Index into `roots` of the admissible root on that branch (largest `|z|`).
    pub escaping: Option<usize>,
}

impl DimerN0Roots {
    pub fn admissible_count(&self) -> usize {
        self.roots.iter().filter(|r| r.admissible).count()
    }

    pub fn escaping_delta(&self) -> Option<Complex<f64>> {
        self.escaping
            .map(|k| Complex::new(self.roots[k].delta[0], self.roots[k].delta[1]))
    }
}

/// Quartic coefficients `c z⁴ + (1−3c) z³ + (3c−3) z² + (3−c−λ) z − 1`,
/// `c = π²/t²`.
pub fn dimer_n0_quartic(alpha: f64, t: f64) -> Vec<f64> {
    let c = PI * PI / (t * t);
    let lambda = 3.0 * alpha * alpha / (PI * PI);
    vec![c, 1.0 - 3.0 * c, 3.0 * c - 3.0, 3.0 - c - lambda, -1.0]
}

pub fn solve_dimer_n0(alpha: f64, t: f64) -> Result<DimerN0Roots> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("alpha must be >= 0, got {alpha}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Parameter(format!("t must be positive, got {t}")));
    }
    let coeffs = dimer_n0_quartic(alpha, t);
    let roots: Vec<QuarticRoot> = poly_roots(&coeffs)
        .into_iter()
        .map(|z| {
            let real = z.im.abs() <= REAL_TOL * z.norm().max(1.0);
            let zr = if real { Complex::new(z.re, 0.0) } else { z };
            let delta = Complex::new(0.0, PI) * zr;
            QuarticRoot {
                z: [zr.re, zr.im],
                delta: [delta.re, delta.im],
                real,
                admissible: real && zr.re <= 0.0,
                residual: horner(&coeffs, zr).norm(),
            }
        })
        .collect();
    let escaping = roots
        .iter()
        .enumerate()
        .filter(|(_, r)| r.admissible)
        .max_by(|a, b| a.1.z[0].abs().total_cmp(&b.1.z[0].abs()))
        .map(|(k, _)| k);
    Ok(DimerN0Roots {
        alpha,
        t,
        lambda: 3.0 * alpha * alpha / (PI * PI),
        roots,
        asymptotic_delta: [0.0, -t * t / PI + 3.0 * PI * alpha * alpha / (t * t)],
        escaping,
    })
}
