//! Bath update, the DMFT map `Φ(Δ) = B(u² F_N(Δ))` and its damped fixed-point
//! iteration, in dimensionless units.
//!
//! Physical inputs `(β, T_hop, U)` enter through [`PhysicalParams`]; the
//! iteration works with `t = βT_hop`, `u = βU`. Outputs convert back with
//! `Δ = Δ'/β`, `Σ = Σ'/β`, `G = βG'`.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::ipt::{bits_of, ipt_sigma, MatsubaraVector, SINGULAR_THRESHOLD};
use crate::model::ImpurityPartition;
use crate::scalar::{lift, matsubara_point, Real, DOUBLE_BITS};
use crate::{Error, Result};

/// Run parameters in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub beta: f64,
    pub hopping: f64,
    pub repulsion: f64,
    pub n_omega: usize,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.hopping >= 0.0 && self.hopping.is_finite()) {
            return Err(Error::Parameter(format!("hopping must be >= 0, got {}", self.hopping)));
        }
        if !(self.repulsion >= 0.0 && self.repulsion.is_finite()) {
            return Err(Error::Parameter(format!("repulsion must be >= 0, got {}", self.repulsion)));
        }
        Ok(())
    }

    pub fn dimensionless(&self) -> DimensionlessParams {
        DimensionlessParams::new(self.beta * self.hopping, self.beta * self.repulsion, self.n_omega)
    }

    /// Physical Matsubara frequencies `ω_n = (2n+1)π/β`.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..=self.n_omega)
            .map(|n| (2 * n + 1) as f64 * PI / self.beta)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    pub t: f64,
    pub u: f64,
    pub n_omega: usize,
    /// `t²/π²`
    pub a: f64,
    /// `u²/π⁴`
    pub b: f64,
}

impl DimensionlessParams {
    pub fn new(t: f64, u: f64, n_omega: usize) -> Self {
        DimensionlessParams {
            t,
            u,
            n_omega,
            a: t * t / (PI * PI),
            b: u * u / PI.powi(4),
        }
    }

    /// Inverse of the `(a, b)` parametrisation used by the polynomial systems.
    pub fn from_ab(a: f64, b: f64, n_omega: usize) -> Self {
        let t = a.sqrt() * PI;
        let u = b.sqrt() * PI * PI;
        DimensionlessParams { t, u, n_omega, a, b }
    }
}

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `Δ⁰ = 0`.
    Zero,
    /// `Δ⁰_n = 1/(i(2n+1)π)`.
    Resolvent,
    Custom(MatsubaraVector<f64>),
}

impl std::str::FromStr for Init {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Init::Zero),
            "resolvent" => Ok(Init::Resolvent),
            _ => Err(Error::Parameter(format!("unknown init {s:?}; expected zero or resolvent"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Max-norm step threshold; `None` picks [`default_tolerance`].
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Damping θ ∈ (0, 1].
    pub mixing: f64,
    pub init: Init,
    pub precision_bits: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: None,
            max_iter: 500,
            mixing: 1.0,
            init: Init::Zero,
            precision_bits: DOUBLE_BITS,
        }
    }
}

/// `1e-13` in double precision, `2^-(bits-13)` above.
pub fn default_tolerance(bits: u32) -> f64 {
    if bits <= DOUBLE_BITS {
        1e-13
    } else {
        2f64.powi(-(bits as i32 - 13))
    }
}

impl SolverConfig {
    pub fn tolerance(&self) -> f64 {
        self.tol.unwrap_or_else(|| default_tolerance(self.precision_bits))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance() > 0.0) {
            return Err(Error::Parameter("tol must be positive".into()));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::Parameter(format!("mixing must lie in (0, 1], got {}", self.mixing)));
        }
        if self.precision_bits < DOUBLE_BITS {
            return Err(Error::Parameter(format!(
                "precision must be at least {DOUBLE_BITS} bits, got {}",
                self.precision_bits
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub params: DimensionlessParams,
    pub delta: MatsubaraVector<T>,
    pub sigma: MatsubaraVector<T>,
    pub green: MatsubaraVector<T>,
    /// Max-norm step sizes `‖Δ^{k+1} − Δ^k‖`.
    pub residuals: Vec<f64>,
    /// Index of the first step below tolerance, or `max_iter`.
    pub iterations: usize,
    pub converged: bool,
    pub admissible: bool,
    /// First iteration whose self-energy left the lower half-plane.
    pub left_admissible_at: Option<usize>,
    /// Largest `|Re|` seen over all iterates of Δ and Σ and the final G.
    pub max_abs_re: f64,
    pub precision_bits: u32,
}

fn singular_at(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Singular { index, .. } => Error::Singular {
            index,
            iteration: Some(iteration),
        },
        other => other,
    }
}

/// `Δ_n = t² Σ_k ρ_k / (i(2n+1)π − tε_k − Σ_n)`.
pub fn bath_update<T: Real>(
    sigma: &MatsubaraVector<T>,
    p: &DimensionlessParams,
    part: &ImpurityPartition<T>,
) -> Result<MatsubaraVector<T>> {
    let bits = bits_of(sigma);
    let pi = T::pi(bits);
    let t = T::from_f64_bits(p.t, bits);
    let t2 = t.clone() * t.clone();
    let threshold = T::from_f64_bits(SINGULAR_THRESHOLD * SINGULAR_THRESHOLD, bits);
    let shifts: Vec<(T, T)> = part
        .eigenvalues
        .iter()
        .zip(&part.weights)
        .map(|(e, r)| (t.clone() * e.clone(), t2.clone() * r.clone()))
        .collect();
    let mut out = Vec::with_capacity(sigma.len());
    for (n, s) in sigma.values.iter().enumerate() {
        let base = matsubara_point::<T>(n as i64, &pi) - s.clone();
        let mut acc = Complex::new(T::from_int(0, bits), T::from_int(0, bits));
        for (shift, weight) in &shifts {
            let den = Complex::new(base.re.clone() - shift.clone(), base.im.clone());
            if den.norm_sqr() < threshold {
                return Err(Error::Singular {
                    index: n as i64,
                    iteration: None,
                });
            }
            acc = acc + Complex::new(weight.clone(), T::zero()) / den;
        }
        out.push(acc);
    }
    Ok(MatsubaraVector::new(out))
}

#[derive(Debug, Clone)]
pub struct MapOutput<T> {
    pub delta: MatsubaraVector<T>,
    pub sigma: MatsubaraVector<T>,
    /// False when the intermediate self-energy left the lower half-plane.
    pub sigma_admissible: bool,
}

/// `Φ(Δ) = B(u² F_N(Δ))`.
pub fn dmft_map<T: Real>(
    delta: &MatsubaraVector<T>,
    p: &DimensionlessParams,
    part: &ImpurityPartition<T>,
) -> Result<MapOutput<T>> {
    let u = T::from_f64_bits(p.u, bits_of(delta));
    let sigma = ipt_sigma(delta, &u)?;
    let sigma_admissible = sigma.is_admissible();
    let next = bath_update(&sigma, p, part)?;
    Ok(MapOutput {
        delta: next,
        sigma,
        sigma_admissible,
    })
}

/// `G_n = 1/(i(2n+1)π − Δ_n − Σ_n)`.
pub fn green_local<T: Real>(delta: &MatsubaraVector<T>, sigma: &MatsubaraVector<T>) -> Result<MatsubaraVector<T>> {
    let bits = bits_of(delta).max(bits_of(sigma));
    let pi = T::pi(bits);
    let threshold = T::from_f64_bits(SINGULAR_THRESHOLD * SINGULAR_THRESHOLD, bits);
    let mut out = Vec::with_capacity(delta.len());
    for (n, (d, s)) in delta.values.iter().zip(&sigma.values).enumerate() {
        let den = matsubara_point::<T>(n as i64, &pi) - d.clone() - s.clone();
        if den.norm_sqr() < threshold {
            return Err(Error::Singular {
                index: n as i64,
                iteration: None,
            });
        }
        out.push(Complex::new(T::one(), T::zero()) / den);
    }
    Ok(MatsubaraVector::new(out))
}

pub fn initial_delta<T: Real>(init: &Init, n_omega: usize, bits: u32) -> Result<MatsubaraVector<T>> {
    match init {
        Init::Zero => Ok(MatsubaraVector::zeros(n_omega, bits)),
        Init::Resolvent => {
            let pi = T::pi(bits);
            Ok(MatsubaraVector::from_fn(n_omega, |n| {
                Complex::new(T::one(), T::zero()) / matsubara_point::<T>(n as i64, &pi)
            }))
        }
        Init::Custom(v) => {
            if v.n_omega() != n_omega {
                return Err(Error::Parameter(format!(
                    "custom init has N={} but the run uses N={n_omega}",
                    v.n_omega()
                )));
            }
            Ok(MatsubaraVector::new(v.values.iter().map(|z| lift(*z, bits)).collect()))
        }
    }
}

/// Damped iteration `Δ^{k+1} = (1−θ)Δ^k + θΦ(Δ^k)`.
///
/// Stops at the first step whose max-norm is at most the tolerance and
/// returns that step's endpoint. Exhausting `max_iter` is not an error.
pub fn solve_fixed_point<T: Real>(
    p: &DimensionlessParams,
    part: &ImpurityPartition<T>,
    cfg: &SolverConfig,
) -> Result<SolveResult<T>> {
    cfg.validate()?;
    let bits = cfg.precision_bits;
    let tol = cfg.tolerance();
    let theta = T::from_f64_bits(cfg.mixing, bits);
    let keep = T::one() - theta.clone();
    let mut delta: MatsubaraVector<T> = initial_delta(&cfg.init, p.n_omega, bits)?;

    let mut residuals = Vec::new();
    let mut left_admissible_at = None;
    let mut max_abs_re = delta.max_abs_re();
    let mut converged = false;
    let mut iterations = cfg.max_iter;

    for k in 0..cfg.max_iter {
        let step = dmft_map(&delta, p, part).map_err(singular_at(k))?;
        if left_admissible_at.is_none() && !(step.sigma_admissible && delta.is_admissible()) {
            left_admissible_at = Some(k);
        }
        let next = if cfg.mixing == 1.0 {
            step.delta
        } else {
            MatsubaraVector::new(
                delta
                    .values
                    .iter()
                    .zip(&step.delta.values)
                    .map(|(old, new)| old.scale(keep.clone()) + new.scale(theta.clone()))
                    .collect(),
            )
        };
        let r = next.distance(&delta).to_f64();
        residuals.push(r);
        max_abs_re = max_abs_re.max(step.sigma.max_abs_re()).max(next.max_abs_re());
        delta = next;
        if !r.is_finite() {
            break;
        }
        if r <= tol {
            converged = true;
            iterations = k;
            break;
        }
    }
    if converged {
        log::debug!("converged after {iterations} iterations (t={}, u={})", p.t, p.u);
    } else {
        log::warn!("no convergence within {} iterations (t={}, u={})", cfg.max_iter, p.t, p.u);
    }

    let u = T::from_f64_bits(p.u, bits);
    let last = residuals.len();
    let sigma = ipt_sigma(&delta, &u).map_err(singular_at(last))?;
    let green = green_local(&delta, &sigma).map_err(singular_at(last))?;
    max_abs_re = max_abs_re.max(sigma.max_abs_re()).max(green.max_abs_re());
    let admissible = delta.is_admissible() && sigma.is_admissible() && green.is_admissible();
    Ok(SolveResult {
        params: *p,
        delta,
        sigma,
        green,
        residuals,
        iterations,
        converged,
        admissible,
        left_admissible_at,
        max_abs_re,
        precision_bits: bits,
    })
}

/// `Δ_phys = Δ'/β` (also for Σ).
pub fn energy_to_physical<T: Real>(v: &MatsubaraVector<T>, beta: f64) -> MatsubaraVector<T> {
    let bits = bits_of(v);
    v.scale(&(T::one() / T::from_f64_bits(beta, bits)))
}

/// `G_phys = βG'`.
pub fn green_to_physical<T: Real>(v: &MatsubaraVector<T>, beta: f64) -> MatsubaraVector<T> {
    v.scale(&T::from_f64_bits(beta, bits_of(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GraphKind, HubbardGraph};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn part(kind: GraphKind) -> ImpurityPartition<f64> {
        HubbardGraph::build(kind).unwrap().partition(53)
    }

    #[test]
    fn dimer_bath_at_zero_sigma() {
        let p = DimensionlessParams::new(1.0, 0.0, 1);
        let d = bath_update(&MatsubaraVector::zeros(1, 53), &p, &part(GraphKind::Dimer)).unwrap();
        assert!((d.values[0] - c(0.0, -1.0 / PI)).norm() < 1e-16);
        assert!((d.values[1] - c(0.0, -1.0 / (3.0 * PI))).norm() < 1e-16);
    }

    #[test]
    fn ring4_bath_at_zero_sigma() {
        let p = DimensionlessParams::new(1.0, 0.0, 4);
        let d = bath_update(&MatsubaraVector::zeros(4, 53), &p, &part(GraphKind::Ring(4))).unwrap();
        for (n, z) in d.values.iter().enumerate() {
            let w = (2 * n + 1) as f64 * PI;
            let expected = c(0.0, -2.0 * w / (w * w + 2.0));
            assert!((z - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn green_trivial() {
        let z = MatsubaraVector::<f64>::zeros(2, 53);
        let g = green_local(&z, &z).unwrap();
        for (n, v) in g.values.iter().enumerate() {
            assert!((v - c(0.0, -1.0 / ((2 * n + 1) as f64 * PI))).norm() < 1e-16);
        }
        let d = MatsubaraVector::new(vec![c(0.0, -1.0)]);
        let s = MatsubaraVector::new(vec![c(0.0, -2.0)]);
        let g = green_local(&d, &s).unwrap();
        assert!((g.values[0] - c(0.0, -1.0 / (PI + 3.0))).norm() < 1e-16);
    }

    #[test]
    fn dimer_n0_map_matches_scalar_form() {
        let p = DimensionlessParams::new(1.0, 1.0, 0);
        let prt = part(GraphKind::Dimer);
        for d in [c(0.0, 0.0), c(0.3, -0.7), c(-1.5, -0.01)] {
            let out = dmft_map(&MatsubaraVector::new(vec![d]), &p, &prt).unwrap();
            let w = c(0.0, PI) - d;
            let expected = 1.0 / (c(0.0, PI) - 3.0 / (w.norm_sqr() * w));
            assert!((out.delta.values[0] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn trivial_limits_converge_fast() {
        let prt = part(GraphKind::Dimer);
        let r = solve_fixed_point(&DimensionlessParams::new(2.0, 0.0, 3), &prt, &SolverConfig::default()).unwrap();
        assert!(r.converged && r.iterations == 1);
        assert!(r.sigma.values.iter().all(|z| z.norm() == 0.0));
        let r = solve_fixed_point(&DimensionlessParams::new(0.0, 2.0, 3), &prt, &SolverConfig::default()).unwrap();
        assert!(r.converged && r.iterations == 0);
        assert!(r.delta.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn exhausted_iterations_are_reported_not_raised() {
        let cfg = SolverConfig {
            max_iter: 2,
            ..SolverConfig::default()
        };
        let r = solve_fixed_point(&DimensionlessParams::new(1.0, 4.0, 10), &part(GraphKind::Dimer), &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
        assert_eq!(r.residuals.len(), 2);
    }

    #[test]
    fn damping_reaches_the_same_point() {
        let prt = part(GraphKind::Dimer);
        let p = DimensionlessParams::new(1.0, 2.0, 5);
        let a = solve_fixed_point(&p, &prt, &SolverConfig::default()).unwrap();
        let b = solve_fixed_point(
            &p,
            &prt,
            &SolverConfig {
                mixing: 0.5,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert!(a.converged && b.converged);
        assert!(a.delta.distance(&b.delta) < 1e-12);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SolverConfig {
            mixing: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve_fixed_point(&DimensionlessParams::new(1.0, 1.0, 1), &part(GraphKind::Dimer), &cfg).is_err());
    }

    #[test]
    fn unit_conversion() {
        let v = MatsubaraVector::new(vec![c(2.0, -4.0)]);
        assert_eq!(energy_to_physical(&v, 2.0).values[0], c(1.0, -2.0));
        assert_eq!(green_to_physical(&v, 2.0).values[0], c(4.0, -8.0));
        let p = PhysicalParams {
            beta: 2.0,
            hopping: 1.5,
            repulsion: 3.0,
            n_omega: 1,
        };
        let d = p.dimensionless();
        assert_eq!((d.t, d.u), (3.0, 6.0));
        assert!((d.a - 9.0 / (PI * PI)).abs() < 1e-15);
    }
}
