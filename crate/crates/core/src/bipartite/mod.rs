//! Polynomial reduction of the particle-hole symmetric equations on bipartite
//! graphs.
//!
//! Purely imaginary hybridizations `Δ_n = −i(2n+1)π y_n` are parametrised by
//! `x_n = 1/(1+y_n)`; admissible solutions have every `x_n ∈ (0, 1]`. With
//! `a = t²/π²` and `b = u²/π⁴` the self-energy becomes
//! `Σ_n = iπ b P_{n,N}(x)/(2n+1)` for homogeneous cubics `P_{n,N}`.

mod homotopy;
mod quartic;

pub use homotopy::{count_admissible, homotopy_solve, CellCount, HomotopyOptions, PathOutcome, Root, RootSet};
pub use quartic::{limiting_cubic_roots, poly_roots, solve_dimer_n0, DimerN0Roots, QuarticRoot};

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::ipt::MatsubaraVector;
use crate::model::PairedSpectrum;

/// Sparse multivariate polynomial; exponent tuples are unique and zero
/// coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePolynomial<C> {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, C>,
}

impl<C: Clone + Zero> SparsePolynomial<C> {
    pub fn new(nvars: usize) -> Self {
        SparsePolynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn add_term(&mut self, exps: Vec<u32>, coef: C) {
        assert_eq!(exps.len(), self.nvars, "exponent tuple has wrong arity");
        match self.terms.entry(exps) {
            Entry::Occupied(mut o) => {
                let v = o.get().clone() + coef;
                if v.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            Entry::Vacant(v) => {
                if !coef.is_zero() {
                    v.insert(coef);
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &C)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn coefficient(&self, exps: &[u32]) -> Option<&C> {
        self.terms.get(exps)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Every monomial has total degree `d`.
    pub fn is_homogeneous(&self, d: u32) -> bool {
        self.terms.keys().all(|e| e.iter().sum::<u32>() == d)
    }

    pub fn map_coeffs<D: Clone + Zero>(&self, f: impl Fn(&C) -> D) -> SparsePolynomial<D> {
        let mut out = SparsePolynomial::new(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), f(c));
        }
        out
    }
}

impl SparsePolynomial<f64> {
    pub fn eval(&self, x: &[Complex<f64>]) -> Complex<f64> {
        self.terms
            .iter()
            .map(|(e, c)| monomial(e, x) * c)
            .sum()
    }

    pub fn eval_real(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// Partial derivative in variable `j`.
    pub fn derivative(&self, j: usize) -> SparsePolynomial<f64> {
        let mut out = SparsePolynomial::new(self.nvars);
        for (e, c) in &self.terms {
            if e[j] > 0 {
                let mut d = e.clone();
                d[j] -= 1;
                out.add_term(d, c * e[j] as f64);
            }
        }
        out
    }

    /// Dense univariate coefficients, highest degree first (single variable).
    pub fn univariate_coeffs(&self) -> Vec<f64> {
        assert_eq!(self.nvars, 1);
        let d = self.total_degree() as usize;
        let mut out = vec![0.0; d + 1];
        for (e, c) in &self.terms {
            out[d - e[0] as usize] += c;
        }
        out
    }
}

fn monomial(e: &[u32], x: &[Complex<f64>]) -> Complex<f64> {
    e.iter()
        .zip(x)
        .filter(|(k, _)| **k > 0)
        .map(|(&k, v)| v.powu(k))
        .fold(Complex::new(1.0, 0.0), |a, b| a * b)
}

impl fmt::Display for SparsePolynomial<BigRational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms.iter().rev().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (j, p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => write!(f, "*x{j}")?,
                    _ => write!(f, "*x{j}^{p}")?,
                }
            }
        }
        Ok(())
    }
}

fn odd(k: i64) -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2 * k + 1))
}

fn cube_exps(nvars: usize, idx: [usize; 3]) -> Vec<u32> {
    let mut e = vec![0u32; nvars];
    for i in idx {
        e[i] += 1;
    }
    e
}

/// The homogeneous cubic `P_{n,N}` as the sum of three constrained sums:
///
/// ```text
/// (2n+1) [ 1_{n≥1} Σ_{n₁+n₂+n₃=n−1} ∏ x_{n_j}/(2n_j+1)
///        − 3 Σ_{n ≤ n₁+n₂ ≤ N+n} x_{n₁} x_{n₂} x_{n₁+n₂−n} / ((2n₁+1)(2n₂+1)(2n₁+2n₂−2n+1))
///        + 3·1_{n≤N−1} Σ_{n₁+n₂ ≤ N−n−1} x_{n₁} x_{n₂} x_{n₁+n₂+n+1} / ((2n₁+1)(2n₂+1)(2n₁+2n₂+2n+3)) ]
/// ```
///
/// with all indices in `[0, N]`.
pub fn build_p(n: usize, cutoff: usize) -> SparsePolynomial<BigRational> {
    assert!(n <= cutoff, "build_p needs n <= N");
    let nv = cutoff + 1;
    let (ni, big) = (n as i64, cutoff as i64);
    let pre = BigRational::from_integer(BigInt::from(2 * ni + 1));
    let three = BigRational::from_integer(BigInt::from(3));
    let mut p = SparsePolynomial::new(nv);

    if n >= 1 {
        for n1 in 0..n {
            for n2 in 0..n - n1 {
                let n3 = n - 1 - n1 - n2;
                let c = odd(n1 as i64) * odd(n2 as i64) * odd(n3 as i64);
                p.add_term(cube_exps(nv, [n1, n2, n3]), &pre * c);
            }
        }
    }
    for n1 in 0..=big {
        for n2 in 0..=big {
            let s = n1 + n2;
            if s < ni || s > big + ni {
                continue;
            }
            let k = s - ni;
            let c = odd(n1) * odd(n2) * odd(k);
            p.add_term(
                cube_exps(nv, [n1 as usize, n2 as usize, k as usize]),
                -(&pre * &three * c),
            );
        }
    }
    if ni < big {
        for n1 in 0..=big {
            for n2 in 0..=big {
                if n1 + n2 > big - ni - 1 {
                    continue;
                }
                let k = n1 + n2 + ni + 1;
                let c = odd(n1) * odd(n2) * odd(k);
                p.add_term(
                    cube_exps(nv, [n1 as usize, n2 as usize, k as usize]),
                    &pre * &three * c,
                );
            }
        }
    }
    p
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// A square polynomial system in `x` with its origin parameters.
#[derive(Debug, Clone)]
pub struct PolySystem {
    pub equations: Vec<SparsePolynomial<f64>>,
    pub a: f64,
    pub b: f64,
}

impl PolySystem {
    pub fn nvars(&self) -> usize {
        self.equations.len()
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.equations.iter().map(|e| e.total_degree()).collect()
    }

    pub fn eval(&self, x: &[Complex<f64>]) -> Vec<Complex<f64>> {
        self.equations.iter().map(|e| e.eval(x)).collect()
    }

    /// Max-norm of the residual.
    pub fn residual(&self, x: &[Complex<f64>]) -> f64 {
        self.eval(x).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `(x_n − 1)((2n+1)² − b P_{n,N}(x)) + a x_n = 0` for `n = 0..=N`.
///
/// When `b > 0` equation `n` has `2M + 2` monomials, `M` being the monomial
/// count of `P_{n,N}`: the quartic part `x_n P`, the cubic part `P`, `x_n` and
/// the constant cannot merge because their degrees differ.
pub fn dimer_system(cutoff: usize, a: f64, b: f64) -> PolySystem {
    let nv = cutoff + 1;
    let equations = (0..=cutoff)
        .map(|n| {
            let w = ((2 * n + 1) * (2 * n + 1)) as f64;
            let p = build_p(n, cutoff);
            let mut eq = SparsePolynomial::new(nv);
            let mut xn = vec![0u32; nv];
            xn[n] = 1;
            eq.add_term(xn, w + a);
            eq.add_term(vec![0u32; nv], -w);
            if b != 0.0 {
                for (e, c) in p.terms() {
                    let c = to_f64(c);
                    eq.add_term(e.to_vec(), b * c);
                    let mut e4 = e.to_vec();
                    e4[n] += 1;
                    eq.add_term(e4, -b * c);
                }
            }
            eq
        })
        .collect();
    PolySystem { equations, a, b }
}

/// Residual of the general bipartite equation
/// `(1−x_n)/x_n − a [Σ_{ν>0} 2ρ_ν D/(D² + (2n+1)² a ν²) + ρ₀/D]`
/// with `D = (2n+1)² − b P_{n,N}(x)` and `ρ` the weights of `w` (so that
/// `2Σρ_ν + ρ₀ = deg`). Components with a vanishing denominator are NaN.
pub fn residual_general(x: &[f64], a: f64, b: f64, spectrum: &PairedSpectrum) -> Vec<f64> {
    let cutoff = x.len() - 1;
    (0..=cutoff)
        .map(|n| {
            let w = ((2 * n + 1) * (2 * n + 1)) as f64;
            let p = build_p(n, cutoff).map_coeffs(to_f64).eval_real(x);
            let d = w - b * p;
            let mut rhs = 0.0;
            for &(nu, rho) in &spectrum.positive {
                let den = d * d + w * a * nu * nu;
                if den == 0.0 {
                    return f64::NAN;
                }
                rhs += 2.0 * rho * d / den;
            }
            if spectrum.kernel_weight != 0.0 {
                if d == 0.0 {
                    return f64::NAN;
                }
                rhs += spectrum.kernel_weight / d;
            }
            if x[n] == 0.0 {
                return f64::NAN;
            }
            (1.0 - x[n]) / x[n] - a * rhs
        })
        .collect()
}

/// `x_n = 1/(1 + y_n)` with `y_n = iΔ_n/((2n+1)π)`; only the imaginary part
/// of Δ enters.
pub fn delta_to_x(delta: &MatsubaraVector<f64>) -> Vec<f64> {
    delta
        .values
        .iter()
        .enumerate()
        .map(|(n, d)| {
            let y = -d.im / ((2 * n + 1) as f64 * PI);
            1.0 / (1.0 + y)
        })
        .collect()
}

/// `Δ_n = −i(2n+1)π (1 − x_n)/x_n`.
pub fn x_to_delta(x: &[f64]) -> MatsubaraVector<f64> {
    MatsubaraVector::new(
        x.iter()
            .enumerate()
            .map(|(n, &xn)| Complex::new(0.0, -((2 * n + 1) as f64) * PI * (1.0 - xn) / xn))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    /// `(2n+1) Σ_{n₁+n₂+n₃=n−1} ∏ x_{σ(n_j)}/(2n_j+1)` over `n_j ∈ [−(N+1), N]`
    /// with `σ(m) = m` for `m ≥ 0` and `−m−1` otherwise.
    fn enumerate_p(n: usize, cutoff: usize) -> SparsePolynomial<BigRational> {
        let nv = cutoff + 1;
        let m = cutoff as i64 + 1;
        let sigma = |k: i64| if k >= 0 { k as usize } else { (-k - 1) as usize };
        let mut p = SparsePolynomial::new(nv);
        for n1 in -m..m {
            for n2 in -m..m {
                let n3 = n as i64 - 1 - n1 - n2;
                if !(-m..m).contains(&n3) {
                    continue;
                }
                let c = q(2 * n as i64 + 1, 1) * odd(n1) * odd(n2) * odd(n3);
                p.add_term(cube_exps(nv, [sigma(n1), sigma(n2), sigma(n3)]), c);
            }
        }
        p
    }

    #[test]
    fn small_generators() {
        let p00 = build_p(0, 0);
        assert_eq!(p00.len(), 1);
        assert_eq!(p00.coefficient(&[3]), Some(&q(-3, 1)));
        let p01 = build_p(0, 1);
        assert_eq!(p01.len(), 3);
        assert_eq!(p01.coefficient(&[3, 0]), Some(&q(-3, 1)));
        assert_eq!(p01.coefficient(&[2, 1]), Some(&q(1, 1)));
        assert_eq!(p01.coefficient(&[1, 2]), Some(&q(-2, 3)));
        let p11 = build_p(1, 1);
        assert_eq!(p11.len(), 3);
        assert_eq!(p11.coefficient(&[3, 0]), Some(&q(3, 1)));
        assert_eq!(p11.coefficient(&[2, 1]), Some(&q(-6, 1)));
        assert_eq!(p11.coefficient(&[0, 3]), Some(&q(-1, 3)));
    }

    #[test]
    fn three_sum_form_equals_reflected_enumeration() {
        for cutoff in 0..=6 {
            for n in 0..=cutoff {
                assert_eq!(build_p(n, cutoff), enumerate_p(n, cutoff), "n={n} N={cutoff}");
            }
        }
    }

    #[test]
    fn dimer_system_shapes() {
        let s = dimer_system(0, 0.7, 1.3);
        // (x−1)(1 + 3b x³) + a x
        let expected = [(vec![4], 3.0 * 1.3), (vec![3], -3.0 * 1.3), (vec![1], 1.0 + 0.7), (vec![0], -1.0)];
        assert_eq!(s.equations[0].len(), 4);
        for (e, c) in expected {
            assert!((s.equations[0].coefficient(&e).unwrap() - c).abs() < 1e-15);
        }
        let s = dimer_system(1, 1.0, 1.0);
        for (n, eq) in s.equations.iter().enumerate() {
            assert_eq!(eq.len(), 2 * build_p(n, 1).len() + 2);
            assert_eq!(eq.total_degree(), 4);
        }
        let lin = dimer_system(0, 2.0, 0.0);
        assert_eq!(lin.degrees(), vec![1]);
        assert!(lin.equations[0].eval_real(&[1.0 / 3.0]).abs() < 1e-15);
    }

    #[test]
    fn x_delta_round_trip() {
        let x = vec![0.5, 0.9, 1.0];
        let d = x_to_delta(&x);
        assert!((d.values[0].im + PI).abs() < 1e-15);
        for (a, b) in delta_to_x(&d).iter().zip(&x) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn general_residual_matches_dimer_equation() {
        let spectrum = PairedSpectrum {
            positive: vec![],
            kernel_weight: 1.0,
            pairing_defect: 0.0,
        };
        for (x, a, b) in [(vec![0.4, 0.8], 1.5, 0.3), (vec![0.9, 0.2], 0.1, 2.0)] {
            let sys = dimer_system(1, a, b);
            let general = residual_general(&x, a, b, &spectrum);
            for n in 0..2 {
                let w = ((2 * n + 1) * (2 * n + 1)) as f64;
                let d = w - b * build_p(n, 1).map_coeffs(to_f64).eval_real(&x);
                let dimer = sys.equations[n].eval_real(&x);
                assert!((general[n] + dimer / (x[n] * d)).abs() < 1e-13);
            }
        }
    }
}
