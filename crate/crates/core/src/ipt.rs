//! The discretized IPT map `F_N` and the self-energy update `Σ = u² F_N(Δ)`.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::scalar::{matsubara_point, Real};
use crate::{Error, Result};

/// Denominator moduli below this are treated as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-30;

/// Values at the `N+1` lowest positive Matsubara frequencies. Negative
/// indices are reached by conjugate reflection, `z_{-(n+1)} = conj(z_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatsubaraVector<T> {
    pub values: Vec<Complex<T>>,
}

impl<T: Real> MatsubaraVector<T> {
    pub fn new(values: Vec<Complex<T>>) -> Self {
        assert!(!values.is_empty(), "a Matsubara vector needs at least one entry");
        MatsubaraVector { values }
    }

    pub fn zeros(n_omega: usize, bits: u32) -> Self {
        let z = Complex::new(T::from_int(0, bits), T::from_int(0, bits));
        MatsubaraVector::new(vec![z; n_omega + 1])
    }

    pub fn from_fn(n_omega: usize, f: impl FnMut(usize) -> Complex<T>) -> Self {
        MatsubaraVector::new((0..=n_omega).map(f).collect())
    }

    pub fn n_omega(&self) -> usize {
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at any integer index, reflecting negative ones.
    pub fn get(&self, n: i64) -> Complex<T> {
        if n >= 0 {
            self.values[n as usize].clone()
        } else {
            self.values[(-n - 1) as usize].conj()
        }
    }

    /// All imaginary parts non-positive.
    pub fn is_admissible(&self) -> bool {
        self.values.iter().all(|z| z.im <= T::zero())
    }

    pub fn max_abs_re(&self) -> f64 {
        self.values
            .iter()
            .map(|z| z.re.to_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Max-norm distance.
    pub fn distance(&self, other: &Self) -> T {
        let mut best = T::zero();
        for (a, b) in self.values.iter().zip(&other.values) {
            best = best.max_of((a.clone() - b.clone()).norm_sqr());
        }
        best.sqrt()
    }

    pub fn scale(&self, s: &T) -> Self {
        MatsubaraVector::new(self.values.iter().map(|z| z.scale(s.clone())).collect())
    }

    pub fn map<U: Real>(&self, f: impl Fn(&T) -> U) -> MatsubaraVector<U> {
        MatsubaraVector::new(
            self.values
                .iter()
                .map(|z| Complex::new(f(&z.re), f(&z.im)))
                .collect(),
        )
    }

    pub fn to_f64(&self) -> MatsubaraVector<f64> {
        self.map(Real::to_f64)
    }
}

/// Precision of a vector's entries, taken from its first value.
pub(crate) fn bits_of<T: Real>(v: &MatsubaraVector<T>) -> u32 {
    v.values[0].re.bits().max(v.values[0].im.bits())
}

/// `g_m = 1/(i(2m+1)π − z_m)` for `m ∈ [−(N+1), N]`, stored at `m + N + 1`.
fn resolvent_vector<T: Real>(z: &MatsubaraVector<T>, pi: &T) -> Result<Vec<Complex<T>>> {
    let m_half = z.len() as i64;
    let threshold = T::from_f64_bits(SINGULAR_THRESHOLD * SINGULAR_THRESHOLD, pi.bits());
    (-m_half..m_half)
        .map(|m| {
            let d = matsubara_point::<T>(m, pi) - z.get(m);
            if d.norm_sqr() < threshold {
                return Err(Error::Singular {
                    index: m,
                    iteration: None,
                });
            }
            Ok(Complex::new(T::one(), T::zero()) / d)
        })
        .collect()
}

/// `F_N(z)_n = Σ_{n₁+n₂+n₃=n−1} g_{n₁} g_{n₂} g_{n₃}` over reflected indices,
/// evaluated as two discrete convolutions of `g`.
pub fn f_map<T: Real>(z: &MatsubaraVector<T>) -> Result<MatsubaraVector<T>> {
    let bits = bits_of(z);
    let pi = T::pi(bits);
    let g = resolvent_vector(z, &pi)?;
    let len = g.len();
    let zero = Complex::new(T::from_int(0, bits), T::from_int(0, bits));

    // c2[k] = Σ_{i+j=k} g_i g_j; index k stands for n₁+n₂ = k − 2(N+1)
    let mut c2 = vec![zero.clone(); 2 * len - 1];
    for (i, gi) in g.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            c2[i + j] = c2[i + j].clone() + gi.clone() * gj.clone();
        }
    }
    // n₁+n₂+n₃ = n−1 sits at total offset n − 1 + 3(N+1)
    let offset = 3 * z.len();
    let out = (0..z.len())
        .map(|n| {
            let k3 = n + offset - 1;
            let mut acc = zero.clone();
            for (j, gj) in g.iter().enumerate() {
                if let Some(c) = k3.checked_sub(j).and_then(|k| c2.get(k)) {
                    acc = acc + c.clone() * gj.clone();
                }
            }
            acc
        })
        .collect();
    Ok(MatsubaraVector::new(out))
}

/// `F_0(d) = 3 / (|iπ − d|² (iπ − d))`.
pub fn f0_closed_form<T: Real>(d: &Complex<T>) -> Complex<T> {
    let bits = d.re.bits().max(d.im.bits());
    let w = matsubara_point::<T>(0, &T::pi(bits)) - d.clone();
    let num = Complex::new(T::from_int(3, bits), T::zero());
    num / w.scale(w.norm_sqr())
}

/// `Σ = u² F_N(Δ)`.
pub fn ipt_sigma<T: Real>(delta: &MatsubaraVector<T>, u: &T) -> Result<MatsubaraVector<T>> {
    if u.is_zero() {
        return Ok(MatsubaraVector::zeros(delta.n_omega(), bits_of(delta)));
    }
    Ok(f_map(delta)?.scale(&(u.clone() * u.clone())))
}

/// Largest cutoff for which φ is accumulated in exact rationals.
pub const PHI_EXACT_MAX: usize = 30;

/// Exact `φ(n, N)` for every `n ≤ N`: the constrained sum of
/// `∏ 1/(2n_j+1)` over `n₁+n₂+n₃ = n−1`, `n_j ∈ [−(N+1), N]`.
pub fn phi_table_exact(cutoff: usize) -> Vec<BigRational> {
    let m_half = cutoff as i64 + 1;
    let h: Vec<BigRational> = (-m_half..m_half)
        .map(|m| BigRational::new(BigInt::from(1), BigInt::from(2 * m + 1)))
        .collect();
    convolve_three(&h, cutoff + 1, |a, b| a * b)
}

fn convolve_three<V: Clone + Zero>(h: &[V], count: usize, mul: impl Fn(&V, &V) -> V) -> Vec<V> {
    let len = h.len();
    let mut c2 = vec![V::zero(); 2 * len - 1];
    for (i, hi) in h.iter().enumerate() {
        for (j, hj) in h.iter().enumerate() {
            c2[i + j] = c2[i + j].clone() + mul(hi, hj);
        }
    }
    let offset = 3 * count;
    (0..count)
        .map(|n| {
            let k3 = n + offset - 1;
            h.iter().enumerate().fold(V::zero(), |acc, (j, hj)| match k3.checked_sub(j).and_then(|k| c2.get(k)) {
                Some(c) => acc + mul(c, hj),
                None => acc,
            })
        })
        .collect()
}

/// `φ(n, N) = π³ Im F_N(0)_n`, exact rational accumulation up to
/// [`PHI_EXACT_MAX`], double precision beyond.
pub fn phi(n: usize, cutoff: usize) -> f64 {
    assert!(n <= cutoff, "phi needs n <= N");
    if cutoff <= PHI_EXACT_MAX {
        phi_table_exact(cutoff)[n].to_f64().unwrap_or(f64::NAN)
    } else {
        let m_half = cutoff as i64 + 1;
        let h: Vec<f64> = (-m_half..m_half).map(|m| 1.0 / (2 * m + 1) as f64).collect();
        convolve_three(&h, cutoff + 1, |a, b| a * b)[n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn naive(z: &MatsubaraVector<f64>) -> Vec<Complex<f64>> {
        let m = z.len() as i64;
        let g = |k: i64| 1.0 / (c(0.0, (2 * k + 1) as f64 * PI) - z.get(k));
        (0..m)
            .map(|n| {
                let mut acc = c(0.0, 0.0);
                for n1 in -m..m {
                    for n2 in -m..m {
                        let n3 = n - 1 - n1 - n2;
                        if (-m..m).contains(&n3) {
                            acc += g(n1) * g(n2) * g(n3);
                        }
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn f_at_zero() {
        let f = f_map(&MatsubaraVector::<f64>::zeros(0, 53)).unwrap();
        assert!((f.values[0] - c(0.0, -3.0 / PI.powi(3))).norm() < 1e-15);
        let f = f_map(&MatsubaraVector::<f64>::zeros(1, 53)).unwrap();
        assert!((f.values[1] - c(0.0, -10.0 / 9.0 / PI.powi(3))).norm() < 1e-15);
    }

    #[test]
    fn convolution_matches_triple_loop() {
        let z = MatsubaraVector::new(vec![c(0.3, -1.2), c(-0.5, -0.1), c(0.0, -4.0), c(2.0, 0.0)]);
        for (a, b) in f_map(&z).unwrap().values.iter().zip(naive(&z)) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn f0_closed_form_values() {
        let r = f0_closed_form(&c(0.0, 0.0));
        assert!((r - c(0.0, -3.0 / PI.powi(3))).norm() < 1e-16);
        let r = f0_closed_form(&c(0.0, -PI));
        assert!((r - c(0.0, -3.0 / (8.0 * PI.powi(3)))).norm() < 1e-16);
    }

    #[test]
    fn singular_input_names_index() {
        let z = MatsubaraVector::new(vec![c(0.0, 0.0), c(0.0, 3.0 * PI)]);
        match f_map(&z) {
            // the reflected index -2 is hit first
            Err(Error::Singular { index, .. }) => assert_eq!(index, -2),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn sigma_trivial_cases() {
        let d = MatsubaraVector::new(vec![c(0.1, -0.2), c(0.0, -1.0)]);
        let s = ipt_sigma(&d, &0.0).unwrap();
        assert!(s.values.iter().all(|z| z.norm() == 0.0));
        let s = ipt_sigma(&MatsubaraVector::zeros(0, 53), &1.0).unwrap();
        assert!((s.values[0] - c(0.0, -3.0 / PI.powi(3))).norm() < 1e-16);
    }

    #[test]
    fn small_phi_values() {
        let t0 = phi_table_exact(0);
        assert_eq!(t0[0], BigRational::from_integer((-3).into()));
        let t1 = phi_table_exact(1);
        assert_eq!(t1[0], BigRational::new((-8).into(), 3.into()));
        assert_eq!(t1[1], BigRational::new((-10).into(), 9.into()));
        assert!((phi(1, 1) + 10.0 / 9.0).abs() < 1e-15);
        assert!((phi(3, 40) - phi(3, 39)) > 0.0);
    }

    #[test]
    fn reflection_access() {
        let v = MatsubaraVector::new(vec![c(1.0, -2.0)]);
        assert_eq!(v.get(-1), c(1.0, 2.0));
        assert!(v.is_admissible());
    }
}
