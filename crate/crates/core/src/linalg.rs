//! Dense kernels: cyclic Jacobi eigensolvers and a small complex LU solve.

use num_complex::Complex;
use num_traits::Zero;

use crate::scalar::{cabs, Real, DOUBLE_BITS};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order with matching unit eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Eigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<Complex<T>>>,
    pub sweeps: usize,
}

impl<T: Real> Eigen<T> {
    /// `‖M v_k − λ_k v_k‖₂` for the k-th pair.
    pub fn residual(&self, m: &[Vec<Complex<T>>], k: usize) -> T {
        let v = &self.vectors[k];
        let lambda = &self.values[k];
        let mut acc = T::zero();
        for (i, row) in m.iter().enumerate() {
            let mut s = Complex::new(T::zero(), T::zero());
            for (mij, vj) in row.iter().zip(v) {
                s = s + mij.clone() * vj.clone();
            }
            s = s - v[i].clone().scale(lambda.clone());
            acc = acc + s.norm_sqr();
        }
        acc.sqrt()
    }
}

/// Relative off-diagonal threshold appropriate for the given width:
/// `1e-14` in double precision, `2^-(bits-8)` above.
pub fn default_tolerance<T: Real>(bits: u32) -> T {
    if bits <= DOUBLE_BITS {
        T::from_f64_bits(1e-14, bits)
    } else {
        T::exp2(-(bits as i32 - 8), bits)
    }
}

pub fn frobenius<T: Real>(a: &[Vec<Complex<T>>]) -> T {
    let mut acc = T::zero();
    for row in a {
        for x in row {
            acc = acc + x.norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn max_norm<T: Real>(a: &[Vec<Complex<T>>]) -> T {
    let mut best = T::zero();
    for row in a {
        for x in row {
            best = best.max_of(cabs(x));
        }
    }
    best
}

fn off_diagonal<T: Real>(a: &[Vec<Complex<T>>]) -> T {
    let mut acc = T::zero();
    for (i, row) in a.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if i != j {
                acc = acc + x.norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi for a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot with a diagonal unitary
/// and then applies a real Givens rotation. Sweeps run in row-major pivot
/// order and stop once the off-diagonal Frobenius norm falls below
/// `rel_tol · ‖A‖_F`. Only the lower triangle's conjugate symmetry is assumed.
pub fn hermitian_eigen<T: Real>(m: &[Vec<Complex<T>>], rel_tol: &T) -> Eigen<T> {
    let n = m.len();
    let zero = || Complex::new(T::zero(), T::zero());
    let mut a: Vec<Vec<Complex<T>>> = m.to_vec();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = Complex::new(row[i].re.clone(), T::zero());
    }
    let mut v: Vec<Vec<Complex<T>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Complex::new(T::one(), T::zero())
                    } else {
                        zero()
                    }
                })
                .collect()
        })
        .collect();

    let threshold = rel_tol.clone() * frobenius(&a);
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_diagonal(&a) > threshold {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let r = cabs(&a[p][q]);
                if r.is_zero() {
                    continue;
                }
                // phase: w = conj(a_pq)/|a_pq| applied to column q, conj(w) to row q
                let w = a[p][q].conj().unscale(r.clone());
                for k in 0..n {
                    a[k][q] = a[k][q].clone() * w.clone();
                }
                for k in 0..n {
                    a[q][k] = a[q][k].clone() * w.conj();
                }
                a[q][q] = Complex::new(a[q][q].re.clone(), T::zero());
                for row in v.iter_mut() {
                    row[q] = row[q].clone() * w.clone();
                }

                // real rotation annihilating the now real pivot r
                let app = a[p][p].re.clone();
                let aqq = a[q][q].re.clone();
                let bits = r.bits();
                let two = T::from_int(2, bits);
                let tau = (aqq.clone() - app.clone()) / (two * r.clone());
                let root = (T::one() + tau.clone() * tau.clone()).sqrt();
                let t = if tau >= T::zero() {
                    T::one() / (tau.clone() + root)
                } else {
                    -(T::one() / (-tau.clone() + root))
                };
                let c = T::one() / (T::one() + t.clone() * t.clone()).sqrt();
                let s = t.clone() * c.clone();

                for k in 0..n {
                    let akp = a[k][p].clone();
                    let akq = a[k][q].clone();
                    a[k][p] = akp.scale(c.clone()) - akq.scale(s.clone());
                    a[k][q] = akp.scale(s.clone()) + akq.scale(c.clone());
                }
                for k in 0..n {
                    let apk = a[p][k].clone();
                    let aqk = a[q][k].clone();
                    a[p][k] = apk.scale(c.clone()) - aqk.scale(s.clone());
                    a[q][k] = apk.scale(s.clone()) + aqk.scale(c.clone());
                }
                a[p][p] = Complex::new(app - t.clone() * r.clone(), T::zero());
                a[q][q] = Complex::new(aqq + t * r, T::zero());
                a[p][q] = zero();
                a[q][p] = zero();
                for row in v.iter_mut() {
                    let vp = row[p].clone();
                    let vq = row[q].clone();
                    row[p] = vp.scale(c.clone()) - vq.scale(s.clone());
                    row[q] = vp.scale(s.clone()) + vq.scale(c.clone());
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i][i]
            .re
            .partial_cmp(&a[j][j].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Eigen {
        values: order.iter().map(|&k| a[k][k].re.clone()).collect(),
        vectors: order
            .iter()
            .map(|&k| v.iter().map(|row| row[k].clone()).collect())
            .collect(),
        sweeps,
    }
}

/// Real symmetric eigenproblem; returns ascending eigenvalues and real
/// eigenvectors (as columns, `vectors[k][i]`).
pub fn symmetric_eigen<T: Real>(m: &[Vec<T>], rel_tol: &T) -> (Vec<T>, Vec<Vec<T>>) {
    let c: Vec<Vec<Complex<T>>> = m
        .iter()
        .map(|row| {
            row.iter()
                .map(|x| Complex::new(x.clone(), T::zero()))
                .collect()
        })
        .collect();
    let eig = hermitian_eigen(&c, rel_tol);
    let vectors = eig
        .vectors
        .into_iter()
        .map(|v| v.into_iter().map(|z| z.re).collect())
        .collect();
    (eig.values, vectors)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot vanishes.
pub fn solve_complex(
    mut a: Vec<Vec<Complex<f64>>>,
    mut b: Vec<Complex<f64>>,
) -> Option<Vec<Complex<f64>>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() == 0.0 || !a[piv][col].norm().is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f.is_zero() {
                continue;
            }
            for k in col..n {
                let sub = f * a[col][k];
                a[row][k] -= sub;
            }
            let sub = f * b[col];
            b[row] -= sub;
        }
    }
    let mut x = vec![Complex::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(x)
    } else {
        None
    }
}

pub fn identity<T: Real>(n: usize) -> Vec<Vec<T>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ExtFloat;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn trivial_spectra() {
        let tol = 1e-14;
        let (vals, _) = symmetric_eigen(&identity::<f64>(3), &tol);
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
        let (vals, _) = symmetric_eigen(&[vec![2.0, 0.0], vec![0.0, -1.0]], &tol);
        assert_eq!(vals[0], -1.0);
        let (vals, _) = symmetric_eigen(&[vec![0.0, 1.0], vec![1.0, 0.0]], &tol);
        assert!((vals[0] + 1.0).abs() < 1e-15 && (vals[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn path_graph_spectrum() {
        let m = vec![
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ];
        let (vals, vecs) = symmetric_eigen(&m, &1e-14);
        let s = 2f64.sqrt();
        for (v, e) in vals.iter().zip([-s, 0.0, s]) {
            assert!((v - e).abs() < 1e-14);
        }
        for (k, v) in vecs.iter().enumerate() {
            for i in 0..3 {
                let mv: f64 = (0..3).map(|j| m[i][j] * v[j]).sum();
                assert!((mv - vals[k] * v[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hermitian_two_by_two_against_characteristic_polynomial() {
        // [[1, 2-i],[2+i, -3]]: λ = -1 ± sqrt(4 + 5)
        let m = vec![vec![c(1.0, 0.0), c(2.0, -1.0)], vec![c(2.0, 1.0), c(-3.0, 0.0)]];
        let eig = hermitian_eigen(&m, &1e-15);
        assert!((eig.values[0] - (-4.0)).abs() < 1e-13);
        assert!((eig.values[1] - 2.0).abs() < 1e-13);
        assert!(eig.residual(&m, 0) < 1e-13);
    }

    #[test]
    fn hermitian_in_extended_precision() {
        let bits = 256;
        let e = |re: i64, im: i64| Complex::new(ExtFloat::from_int(re, bits), ExtFloat::from_int(im, bits));
        let m = vec![
            vec![e(2, 0), e(0, 1), e(1, 1)],
            vec![e(0, -1), e(3, 0), e(0, 0)],
            vec![e(1, -1), e(0, 0), e(-1, 0)],
        ];
        let tol = default_tolerance::<ExtFloat>(bits);
        let eig = hermitian_eigen(&m, &tol);
        let bound = ExtFloat::exp2(-(bits as i32) / 2, bits) * max_norm(&m);
        for k in 0..3 {
            assert!(eig.residual(&m, k) <= bound);
        }
        let trace: f64 = eig.values.iter().map(|v| v.to_f64()).sum();
        assert!((trace - 4.0).abs() < 1e-14);
    }

    #[test]
    fn lu_solves_small_system() {
        let a = vec![vec![c(0.0, 1.0), c(2.0, 0.0)], vec![c(1.0, 0.0), c(1.0, -1.0)]];
        let x = vec![c(1.0, 2.0), c(-0.5, 0.25)];
        let b: Vec<_> = a.iter().map(|r| r[0] * x[0] + r[1] * x[1]).collect();
        let got = solve_complex(a, b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).norm() < 1e-14);
        }
        assert!(solve_complex(vec![vec![c(0.0, 0.0)]], vec![c(1.0, 0.0)]).is_none());
    }
}
