use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense row/column matrix used for snapshot sets, bases and reduced operators.
pub type DenseMatrix = DMatrix<f64>;

/// Eigenvalues in descending order and the matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct EigResult {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

/// Matrices up to this order are diagonalized by cyclic Jacobi; larger ones by
/// Householder tridiagonalization followed by implicit QL.
pub const JACOBI_MAX_ORDER: usize = 128;

fn check_symmetric(c: &DenseMatrix, rel_tol: f64) -> Result<()> {
    if !c.is_square() {
        return Err(Error::Usage(format!(
            "matrix is {}x{}, expected square",
            c.nrows(),
            c.ncols()
        )));
    }
    let scale = c.amax();
    let n = c.nrows();
    for j in 0..n {
        for i in 0..j {
            if (c[(i, j)] - c[(j, i)]).abs() > rel_tol * scale {
                return Err(Error::Usage(format!(
                    "matrix is not symmetric: |c[{i},{j}] - c[{j},{i}]| = {:.3e}",
                    (c[(i, j)] - c[(j, i)]).abs()
                )));
            }
        }
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Usage("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn sorted_descending(values: Vec<f64>, vectors: DenseMatrix) -> EigResult {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let vals = order.iter().map(|&i| values[i]).collect();
    let mut vecs = DenseMatrix::zeros(vectors.nrows(), vectors.ncols());
    for (new, &old) in order.iter().enumerate() {
        vecs.set_column(new, &vectors.column(old));
    }
    EigResult {
        values: vals,
        vectors: vecs,
    }
}

/// Full spectrum of a symmetric matrix, sorted in descending order.
pub fn sym_eig(c: &DenseMatrix) -> Result<EigResult> {
    check_symmetric(c, 1e-12)?;
    if c.nrows() <= JACOBI_MAX_ORDER {
        return sym_eig_jacobi(c);
    }
    // symmetrize exactly before handing off
    let sym = (c + c.transpose()) * 0.5;
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    Ok(sorted_descending(
        eig.eigenvalues.iter().copied().collect(),
        eig.eigenvectors,
    ))
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius mass drops below
/// `1e-12 ||C||_F` (or stops decreasing).
pub fn sym_eig_jacobi(c: &DenseMatrix) -> Result<EigResult> {
    check_symmetric(c, 1e-12)?;
    let n = c.nrows();
    let mut a = (c + c.transpose()) * 0.5;
    let mut v = DenseMatrix::identity(n, n);
    let total = a.norm();
    let off = |a: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        let o = off(&a);
        if o <= 1e-15 * total || o == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cs * akp - sn * akq;
                    a[(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cs * apk - sn * aqk;
                    a[(q, k)] = sn * apk + cs * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cs * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    Ok(sorted_descending(values, v))
}

/// LU factorization with partial pivoting of a small dense matrix.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    min_pivot: f64,
}

impl DenseLu {
    /// Rejects pivots with `|u_kk| <= n * eps * max|a_ij|`.
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let n = a.nrows().max(1) as f64;
        Self::with_tolerance(a, n * f64::EPSILON)
    }

    /// Rejects pivots with `|u_kk| <= rel_tol * max|a_ij|` (and exact zeros).
    pub fn with_tolerance(a: &DenseMatrix, rel_tol: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Usage(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = rel_tol * a.amax();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (mut p, mut best) = (k, lu[(k, k)].abs());
            for i in k + 1..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    p = i;
                }
            }
            if best == 0.0 || best <= threshold || !best.is_finite() {
                return Err(Error::Singular {
                    index: k,
                    pivot: best,
                });
            }
            min_pivot = min_pivot.min(best);
            if p != k {
                lu.swap_rows(k, p);
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                if m != 0.0 {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= m * u;
                    }
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Smallest pivot magnitude met during elimination.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "DenseLu::solve: dimension mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

/// Solves a dense square system by pivoted LU.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::Usage(
            "dense_solve: right-hand side has wrong length".into(),
        ));
    }
    Ok(DenseLu::new(a)?.solve(b))
}

/// 2-norm condition number `sigma_max / sigma_min`.
///
/// Symmetric inputs use `|eig(A)|` directly; other inputs use a one-sided SVD.
/// Squaring through `A^T A` is avoided since it caps the measurable condition
/// number near `1e8`. Returns `+inf` when `sigma_min <= 1e-300`.
pub fn cond2(a: &DenseMatrix) -> f64 {
    if !a.is_square() || a.nrows() == 0 {
        return f64::NAN;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sigmas: Vec<f64> = match sym_eig(a) {
        Ok(eig) => eig.values.iter().map(|v| v.abs()).collect(),
        Err(_) => a
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect(),
    };
    let max = sigmas.iter().cloned().fold(0.0, f64::max);
    let min = sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 1e-300 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Residual `||A x - b||_2` for dense systems.
pub fn dense_residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = a * DVector::from_column_slice(x) - DVector::from_column_slice(b);
    r.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    fn check_eig(c: &DenseMatrix, eig: &EigResult) {
        let n = c.nrows();
        let cn = c.norm();
        for i in 0..n {
            let v = eig.vectors.column(i);
            let r = c * v - v * eig.values[i];
            assert!(r.norm() <= 1e-10 * cn, "pair {i}: residual {}", r.norm());
        }
        let vtv = eig.vectors.transpose() * &eig.vectors;
        assert!((vtv - DenseMatrix::identity(n, n)).amax() < 1e-10);
        for w in eig.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let trace: f64 = (0..n).map(|i| c[(i, i)]).sum();
        let sum: f64 = eig.values.iter().sum();
        assert!((trace - sum).abs() <= 1e-10 * trace.abs().max(cn));
    }

    #[test]
    fn diagonal_spectrum() {
        let c = DenseMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let eig = sym_eig(&c).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(eig.vectors[(0, 0)].abs(), 1.0);
        assert_eq!(eig.vectors[(2, 1)].abs(), 1.0);
        assert_eq!(eig.vectors[(1, 2)].abs(), 1.0);
    }

    #[test]
    fn rank_one_spectrum() {
        let w = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let c = &w * w.transpose();
        let eig = sym_eig(&c).unwrap();
        let w2 = w.norm_squared();
        assert!((eig.values[0] - w2).abs() < 1e-12 * w2);
        for v in &eig.values[1..] {
            assert!(v.abs() <= 1e-12 * w2);
        }
    }

    #[test]
    fn random_reconstruction_both_routes() {
        for (n, seed) in [(20, 1), (150, 2)] {
            let c = random_symmetric(n, seed);
            for eig in [sym_eig(&c).unwrap(), sym_eig_jacobi(&c).unwrap()] {
                check_eig(&c, &eig);
                let lam = DenseMatrix::from_diagonal(&DVector::from_vec(eig.values.clone()));
                let rec = &eig.vectors * lam * eig.vectors.transpose();
                assert!((rec - &c).norm() <= 1e-10 * c.norm());
            }
        }
    }

    #[test]
    fn jacobi_and_tridiagonal_routes_agree() {
        let c = random_symmetric(140, 9);
        let a = sym_eig(&c).unwrap();
        let b = sym_eig_jacobi(&c).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let c = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&c), Err(Error::Usage(_))));
    }

    #[test]
    fn dense_solve_cases() {
        let a = DenseMatrix::identity(2, 2) * 2.0;
        assert_eq!(dense_solve(&a, &[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);

        let h = DenseMatrix::from_fn(4, 4, |i, j| 1.0 / (i + j + 1) as f64);
        let b: Vec<f64> = (0..4).map(|i| h.row(i).sum()).collect();
        let x = dense_solve(&h, &b).unwrap();
        for xi in &x {
            assert!((xi - 1.0).abs() < 1e-8);
        }
        assert!(
            dense_residual(&h, &x, &b) <= 1e-12 * (h.norm() * 2.0 + DVector::from_vec(b).norm())
        );

        let s = DenseMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match dense_solve(&s, &[1.0, 2.0]) {
            Err(Error::Singular { pivot, .. }) => assert!(pivot.abs() < 1e-15),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn condition_numbers() {
        assert!((cond2(&DenseMatrix::identity(3, 3)) - 1.0).abs() < 1e-14);
        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 0.1]));
        assert!((cond2(&d) - 100.0).abs() < 1e-10);
        let z = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(cond2(&z).is_infinite());

        // explicit-inverse oracle: kappa = ||A||_2 ||A^{-1}||_2
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseMatrix::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
        let inv = a.clone().try_inverse().unwrap();
        let norm2 = |m: &DenseMatrix| {
            let mtm = m.transpose() * m;
            sym_eig_jacobi(&mtm).unwrap().values[0].sqrt()
        };
        let oracle = norm2(&a) * norm2(&inv);
        let k = cond2(&a);
        assert!(((k - oracle) / oracle).abs() < 1e-6, "{k} vs {oracle}");
    }
}
