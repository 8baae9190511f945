//! Direct factorizations of sparse operators.
//!
//! Symmetric positive definite matrices use an envelope (profile) Cholesky
//! factorization; everything else goes through a banded LU with partial
//! pivoting. Both exploit the narrow profile that the structured-mesh DOF
//! numbering produces. Factorizations are immutable once built, so a single
//! factor can serve every time step.

use super::sparse::{norm2, SparseMatrix};
use crate::error::{Error, Result};

/// Lower-triangular envelope factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    /// first stored column of each row
    first: Vec<usize>,
    /// offset of row `i` in `data`; row `i` stores columns `first[i]..=i`
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factorizes the lower triangle of `a`. Fails if a pivot is not positive.
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Usage("Cholesky needs a square matrix".into()));
        }
        let mut first = vec![0usize; n];
        for (i, f) in first.iter_mut().enumerate() {
            let (cols, _) = a.row(i);
            *f = cols.first().copied().filter(|&j| j <= i).unwrap_or(i);
        }
        // the envelope of a symmetric matrix is read from the lower triangle
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let k0 = fi.max(fj);
                let mut s = data[si + j - fi];
                let li = &data[si + k0 - fi..si + j - fi];
                let lj = &data[sj + k0 - fj..sj + j - fj];
                s -= li.iter().zip(lj).map(|(x, y)| x * y).sum::<f64>();
                let djj = data[sj + j - fj];
                data[si + j - fi] = s / djj;
            }
            let row = &data[si..si + i - fi];
            let d = data[si + i - fi] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Singular { index: i, pivot: d });
            }
            data[si + i - fi] = d.sqrt();
        }
        Ok(Self {
            n,
            first,
            start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let fi = self.first[i];
            let si = self.start[i];
            let row = &self.data[si..si + i - fi];
            let s: f64 = row.iter().zip(&b[fi..i]).map(|(l, y)| l * y).sum();
            b[i] = (b[i] - s) / self.data[si + i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            b[i] /= self.data[si + i - fi];
            let xi = b[i];
            for (k, l) in (fi..i).zip(&self.data[si..si + i - fi]) {
                b[k] -= l * xi;
            }
        }
    }
}

/// Banded LU with partial pivoting (row interchanges stay within the lower bandwidth).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// width of the stored window: columns `i - kl ..= i + kl + ku`
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    /// upper bandwidth of U after fill-in
    ku_fill: usize,
}

impl BandLu {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Usage("LU needs a square matrix".into()));
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            let (cols, _) = a.row(i);
            for &j in cols {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            ku_fill: kl + ku,
        };
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                *lu.at_mut(i, j) = v;
            }
        }
        let scale = a.max_abs();
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for i in k + 1..=last {
                let v = lu.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > f64::MIN_POSITIVE * scale.max(1.0)) || best == 0.0 {
                return Err(Error::Singular {
                    index: k,
                    pivot: best,
                });
            }
            lu.pivots[k] = p;
            let col_end = (k + lu.ku_fill).min(n - 1);
            if p != k {
                for j in k..=col_end {
                    let tmp = lu.at(k, j);
                    *lu.at_mut(k, j) = lu.at(p, j);
                    *lu.at_mut(p, j) = tmp;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last {
                let m = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = m;
                if m != 0.0 {
                    for j in k + 1..=col_end {
                        let u = lu.at(k, j);
                        *lu.at_mut(i, j) -= m * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.width - 1 - self.kl);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.index(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let idx = self.index(i, j);
        &mut self.data[idx]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                b[i] -= self.at(i, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let end = (k + self.ku_fill).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=end {
                s -= self.at(k, j) * b[j];
            }
            b[k] = s / self.at(k, k);
        }
    }
}

/// A reusable factorization of a square sparse operator.
#[derive(Debug, Clone)]
pub enum Factorization {
    Cholesky(EnvelopeCholesky),
    Lu(BandLu),
}

impl Factorization {
    /// Cholesky when `a` is symmetric and positive definite, banded LU otherwise.
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.is_symmetric(1e-13) {
            if let Ok(chol) = EnvelopeCholesky::new(a) {
                return Ok(Self::Cholesky(chol));
            }
        }
        BandLu::new(a).map(Self::Lu)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Cholesky(c) => c.dim(),
            Self::Lu(l) => l.dim(),
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        match self {
            Self::Cholesky(c) => c.solve_in_place(b),
            Self::Lu(l) => l.solve_in_place(b),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solves `A x = b` and checks `||Ax - b|| <= 1e-10 (||A||_F ||x|| + ||b||)`.
pub fn sparse_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() || b.len() != a.nrows() {
        return Err(Error::Usage(format!(
            "sparse_solve: {}x{} matrix with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let factor = Factorization::new(a).map_err(|e| match e {
        Error::Singular { index, pivot } => Error::Solver {
            message: format!("zero pivot at row {index}"),
            residual: pivot,
        },
        other => other,
    })?;
    let x = factor.solve(b);
    let mut r = a.mul_vec(&x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= bi);
    let residual = norm2(&r);
    let bound = 1e-10 * (a.frobenius_norm() * norm2(&x) + norm2(b));
    if !(residual <= bound) {
        return Err(Error::Solver {
            message: "residual above tolerance".into(),
            residual,
        });
    }
    Ok(x)
}
