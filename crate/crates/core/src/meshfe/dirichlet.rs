//! Strong imposition of Dirichlet conditions by symmetric elimination.

use crate::error::{Error, Result};
use crate::linalg::{Factorization, SparseMatrix, TripletBuilder};

/// Sorts `(dof, value)` pairs and drops repeats; a repeated dof with two
/// different values is an error.
fn merge_constraints(dofs: &[usize], values: &[f64]) -> Result<Vec<(usize, f64)>> {
    if dofs.len() != values.len() {
        return Err(Error::Usage(format!(
            "{} Dirichlet dofs but {} values",
            dofs.len(),
            values.len()
        )));
    }
    let mut pairs: Vec<(usize, f64)> = dofs.iter().copied().zip(values.iter().copied()).collect();
    pairs.sort_by_key(|p| p.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
    for (d, v) in pairs {
        match merged.last() {
            Some(&(ld, lv)) if ld == d => {
                if lv != v {
                    return Err(Error::Usage(format!(
                        "dof {d} constrained to both {lv} and {v}"
                    )));
                }
            }
            _ => merged.push((d, v)),
        }
    }
    Ok(merged)
}

fn eliminate(matrix: &SparseMatrix, constrained: &[bool]) -> SparseMatrix {
    let n = matrix.nrows();
    let mut b = TripletBuilder::with_capacity(n, n, matrix.nnz());
    for i in 0..n {
        if constrained[i] {
            b.add(i, i, 1.0);
            continue;
        }
        let (cols, vals) = matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if !constrained[j] {
                b.add(i, j, v);
            }
        }
    }
    b.build()
}

fn lift_rhs(matrix: &SparseMatrix, rhs: &[f64], constrained: &[bool], full: &[f64]) -> Vec<f64> {
    let mut out = rhs.to_vec();
    for i in 0..matrix.nrows() {
        if constrained[i] {
            out[i] = full[i];
            continue;
        }
        let (cols, vals) = matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if constrained[j] {
                out[i] -= v * full[j];
            }
        }
    }
    out
}

/// Returns the modified system: constrained rows and columns are replaced by
/// identity rows, and their known values are moved to the right-hand side.
pub fn apply_dirichlet(
    matrix: &SparseMatrix,
    rhs: &[f64],
    dofs: &[usize],
    values: &[f64],
) -> Result<(SparseMatrix, Vec<f64>)> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(Error::Usage(
            "Dirichlet elimination needs a square system".into(),
        ));
    }
    let merged = merge_constraints(dofs, values)?;
    let mut constrained = vec![false; n];
    let mut full = vec![0.0; n];
    for &(d, v) in &merged {
        if d >= n {
            return Err(Error::Usage(format!("Dirichlet dof {d} out of range {n}")));
        }
        constrained[d] = true;
        full[d] = v;
    }
    Ok((
        eliminate(matrix, &constrained),
        lift_rhs(matrix, rhs, &constrained, &full),
    ))
}

/// A matrix with a fixed set of constrained dofs, factored once and reused for
/// every right-hand side and every set of boundary values.
#[derive(Debug)]
pub struct DirichletSolver {
    matrix: SparseMatrix,
    dofs: Vec<usize>,
    constrained: Vec<bool>,
    factor: Factorization,
}

impl DirichletSolver {
    /// `dofs` must not contain duplicates; values passed to [`solve`](Self::solve)
    /// follow the same order.
    pub fn new(matrix: &SparseMatrix, dofs: &[usize]) -> Result<Self> {
        let n = matrix.nrows();
        let mut constrained = vec![false; n];
        for &d in dofs {
            if d >= n {
                return Err(Error::Usage(format!("Dirichlet dof {d} out of range {n}")));
            }
            if constrained[d] {
                return Err(Error::Usage(format!("Dirichlet dof {d} listed twice")));
            }
            constrained[d] = true;
        }
        let factor = Factorization::new(&eliminate(matrix, &constrained))?;
        Ok(Self {
            matrix: matrix.clone(),
            dofs: dofs.to_vec(),
            constrained,
            factor,
        })
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The unconstrained operator this solver was built from.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64], values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.dofs.len());
        let mut full = vec![0.0; self.dim()];
        for (&d, &v) in self.dofs.iter().zip(values) {
            full[d] = v;
        }
        let mut x = lift_rhs(&self.matrix, rhs, &self.constrained, &full);
        self.factor.solve_in_place(&mut x);
        x
    }
}
