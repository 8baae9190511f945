//! Proper orthogonal decomposition by the method of snapshots.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hifi::HfOperators;
use crate::io::{fmt_e12, read_csv, read_snapmat, write_csv, write_snapmat};
use crate::linalg::{sym_eig, SparseMatrix};
use crate::meshfe::Field;

/// Correlation eigenvalues below this fraction of the largest are discarded.
pub const RANK_CUTOFF: f64 = 1e-16;

/// Field-specific weight matrix `X` of the snapshot inner product.
#[derive(Debug, Clone)]
pub struct InnerProduct {
    pub field: Field,
    pub weight: SparseMatrix,
}

impl InnerProduct {
    /// H1 seminorm for velocity and `z`, L2 for pressure, H1(Sigma) seminorm
    /// for displacement, L2(Sigma) for the multiplier.
    pub fn for_field(field: Field, ops: &HfOperators) -> Result<Self> {
        let weight = match field {
            Field::Velocity | Field::Auxiliary => ops.h1_u.clone(),
            Field::Pressure => ops.mass_p.clone(),
            Field::Displacement => ops.stiffness_e.clone(),
            Field::Multiplier => ops.mass_e.clone(),
            Field::Scalar => {
                return Err(Error::Usage(
                    "no snapshot inner product for scalar fields".into(),
                ))
            }
        };
        Ok(Self { field, weight })
    }

    pub fn dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        crate::linalg::dot(a, &self.weight.mul_vec(b))
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Gram matrix `AᵀXB`.
    pub fn gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.weight.project(a, b)
    }
}

/// Orthonormal modes (columns of `modes`) and the full singular value list.
#[derive(Debug, Clone)]
pub struct PodBasis {
    pub field: Field,
    pub modes: DMatrix<f64>,
    /// All singular values of the weighted snapshot set, non-increasing.
    pub sigmas: Vec<f64>,
    pub snapshot_count: usize,
}

impl PodBasis {
    pub fn n_modes(&self) -> usize {
        self.modes.ncols()
    }

    /// The first `n` modes (all of them when `n` exceeds the count).
    pub fn truncated(&self, n: usize) -> DMatrix<f64> {
        let n = n.min(self.n_modes());
        self.modes.columns(0, n).into_owned()
    }

    pub fn energy(&self, n: usize) -> f64 {
        retained_energy(&self.sigmas, n)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_snapmat(
            &dir.join(format!("basis_{}.snap", self.field.name())),
            &self.modes,
        )
    }

    /// Reads `basis_<field>.snap` and the field's rows of `pod_spectrum.csv`.
    pub fn load(dir: &Path, field: Field) -> Result<Self> {
        let modes = read_snapmat(&dir.join(format!("basis_{}.snap", field.name())))?;
        let (_, rows) = read_csv(&dir.join("pod_spectrum.csv"))?;
        let mut sigmas = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if r[0] == field.name() {
                sigmas.push(r[2].parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    message: format!("pod_spectrum.csv: bad sigma '{}'", r[2]),
                })?);
            }
        }
        Ok(Self {
            field,
            snapshot_count: sigmas.len(),
            modes,
            sigmas,
        })
    }
}

/// `SᵀXS`, symmetrized.
pub fn correlation(s: &DMatrix<f64>, x: &InnerProduct) -> Result<DMatrix<f64>> {
    if s.nrows() != x.dim() {
        return Err(Error::Usage(format!(
            "snapshots have {} rows but the {} inner product has dimension {}",
            s.nrows(),
            x.field.name(),
            x.dim()
        )));
    }
    let xs = x.weight.mul_dense(s);
    let c = s.transpose() * xs;
    Ok((&c + c.transpose()) * 0.5)
}

/// Modified Gram-Schmidt in the `X` inner product, one pass.
fn orthonormalize(z: &mut DMatrix<f64>, x: &InnerProduct) {
    for i in 0..z.ncols() {
        for j in 0..i {
            let xz_j = x.weight.mul_vec(z.column(j).as_slice());
            let r = z.column(i).dot(&DVector::from_vec(xz_j));
            let zj = z.column(j).into_owned();
            z.column_mut(i).axpy(-r, &zj, 1.0);
        }
        let n = x.norm(z.column(i).as_slice());
        z.column_mut(i).scale_mut(1.0 / n);
    }
}

pub fn compute_basis(s: &DMatrix<f64>, x: &InnerProduct, n_max: usize) -> Result<PodBasis> {
    compute_basis_with_cutoff(s, x, n_max, RANK_CUTOFF)
}

/// As [`compute_basis`], keeping modes with `lambda_i > cutoff * lambda_1`.
pub fn compute_basis_with_cutoff(
    s: &DMatrix<f64>,
    x: &InnerProduct,
    n_max: usize,
    cutoff: f64,
) -> Result<PodBasis> {
    if n_max == 0 {
        return Err(Error::Usage("at least one mode must be requested".into()));
    }
    let c = correlation(s, x)?;
    let eig = sym_eig(&c)?;
    let lambda1 = eig.values.first().copied().unwrap_or(0.0);
    if !(lambda1 > 0.0) {
        return Err(Error::EmptySpectrum);
    }
    let rank = eig
        .values
        .iter()
        .take_while(|&&l| l > cutoff * lambda1)
        .count();
    let n = n_max.min(rank);
    let sigmas: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let mut v = eig.vectors.columns(0, n).into_owned();
    for i in 0..n {
        v.column_mut(i).scale_mut(1.0 / sigmas[i]);
    }
    let mut modes = s * v;
    orthonormalize(&mut modes, x);
    Ok(PodBasis {
        field: x.field,
        modes,
        sigmas,
        snapshot_count: s.ncols(),
    })
}

/// Fraction of the snapshot energy captured by the first `n` modes.
pub fn retained_energy(sigmas: &[f64], n: usize) -> f64 {
    let total: f64 = sigmas.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    let kept: f64 = sigmas.iter().take(n).map(|s| s * s).sum();
    (kept / total).min(1.0)
}

/// Writes `pod_spectrum.csv` with one row per singular value of each basis.
pub fn write_spectrum(path: &Path, bases: &[&PodBasis]) -> Result<()> {
    let mut rows = Vec::new();
    for b in bases {
        let total: f64 = b.sigmas.iter().map(|s| s * s).sum();
        let mut cumulative = 0.0;
        for (i, s) in b.sigmas.iter().enumerate() {
            let fraction = if total > 0.0 { s * s / total } else { 0.0 };
            cumulative += fraction;
            rows.push(format!(
                "{},{},{},{},{}",
                b.field.name(),
                i + 1,
                fmt_e12(*s),
                fmt_e12(fraction),
                fmt_e12(cumulative.min(1.0))
            ));
        }
    }
    write_csv(
        path,
        "field,index,sigma,energy_fraction,cumulative_energy",
        &rows,
    )
}
