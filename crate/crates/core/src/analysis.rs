//! Error, conditioning, iteration and timing summaries of reduced runs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hifi::{HfOperators, Trajectory};
use crate::io::fmt_e12;
use crate::linalg::{weighted_norm, Factorization, SparseMatrix};
use crate::meshfe::{traction_load, FeSystem, Field};
use crate::rom::{ReducedModel, RomTrajectory, Variant};

/// Steps whose reference norm falls below this fraction of the largest one
/// are left out of the time average.
pub const NORM_FLOOR: f64 = 1e-12;

pub const ERROR_HEADER: &str =
    "variant,N,err_u,err_p,err_eta,err_stress,err_u_max,err_p_max,err_eta_max";
pub const PERF_HEADER: &str =
    "variant,N,cond_explicit,it_max,it_avg,t_explicit_s,t_implicit_s,t_total_s,speedup_total";

/// Time-averaged and worst relative error of one field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldError {
    pub mean: f64,
    pub max: f64,
}

/// Relative error of an approximation against reference columns, given the
/// reference norms and a norm for the difference.
fn aggregate(reference_norms: &[f64], mut diff_norm: impl FnMut(usize) -> f64) -> FieldError {
    let top = reference_norms.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return FieldError::default();
    }
    let (mut sum, mut count, mut max) = (0.0, 0usize, 0.0f64);
    for (k, &n) in reference_norms.iter().enumerate() {
        if n < NORM_FLOOR * top {
            continue;
        }
        let e = diff_norm(k) / n;
        sum += e;
        max = max.max(e);
        count += 1;
    }
    FieldError {
        mean: sum / count as f64,
        max,
    }
}

/// Relative error of `approx(k)` against column `k` of `reference` in the
/// norm induced by `x`.
pub fn field_error(
    reference: &DMatrix<f64>,
    x: &SparseMatrix,
    mut approx: impl FnMut(usize) -> Vec<f64>,
) -> FieldError {
    let norms: Vec<f64> = (0..reference.ncols())
        .map(|k| weighted_norm(x, reference.column(k).as_slice()))
        .collect();
    aggregate(&norms, |k| {
        let a = approx(k);
        let d: Vec<f64> = a
            .iter()
            .zip(reference.column(k).iter())
            .map(|(a, b)| a - b)
            .collect();
        weighted_norm(x, &d)
    })
}

/// Errors of one reduced run against the full-order trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub variant: Variant,
    pub n: usize,
    pub u: FieldError,
    pub p: FieldError,
    pub eta: FieldError,
    pub stress: FieldError,
}

impl ErrorReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.variant,
            self.n,
            fmt_e12(self.u.mean),
            fmt_e12(self.p.mean),
            fmt_e12(self.eta.mean),
            fmt_e12(self.stress.mean),
            fmt_e12(self.u.max),
            fmt_e12(self.p.max),
            fmt_e12(self.eta.max),
        )
    }
}

fn check_lengths(hf: &Trajectory, rom: &RomTrajectory) -> Result<()> {
    if hf.steps() != rom.steps() {
        return Err(Error::Usage(format!(
            "trajectory lengths differ: {} full-order steps, {} reduced",
            hf.steps(),
            rom.steps()
        )));
    }
    Ok(())
}

/// L²(Σ) norms of interface tractions given their load vectors.
struct StressNorm {
    mass: Factorization,
}

impl StressNorm {
    fn new(ops: &HfOperators) -> Result<Self> {
        Ok(Self {
            mass: Factorization::new(&ops.mass_e)?,
        })
    }

    fn norm(&self, load: &[f64]) -> f64 {
        let r = self.mass.solve(load);
        r.iter()
            .zip(load)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }
}

/// Time-averaged relative L²(Σ) error of the traction `p - 2 mu du_y/dy`.
pub fn stress_error(
    hf: &Trajectory,
    rom: &RomTrajectory,
    model: &ReducedModel,
    fe: &FeSystem,
    ops: &HfOperators,
) -> Result<FieldError> {
    check_lengths(hf, rom)?;
    let norm = StressNorm::new(ops)?;
    let params = &hf.params;
    let mut reference = Vec::with_capacity(hf.steps());
    let mut loads = Vec::with_capacity(hf.steps());
    for c in 0..hf.steps() {
        let l = traction_load(
            hf.u.column(c).as_slice(),
            hf.p.column(c).as_slice(),
            fe,
            params,
        );
        reference.push(norm.norm(&l));
        loads.push(l);
    }
    Ok(aggregate(&reference, |c| {
        let u = rom.field(Field::Velocity, c + 1, model);
        let p = rom.field(Field::Pressure, c + 1, model);
        let l = traction_load(&u, &p, fe, params);
        let d: Vec<f64> = l.iter().zip(&loads[c]).map(|(a, b)| a - b).collect();
        norm.norm(&d)
    }))
}

/// Velocity (H¹ seminorm), pressure (L²), displacement (H¹(Σ) seminorm) and
/// interface stress errors of a reduced run.
pub fn relative_errors(
    hf: &Trajectory,
    rom: &RomTrajectory,
    model: &ReducedModel,
    fe: &FeSystem,
    ops: &HfOperators,
    n: usize,
) -> Result<ErrorReport> {
    check_lengths(hf, rom)?;
    Ok(ErrorReport {
        variant: model.variant,
        n,
        u: field_error(&hf.u, &ops.h1_u, |c| {
            rom.field(Field::Velocity, c + 1, model)
        }),
        p: field_error(&hf.p, &ops.mass_p, |c| {
            rom.field(Field::Pressure, c + 1, model)
        }),
        eta: field_error(&hf.eta, &ops.stiffness_e, |c| {
            rom.field(Field::Displacement, c + 1, model)
        }),
        stress: stress_error(hf, rom, model, fe, ops)?,
    })
}

/// Condition number of the reduced explicit-step matrix (infinite when singular).
pub fn explicit_condition(model: &ReducedModel) -> f64 {
    model.explicit_condition()
}

/// `(it_max, it_avg)` of per-step implicit iteration counts.
pub fn iteration_stats(iterations: &[usize]) -> (usize, f64) {
    if iterations.is_empty() {
        return (0, 0.0);
    }
    let max = iterations.iter().copied().max().unwrap_or(0);
    let avg = iterations.iter().sum::<usize>() as f64 / iterations.len() as f64;
    (max, avg)
}

pub fn speedup(t_full: f64, t_reduced: f64) -> f64 {
    t_full / t_reduced
}

/// Performance summary of one reduced run.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfReport {
    pub variant: Variant,
    pub n: usize,
    pub cond_explicit: f64,
    pub it_max: usize,
    pub it_avg: f64,
    pub t_explicit: f64,
    pub t_implicit: f64,
    pub t_total: f64,
    pub speedup_total: f64,
}

impl PerfReport {
    pub fn new(model: &ReducedModel, rom: &RomTrajectory, n: usize, hf_total: f64) -> Self {
        let (it_max, it_avg) = iteration_stats(&rom.iterations);
        let t_explicit: f64 = rom.t_explicit.iter().sum();
        let t_implicit: f64 = rom.t_implicit.iter().sum();
        let t_total = t_explicit + t_implicit;
        Self {
            variant: model.variant,
            n,
            cond_explicit: explicit_condition(model),
            it_max,
            it_avg,
            t_explicit,
            t_implicit,
            t_total,
            speedup_total: speedup(hf_total, t_total),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.variant,
            self.n,
            fmt_e12(self.cond_explicit),
            self.it_max,
            fmt_e12(self.it_avg),
            fmt_e12(self.t_explicit),
            fmt_e12(self.t_implicit),
            fmt_e12(self.t_total),
            fmt_e12(self.speedup_total),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag(w: &[f64]) -> SparseMatrix {
        let mut b = crate::linalg::TripletBuilder::new(w.len(), w.len());
        for (i, v) in w.iter().enumerate() {
            b.add(i, i, *v);
        }
        b.build()
    }

    #[test]
    fn identical_and_zero_approximations() {
        let r = DMatrix::from_fn(4, 6, |i, j| (i as f64 + 1.0) * (j as f64 - 2.5));
        let x = diag(&[1.0, 2.0, 3.0, 4.0]);
        let same = field_error(&r, &x, |k| r.column(k).iter().copied().collect());
        assert_eq!(
            same,
            FieldError {
                mean: 0.0,
                max: 0.0
            }
        );
        let zero = field_error(&r, &x, |_| vec![0.0; 4]);
        assert!((zero.mean - 1.0).abs() < 1e-15 && (zero.max - 1.0).abs() < 1e-15);
    }

    #[test]
    fn floor_filter_skips_negligible_steps() {
        let mut r = DMatrix::from_element(2, 3, 1.0);
        r.column_mut(0).fill(1e-14);
        let x = SparseMatrix::identity(2);
        // step 0 is wrong by a factor of 10 but falls below the floor
        let e = field_error(
            &r,
            &x,
            |k| if k == 0 { vec![1e-13; 2] } else { vec![1.1; 2] },
        );
        assert!((e.mean - 0.1).abs() < 1e-12);
        assert!((e.max - 0.1).abs() < 1e-12);
    }

    #[test]
    fn iteration_and_speed_cases() {
        assert_eq!(iteration_stats(&[1, 1, 1]), (1, 1.0));
        let (m, a) = iteration_stats(&[3, 5, 4, 4]);
        assert_eq!(m, 5);
        assert_eq!(a, 4.0);
        assert_eq!(speedup(2.0, 2.0), 1.0);
        assert_eq!(speedup(100.0, 0.5), 200.0);
    }

    proptest! {
        #[test]
        fn errors_are_scale_invariant(
            seed in 0u64..1000,
            scale in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64],
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let r = DMatrix::from_fn(5, 7, |_, _| rng.gen_range(-1.0..1.0));
            let a = DMatrix::from_fn(5, 7, |_, _| rng.gen_range(-1.0..1.0));
            let x = diag(&[1.0, 0.5, 2.0, 3.0, 1.5]);
            let e1 = field_error(&r, &x, |k| a.column(k).iter().copied().collect());
            let rs = &r * scale;
            let as_ = &a * scale;
            let e2 = field_error(&rs, &x, |k| as_.column(k).iter().copied().collect());
            prop_assert!(e1.mean >= 0.0 && e1.max >= e1.mean);
            prop_assert!((e1.mean - e2.mean).abs() <= 1e-12 * e1.mean.max(1.0));
            prop_assert!((e1.max - e2.max).abs() <= 1e-12 * e1.max.max(1.0));
        }

        #[test]
        fn it_max_bounds_average(its in proptest::collection::vec(1usize..50, 1..40)) {
            let (m, a) = iteration_stats(&its);
            prop_assert!(m as f64 >= a && a >= 1.0);
        }
    }
}
