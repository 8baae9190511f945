//! High-fidelity semi-implicit solver.
//!
//! Each time step runs an explicit viscous step with the wall velocity
//! imposed strongly on the interface, then a Robin-Neumann loop alternating
//! a pressure Poisson problem and the wall equation until the relative
//! increments settle.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::io::{fmt_e12, read_csv, read_snapmat, write_csv, write_snapmat};
use crate::linalg::{weighted_norm, Factorization, SparseMatrix};
use crate::meshfe::{assemble, traction_load, BoundaryTag, DirichletSolver, FeSystem, Form};
use crate::problem::{BoundaryData, PhysicalParams};

/// Every finite element operator the solver and the reduced models need,
/// assembled once without boundary conditions.
#[derive(Debug, Clone)]
pub struct HfOperators {
    /// `rho_f / dt` times the velocity mass matrix.
    pub mass_u: SparseMatrix,
    pub viscous: SparseMatrix,
    /// `mass_u + viscous`.
    pub explicit_lhs: SparseMatrix,
    pub gradient: SparseMatrix,
    pub divergence: SparseMatrix,
    pub pressure_stiffness: SparseMatrix,
    pub interface_pressure_mass: SparseMatrix,
    /// `pressure_stiffness + alpha_rob interface_pressure_mass`.
    pub pressure_lhs: SparseMatrix,
    pub mass_e: SparseMatrix,
    pub stiffness_e: SparseMatrix,
    pub mixed_mass: SparseMatrix,
    pub coupling: SparseMatrix,
    pub normal_traction: SparseMatrix,
    pub mass_p: SparseMatrix,
    pub h1_u: SparseMatrix,
    /// Wall operator including inertia.
    pub structure_lhs: SparseMatrix,
}

/// Wall operator `c1 K_E + c0 M_E`, plus `rho_s h_s / dt^2 M_E` when `inertia` is set.
pub fn structure_operator(
    mass_e: &SparseMatrix,
    stiffness_e: &SparseMatrix,
    params: &PhysicalParams,
    inertia: bool,
) -> SparseMatrix {
    let mut m = params.c0;
    if inertia {
        m += params.wall_inertia() / (params.dt * params.dt);
    }
    stiffness_e
        .scaled(params.c1)
        .add_scaled(m, mass_e)
        .expect("interface operators share a shape")
}

impl HfOperators {
    pub fn assemble(fe: &FeSystem, params: &PhysicalParams) -> Self {
        let mass_u = assemble(Form::VelocityMass, fe, params);
        let viscous = assemble(Form::Viscous, fe, params);
        let explicit_lhs = mass_u.add_scaled(1.0, &viscous).expect("same shape");
        let pressure_stiffness = assemble(Form::PressureStiffness, fe, params);
        let interface_pressure_mass = assemble(Form::InterfacePressureMass, fe, params);
        let pressure_lhs = pressure_stiffness
            .add_scaled(params.alpha_rob, &interface_pressure_mass)
            .expect("same shape");
        let mass_e = assemble(Form::DisplacementMass, fe, params);
        let stiffness_e = assemble(Form::DisplacementStiffness, fe, params);
        let structure_lhs = structure_operator(&mass_e, &stiffness_e, params, true);
        Self {
            mass_u,
            viscous,
            explicit_lhs,
            gradient: assemble(Form::PressureGradient, fe, params),
            divergence: assemble(Form::Divergence, fe, params),
            pressure_stiffness,
            interface_pressure_mass,
            pressure_lhs,
            mixed_mass: assemble(Form::InterfaceMixedMass, fe, params),
            coupling: assemble(Form::NormalCoupling, fe, params),
            normal_traction: assemble(Form::NormalViscousTraction, fe, params),
            mass_p: assemble(Form::PressureMass, fe, params),
            h1_u: assemble(Form::VelocityH1, fe, params),
            mass_e,
            stiffness_e,
            structure_lhs,
        }
    }
}

/// Solution at time level `k` together with the history the next step needs.
#[derive(Debug, Clone, PartialEq)]
pub struct HfState {
    pub k: usize,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_prev: Vec<f64>,
}

impl HfState {
    /// Fluid and wall at rest.
    pub fn resting(fe: &FeSystem) -> Self {
        Self {
            k: 0,
            u: vec![0.0; fe.n_velocity()],
            p: vec![0.0; fe.n_pressure()],
            eta: vec![0.0; fe.n_displacement()],
            eta_prev: vec![0.0; fe.n_displacement()],
        }
    }
}

/// Recorded high-fidelity run. Column `k - 1` of each matrix holds step `k`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: PhysicalParams,
    pub u: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub eta: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub iterations: Vec<usize>,
    pub t_explicit: Vec<f64>,
    pub t_implicit: Vec<f64>,
    /// Assembly and factorization time [s].
    pub t_setup: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.iterations.len()
    }

    pub fn total_time(&self) -> f64 {
        self.t_setup + self.t_explicit.iter().sum::<f64>() + self.t_implicit.iter().sum::<f64>()
    }

    /// Writes `u.snap`, `p.snap`, `eta.snap`, `lambda.snap`, `trajectory.csv`
    /// and `timing.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_snapmat(&dir.join("u.snap"), &self.u)?;
        write_snapmat(&dir.join("p.snap"), &self.p)?;
        write_snapmat(&dir.join("eta.snap"), &self.eta)?;
        write_snapmat(&dir.join("lambda.snap"), &self.lambda)?;
        let rows: Vec<String> = (0..self.steps())
            .map(|i| {
                format!(
                    "{},{},{},{},{}",
                    i + 1,
                    fmt_e12(self.params.time(i + 1)),
                    self.iterations[i],
                    fmt_e12(self.t_explicit[i]),
                    fmt_e12(self.t_implicit[i])
                )
            })
            .collect();
        write_csv(
            &dir.join("trajectory.csv"),
            "k,t,iters,t_explicit_s,t_implicit_s",
            &rows,
        )?;
        write_csv(
            &dir.join("timing.csv"),
            "t_setup_s,t_explicit_s,t_implicit_s,t_total_s",
            &[format!(
                "{},{},{},{}",
                fmt_e12(self.t_setup),
                fmt_e12(self.t_explicit.iter().sum()),
                fmt_e12(self.t_implicit.iter().sum()),
                fmt_e12(self.total_time())
            )],
        )
    }

    pub fn load(dir: &Path, params: PhysicalParams) -> Result<Self> {
        let u = read_snapmat(&dir.join("u.snap"))?;
        let p = read_snapmat(&dir.join("p.snap"))?;
        let eta = read_snapmat(&dir.join("eta.snap"))?;
        let lambda = read_snapmat(&dir.join("lambda.snap"))?;
        let (iterations, t_explicit, t_implicit) = match read_csv(&dir.join("trajectory.csv")) {
            Ok((_, rows)) => {
                let mut its = Vec::with_capacity(rows.len());
                let mut te = Vec::with_capacity(rows.len());
                let mut ti = Vec::with_capacity(rows.len());
                for (line, r) in rows.iter().enumerate() {
                    let bad = |m: &str| Error::Parse {
                        line: line + 2,
                        message: format!("trajectory.csv: {m}"),
                    };
                    its.push(r[2].parse().map_err(|_| bad("iters"))?);
                    te.push(r[3].parse().map_err(|_| bad("t_explicit_s"))?);
                    ti.push(r[4].parse().map_err(|_| bad("t_implicit_s"))?);
                }
                (its, te, ti)
            }
            Err(Error::Io(_)) => {
                let k = u.ncols();
                (vec![1; k], vec![0.0; k], vec![0.0; k])
            }
            Err(e) => return Err(e),
        };
        let t_setup = match read_csv(&dir.join("timing.csv")) {
            Ok((_, rows)) => rows
                .first()
                .and_then(|r| r.first())
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: 2,
                    message: "timing.csv: t_setup_s".into(),
                })?,
            Err(Error::Io(_)) => 0.0,
            Err(e) => return Err(e),
        };
        let k = u.ncols();
        if [p.ncols(), eta.ncols(), lambda.ncols(), iterations.len()]
            .iter()
            .any(|&c| c != k)
        {
            return Err(Error::Usage(format!(
                "{}: inconsistent step counts",
                dir.display()
            )));
        }
        Ok(Self {
            params,
            u,
            p,
            eta,
            lambda,
            iterations,
            t_explicit,
            t_implicit,
            t_setup,
        })
    }
}

/// Relative increment `|new - old| / |new|`, with the small-denominator guard.
pub(crate) fn relative_increment(increment: f64, size: f64) -> f64 {
    const GUARD: f64 = 1e-14;
    if size < GUARD {
        if increment < GUARD {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        increment / size
    }
}

pub struct HfSolver<'a> {
    fe: &'a FeSystem,
    params: PhysicalParams,
    boundary: BoundaryData,
    ops: HfOperators,
    explicit: DirichletSolver,
    pressure: DirichletSolver,
    structure: DirichletSolver,
    mass_e_factor: Factorization,
    n_inlet: usize,
    n_symmetry: usize,
    setup_time: f64,
}

impl<'a> HfSolver<'a> {
    pub fn new(fe: &'a FeSystem, params: PhysicalParams, boundary: BoundaryData) -> Result<Self> {
        params.validate()?;
        let start = Instant::now();
        let ops = HfOperators::assemble(fe, &params);

        // interface x, interface y, then the rest of the symmetry line (y only)
        let ne = fe.n_displacement();
        let mut dofs: Vec<usize> = fe.interface_nodes.iter().map(|&n| 2 * n).collect();
        dofs.extend(fe.interface_nodes.iter().map(|&n| 2 * n + 1));
        let symmetry: Vec<usize> = fe
            .nodes_on(BoundaryTag::Symmetry)
            .into_iter()
            .filter(|n| !fe.interface_nodes.contains(n))
            .map(|n| 2 * n + 1)
            .collect();
        let n_symmetry = symmetry.len();
        dofs.extend(symmetry);
        let explicit = DirichletSolver::new(&ops.explicit_lhs, &dofs)?;

        let inlet = fe.mesh.vertices_on(BoundaryTag::Inlet);
        let outlet = fe.mesh.vertices_on(BoundaryTag::Outlet);
        let n_inlet = inlet.len();
        let pdofs: Vec<usize> = inlet.into_iter().chain(outlet).collect();
        let pressure = DirichletSolver::new(&ops.pressure_lhs, &pdofs)?;

        let structure = DirichletSolver::new(&ops.structure_lhs, &[0, ne - 1])?;
        let mass_e_factor = Factorization::new(&ops.mass_e)?;
        Ok(Self {
            fe,
            params,
            boundary,
            ops,
            explicit,
            pressure,
            structure,
            mass_e_factor,
            n_inlet,
            n_symmetry,
            setup_time: start.elapsed().as_secs_f64(),
        })
    }

    pub fn fe(&self) -> &FeSystem {
        self.fe
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    pub fn operators(&self) -> &HfOperators {
        &self.ops
    }

    /// Right-hand side of the explicit step before any boundary condition.
    pub fn explicit_rhs(&self, state: &HfState) -> Vec<f64> {
        let mut rhs = self.ops.mass_u.mul_vec(&state.u);
        self.ops.gradient.mul_vec_add(-1.0, &state.p, &mut rhs);
        rhs
    }

    /// Solves the explicit-step operator with the given interface velocity
    /// components and `u_y = 0` on the symmetry line.
    pub fn solve_explicit(
        &self,
        rhs: &[f64],
        interface_ux: &[f64],
        interface_uy: &[f64],
    ) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.explicit.dofs().len());
        values.extend_from_slice(interface_ux);
        values.extend_from_slice(interface_uy);
        values.extend(std::iter::repeat(0.0).take(self.n_symmetry));
        self.explicit.solve(rhs, &values)
    }

    pub fn explicit_step(&self, state: &HfState) -> Vec<f64> {
        let ne = self.fe.n_displacement();
        let wall_velocity: Vec<f64> = state
            .eta
            .iter()
            .zip(&state.eta_prev)
            .map(|(a, b)| (a - b) / self.params.dt)
            .collect();
        self.solve_explicit(&self.explicit_rhs(state), &vec![0.0; ne], &wall_velocity)
    }

    /// Solves the Robin pressure operator with Dirichlet data on inlet and outlet.
    pub fn solve_pressure(&self, rhs: &[f64], p_in: f64, p_out: f64) -> Vec<f64> {
        let n = self.pressure.dofs().len();
        let values: Vec<f64> = (0..n)
            .map(|i| if i < self.n_inlet { p_in } else { p_out })
            .collect();
        self.pressure.solve(rhs, &values)
    }

    pub fn pressure_substep(
        &self,
        u_new: &[f64],
        eta_j: &[f64],
        p_j: &[f64],
        state: &HfState,
    ) -> Vec<f64> {
        let p = &self.params;
        let mut rhs = self.ops.divergence.mul_vec(u_new);
        rhs.iter_mut().for_each(|v| *v *= -p.rho_f / p.dt);
        let dtt: Vec<f64> = (0..eta_j.len())
            .map(|i| (eta_j[i] - 2.0 * state.eta[i] + state.eta_prev[i]) / (p.dt * p.dt))
            .collect();
        self.ops.mixed_mass.mul_vec_add(-p.rho_f, &dtt, &mut rhs);
        self.ops
            .interface_pressure_mass
            .mul_vec_add(p.alpha_rob, p_j, &mut rhs);
        let t = p.time(state.k + 1);
        self.solve_pressure(&rhs, self.boundary.p_in(t), self.boundary.p_out(t))
    }

    /// Solves the wall operator with clamped ends.
    pub fn solve_structure(&self, rhs: &[f64]) -> Vec<f64> {
        self.structure.solve(rhs, &[0.0, 0.0])
    }

    pub fn structure_substep(&self, u_new: &[f64], p_next: &[f64], state: &HfState) -> Vec<f64> {
        let p = &self.params;
        let history: Vec<f64> = state
            .eta
            .iter()
            .zip(&state.eta_prev)
            .map(|(a, b)| 2.0 * a - b)
            .collect();
        let mut rhs = traction_load(u_new, p_next, self.fe, p);
        self.ops
            .mass_e
            .mul_vec_add(p.wall_inertia() / (p.dt * p.dt), &history, &mut rhs);
        self.solve_structure(&rhs)
    }

    /// Robin-Neumann iterations; returns `(p, eta, iterations)`.
    pub fn implicit_loop(
        &self,
        u_new: &[f64],
        state: &HfState,
    ) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let mut p_j = state.p.clone();
        let mut eta_j = state.eta.clone();
        for j in 1..=self.params.max_implicit_iters {
            let p_next = self.pressure_substep(u_new, &eta_j, &p_j, state);
            let eta_next = self.structure_substep(u_new, &p_next, state);
            let dp: Vec<f64> = p_next.iter().zip(&p_j).map(|(a, b)| a - b).collect();
            let de: Vec<f64> = eta_next.iter().zip(&eta_j).map(|(a, b)| a - b).collect();
            let rp = relative_increment(
                weighted_norm(&self.ops.mass_p, &dp),
                weighted_norm(&self.ops.mass_p, &p_next),
            );
            let re = relative_increment(
                weighted_norm(&self.ops.stiffness_e, &de),
                weighted_norm(&self.ops.stiffness_e, &eta_next),
            );
            p_j = p_next;
            eta_j = eta_next;
            if rp.min(re) < self.params.tol_implicit {
                return Ok((p_j, eta_j, j));
            }
        }
        Err(Error::NonConvergence {
            step: state.k + 1,
            max_iters: self.params.max_implicit_iters,
        })
    }

    /// Interface traction dual to the strong coupling condition, as coefficients
    /// of the interface P2 space.
    pub fn extract_multiplier(&self, u_new: &[f64], rhs: &[f64]) -> Vec<f64> {
        let residual = self.explicit_residual(u_new, rhs);
        let mut r = self.fe.trace(&residual);
        self.mass_e_factor.solve_in_place(&mut r);
        r
    }

    /// `rhs - lhs u_new` with the unconstrained explicit operator.
    pub fn explicit_residual(&self, u_new: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut r = rhs.to_vec();
        self.ops.explicit_lhs.mul_vec_add(-1.0, u_new, &mut r);
        r
    }

    /// One full time step; returns the new state, the multiplier, the
    /// iteration count and the (explicit, implicit) wall times.
    pub fn step(&self, state: &HfState) -> Result<(HfState, Vec<f64>, usize, f64, f64)> {
        let t0 = Instant::now();
        let u_new = self.explicit_step(state);
        let t_explicit = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let (p, eta, iters) = self.implicit_loop(&u_new, state)?;
        let t_implicit = t1.elapsed().as_secs_f64();
        let lambda = self.extract_multiplier(&u_new, &self.explicit_rhs(state));
        let next = HfState {
            k: state.k + 1,
            u: u_new,
            p,
            eta_prev: state.eta.clone(),
            eta,
        };
        Ok((next, lambda, iters, t_explicit, t_implicit))
    }

    pub fn run(&self) -> Result<Trajectory> {
        let k_total = self.params.steps;
        let fe = self.fe;
        let mut traj = Trajectory {
            params: self.params.clone(),
            u: DMatrix::zeros(fe.n_velocity(), k_total),
            p: DMatrix::zeros(fe.n_pressure(), k_total),
            eta: DMatrix::zeros(fe.n_displacement(), k_total),
            lambda: DMatrix::zeros(fe.n_displacement(), k_total),
            iterations: Vec::with_capacity(k_total),
            t_explicit: Vec::with_capacity(k_total),
            t_implicit: Vec::with_capacity(k_total),
            t_setup: self.setup_time,
        };
        let mut state = HfState::resting(fe);
        for col in 0..k_total {
            let (next, lambda, iters, te, ti) = self.step(&state)?;
            traj.u.column_mut(col).copy_from_slice(&next.u);
            traj.p.column_mut(col).copy_from_slice(&next.p);
            traj.eta.column_mut(col).copy_from_slice(&next.eta);
            traj.lambda.column_mut(col).copy_from_slice(&lambda);
            traj.iterations.push(iters);
            traj.t_explicit.push(te);
            traj.t_implicit.push(ti);
            state = next;
        }
        Ok(traj)
    }
}
