//! POD-Galerkin reduced models.
//!
//! Variant 1 keeps the velocity basis built from the velocity snapshots and
//! enforces the interface condition weakly through a reduced multiplier
//! space. Variant 2 works with `z = u - D_t(ext eta) e_y`, which vanishes on
//! the interface, so its explicit step is a plain SPD Galerkin system.
//! Both share the reduced Robin-Neumann loop. Pressure modes satisfy
//! homogeneous inlet/outlet conditions and the Dirichlet data is carried by a
//! harmonic lifting.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hifi::{relative_increment, HfOperators};
use crate::io::write_snapmat;
use crate::linalg::{cond2, DenseLu, SparseMatrix};
use crate::meshfe::{BoundaryTag, DirichletSolver, FeSystem, Field, HarmonicExtension};
use crate::problem::{BoundaryData, PhysicalParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Lagrange multiplier coupling.
    Rom1,
    /// Change of variable with harmonic extension.
    Rom2,
}

impl Variant {
    pub fn number(self) -> u8 {
        match self {
            Variant::Rom1 => 1,
            Variant::Rom2 => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Variant::Rom1),
            "2" => Ok(Variant::Rom2),
            other => Err(Error::Usage(format!(
                "unknown reduced model variant '{other}' (expected 1 or 2)"
            ))),
        }
    }
}

/// Harmonic pressure liftings: column 0 is 1 on the inlet and 0 on the
/// outlet, column 1 the reverse.
#[derive(Debug, Clone)]
pub struct Lifting {
    pub fields: DMatrix<f64>,
}

impl Lifting {
    pub fn new(fe: &FeSystem, ops: &HfOperators) -> Result<Self> {
        let inlet = fe.mesh.vertices_on(BoundaryTag::Inlet);
        let outlet = fe.mesh.vertices_on(BoundaryTag::Outlet);
        let dofs: Vec<usize> = inlet.iter().chain(&outlet).copied().collect();
        let solver = DirichletSolver::new(&ops.pressure_stiffness, &dofs)?;
        let values: Vec<f64> = (0..dofs.len())
            .map(|i| if i < inlet.len() { 1.0 } else { 0.0 })
            .collect();
        let ell = solver.solve(&vec![0.0; fe.n_pressure()], &values);
        let complement: Vec<f64> = ell.iter().map(|v| 1.0 - v).collect();
        let mut fields = DMatrix::zeros(fe.n_pressure(), 2);
        fields.column_mut(0).copy_from_slice(&ell);
        fields.column_mut(1).copy_from_slice(&complement);
        Ok(Self { fields })
    }

    pub fn inlet(&self) -> &[f64] {
        &self.fields.as_slice()[..self.fields.nrows()]
    }

    /// Lifting amplitudes at time `t`.
    pub fn amplitudes(boundary: &BoundaryData, t: f64) -> DVector<f64> {
        DVector::from_vec(vec![boundary.p_in(t), boundary.p_out(t)])
    }

    pub fn field(&self, amplitudes: &DVector<f64>) -> DVector<f64> {
        &self.fields * amplitudes
    }
}

/// Subtracts the lifting from every pressure snapshot (column `c` is step `c + 1`).
pub fn homogenize_pressure(
    sp: &DMatrix<f64>,
    lifting: &Lifting,
    boundary: &BoundaryData,
    params: &PhysicalParams,
) -> DMatrix<f64> {
    let mut out = sp.clone();
    for c in 0..sp.ncols() {
        let g = Lifting::amplitudes(boundary, params.time(c + 1));
        if g.iter().any(|v| *v != 0.0) {
            let l = lifting.field(&g);
            let mut col = out.column_mut(c);
            col -= l;
        }
    }
    out
}

/// `z^k = u^k - e_y ext((eta^{k-1} - eta^{k-2}) / dt)` for every recorded step.
pub fn z_snapshots(
    su: &DMatrix<f64>,
    seta: &DMatrix<f64>,
    fe: &FeSystem,
    ext: &HarmonicExtension,
    dt: f64,
) -> DMatrix<f64> {
    let mut out = su.clone();
    let ne = seta.nrows();
    let zero = DVector::zeros(ne);
    for c in 1..su.ncols() {
        let prev = seta.column(c - 1).into_owned();
        let prev2 = if c >= 2 {
            seta.column(c - 2).into_owned()
        } else {
            zero.clone()
        };
        let rate = (prev - prev2) / dt;
        if rate.iter().all(|v| *v == 0.0) {
            continue;
        }
        let w = ext.extend_vertical(fe, rate.as_slice());
        let mut col = out.column_mut(c);
        col -= DVector::from_vec(w);
    }
    out
}

/// Vertical fields `e_y ext(phi_l)` for every displacement mode.
pub fn extension_basis(ze: &DMatrix<f64>, fe: &FeSystem, ext: &HarmonicExtension) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(fe.n_velocity(), ze.ncols());
    for l in 0..ze.ncols() {
        let w = ext.extend_vertical(fe, ze.column(l).as_slice());
        h.column_mut(l).copy_from_slice(&w);
    }
    h
}

/// Bases used by a reduced model, already truncated.
#[derive(Debug, Clone)]
pub struct RomBases {
    /// Velocity modes (variant 1) or `z` modes (variant 2).
    pub velocity: DMatrix<f64>,
    pub pressure: DMatrix<f64>,
    pub displacement: DMatrix<f64>,
    /// Multiplier modes, variant 1 only.
    pub multiplier: Option<DMatrix<f64>>,
}

impl RomBases {
    /// Keeps the first `n` columns of every basis (or all available ones).
    pub fn truncate(&self, n: usize) -> RomBases {
        let t = |m: &DMatrix<f64>| m.columns(0, n.min(m.ncols())).into_owned();
        RomBases {
            velocity: t(&self.velocity),
            pressure: t(&self.pressure),
            displacement: t(&self.displacement),
            multiplier: self.multiplier.as_ref().map(t),
        }
    }
}

fn project(a: &SparseMatrix, left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    a.project(left, right)
}

/// Offline data of a reduced model: bases and every projected operator.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub variant: Variant,
    pub params: PhysicalParams,
    pub zu: DMatrix<f64>,
    pub zp: DMatrix<f64>,
    pub ze: DMatrix<f64>,
    pub zl: Option<DMatrix<f64>>,
    /// Extended displacement modes (variant 2).
    pub ext_modes: Option<DMatrix<f64>>,
    pub lifting: Lifting,

    pub mass_n: DMatrix<f64>,
    pub explicit_n: DMatrix<f64>,
    pub grad_n: DMatrix<f64>,
    pub grad_l: DMatrix<f64>,
    pub coupling_n: DMatrix<f64>,
    pub constraint_n: DMatrix<f64>,
    pub mass_h: DMatrix<f64>,
    pub explicit_h: DMatrix<f64>,
    /// Saddle matrix (variant 1) or velocity matrix (variant 2).
    pub explicit_lhs: DMatrix<f64>,
    explicit_factor: Option<DenseLu>,

    pub pressure_n: DMatrix<f64>,
    pressure_factor: DenseLu,
    pub div_n: DMatrix<f64>,
    pub div_h: DMatrix<f64>,
    pub mixed_n: DMatrix<f64>,
    pub robin_n: DMatrix<f64>,
    pub robin_l: DMatrix<f64>,
    pub pressure_l: DMatrix<f64>,

    pub structure_n: DMatrix<f64>,
    structure_factor: DenseLu,
    pub mass_e_n: DMatrix<f64>,
    pub trac_p: DMatrix<f64>,
    pub trac_l: DMatrix<f64>,
    pub trac_u: DMatrix<f64>,
    pub trac_h: DMatrix<f64>,

    pub gram_pp: DMatrix<f64>,
    pub gram_pl: DMatrix<f64>,
    pub gram_ll: DMatrix<f64>,
    pub gram_ee: DMatrix<f64>,
}

impl ReducedModel {
    pub fn n_u(&self) -> usize {
        self.zu.ncols()
    }

    pub fn n_p(&self) -> usize {
        self.zp.ncols()
    }

    pub fn n_eta(&self) -> usize {
        self.ze.ncols()
    }

    pub fn n_lambda(&self) -> usize {
        self.zl.as_ref().map_or(0, |z| z.ncols())
    }

    /// Fourth mode count of the metadata row: multiplier modes for variant 1,
    /// `z` modes for variant 2.
    pub fn n_lambda_or_z(&self) -> usize {
        match self.variant {
            Variant::Rom1 => self.n_lambda(),
            Variant::Rom2 => self.n_u(),
        }
    }

    /// Whether the explicit-step matrix could be factored.
    pub fn is_solvable(&self) -> bool {
        self.explicit_factor.is_some()
    }

    pub fn explicit_condition(&self) -> f64 {
        if self.explicit_factor.is_none() {
            return f64::INFINITY;
        }
        cond2(&self.explicit_lhs)
    }

    fn check_dims(bases: &RomBases, fe: &FeSystem) -> Result<()> {
        let checks = [
            ("velocity", bases.velocity.nrows(), fe.n_velocity()),
            ("pressure", bases.pressure.nrows(), fe.n_pressure()),
            (
                "displacement",
                bases.displacement.nrows(),
                fe.n_displacement(),
            ),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::Usage(format!(
                    "{name} basis has {got} rows, expected {want}"
                )));
            }
        }
        if let Some(zl) = &bases.multiplier {
            if zl.nrows() != fe.n_displacement() {
                return Err(Error::Usage(format!(
                    "multiplier basis has {} rows, expected {}",
                    zl.nrows(),
                    fe.n_displacement()
                )));
            }
        }
        let empty = [
            bases.velocity.ncols(),
            bases.pressure.ncols(),
            bases.displacement.ncols(),
        ];
        if empty.contains(&0) {
            return Err(Error::Usage("every basis needs at least one mode".into()));
        }
        Ok(())
    }

    pub fn project_rom1(
        bases: &RomBases,
        fe: &FeSystem,
        ops: &HfOperators,
        lifting: &Lifting,
        params: &PhysicalParams,
    ) -> Result<Self> {
        Self::check_dims(bases, fe)?;
        let zl = bases
            .multiplier
            .clone()
            .ok_or_else(|| Error::Usage("variant 1 needs a multiplier basis".into()))?;
        if zl.ncols() == 0 {
            return Err(Error::Usage("every basis needs at least one mode".into()));
        }
        let zu = &bases.velocity;
        let explicit_n = project(&ops.explicit_lhs, zu, zu);
        let coupling_n = project(&ops.coupling, zu, &zl);
        let constraint_n = project(&ops.mass_e, &zl, &bases.displacement);
        let (nu, nl) = (zu.ncols(), zl.ncols());
        let mut saddle = DMatrix::zeros(nu + nl, nu + nl);
        saddle.view_mut((0, 0), (nu, nu)).copy_from(&explicit_n);
        saddle.view_mut((0, nu), (nu, nl)).copy_from(&coupling_n);
        saddle
            .view_mut((nu, 0), (nl, nu))
            .copy_from(&coupling_n.transpose());
        let explicit_factor = DenseLu::new(&saddle).ok();
        let empty = DMatrix::zeros(0, 0);
        Self::finish(
            Variant::Rom1,
            bases,
            fe,
            ops,
            lifting,
            params,
            Some(zl),
            None,
            explicit_n,
            coupling_n,
            constraint_n,
            empty.clone(),
            empty,
            saddle,
            explicit_factor,
        )
    }

    pub fn project_rom2(
        bases: &RomBases,
        fe: &FeSystem,
        ops: &HfOperators,
        lifting: &Lifting,
        ext: &HarmonicExtension,
        params: &PhysicalParams,
    ) -> Result<Self> {
        Self::check_dims(bases, fe)?;
        let zz = &bases.velocity;
        let h = extension_basis(&bases.displacement, fe, ext);
        let explicit_n = project(&ops.explicit_lhs, zz, zz);
        let mass_h = project(&ops.mass_u, zz, &h);
        let explicit_h = project(&ops.explicit_lhs, zz, &h);
        let explicit_factor = DenseLu::new(&explicit_n).ok();
        let empty = DMatrix::zeros(0, 0);
        let lhs = explicit_n.clone();
        Self::finish(
            Variant::Rom2,
            bases,
            fe,
            ops,
            lifting,
            params,
            None,
            Some(h),
            explicit_n,
            empty.clone(),
            empty,
            mass_h,
            explicit_h,
            lhs,
            explicit_factor,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        variant: Variant,
        bases: &RomBases,
        _fe: &FeSystem,
        ops: &HfOperators,
        lifting: &Lifting,
        params: &PhysicalParams,
        zl: Option<DMatrix<f64>>,
        ext_modes: Option<DMatrix<f64>>,
        explicit_n: DMatrix<f64>,
        coupling_n: DMatrix<f64>,
        constraint_n: DMatrix<f64>,
        mass_h: DMatrix<f64>,
        explicit_h: DMatrix<f64>,
        explicit_lhs: DMatrix<f64>,
        explicit_factor: Option<DenseLu>,
    ) -> Result<Self> {
        let (zu, zp, ze) = (&bases.velocity, &bases.pressure, &bases.displacement);
        let l = &lifting.fields;
        let pressure_n = project(&ops.pressure_lhs, zp, zp);
        let pressure_factor = DenseLu::new(&pressure_n)?;
        let structure_n = project(&ops.structure_lhs, ze, ze);
        let structure_factor = DenseLu::new(&structure_n)?;
        let mixed_t = ops.mixed_mass.transpose();
        let (div_h, trac_h) = match &ext_modes {
            Some(h) => (
                project(&ops.divergence, zp, h),
                project(&ops.normal_traction, ze, h),
            ),
            None => (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)),
        };
        Ok(Self {
            variant,
            params: params.clone(),
            mass_n: project(&ops.mass_u, zu, zu),
            grad_n: project(&ops.gradient, zu, zp),
            grad_l: project(&ops.gradient, zu, l),
            explicit_n,
            coupling_n,
            constraint_n,
            mass_h,
            explicit_h,
            explicit_lhs,
            explicit_factor,
            pressure_n,
            pressure_factor,
            div_n: project(&ops.divergence, zp, zu),
            div_h,
            mixed_n: project(&ops.mixed_mass, zp, ze),
            robin_n: project(&ops.interface_pressure_mass, zp, zp),
            robin_l: project(&ops.interface_pressure_mass, zp, l),
            pressure_l: project(&ops.pressure_lhs, zp, l),
            structure_n,
            structure_factor,
            mass_e_n: project(&ops.mass_e, ze, ze),
            trac_p: project(&mixed_t, ze, zp),
            trac_l: project(&mixed_t, ze, l),
            trac_u: project(&ops.normal_traction, ze, zu),
            trac_h,
            gram_pp: project(&ops.mass_p, zp, zp),
            gram_pl: project(&ops.mass_p, zp, l),
            gram_ll: project(&ops.mass_p, l, l),
            gram_ee: project(&ops.stiffness_e, ze, ze),
            zu: zu.clone(),
            zp: zp.clone(),
            ze: ze.clone(),
            zl,
            ext_modes,
            lifting: lifting.clone(),
        })
    }

    /// Writes bases, projected operators and `reduced_meta.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let velocity_name = match self.variant {
            Variant::Rom1 => "u",
            Variant::Rom2 => "z",
        };
        write_snapmat(&dir.join(format!("basis_{velocity_name}.snap")), &self.zu)?;
        write_snapmat(&dir.join("basis_p.snap"), &self.zp)?;
        write_snapmat(&dir.join("basis_eta.snap"), &self.ze)?;
        if let Some(zl) = &self.zl {
            write_snapmat(&dir.join("basis_lambda.snap"), zl)?;
        }
        if let Some(h) = &self.ext_modes {
            write_snapmat(&dir.join("basis_eta_extended.snap"), h)?;
        }
        write_snapmat(&dir.join("lifting.snap"), &self.lifting.fields)?;
        let ops: [(&str, &DMatrix<f64>); 22] = [
            ("mass", &self.mass_n),
            ("explicit", &self.explicit_n),
            ("explicit_lhs", &self.explicit_lhs),
            ("gradient", &self.grad_n),
            ("gradient_lifting", &self.grad_l),
            ("coupling", &self.coupling_n),
            ("constraint", &self.constraint_n),
            ("mass_extension", &self.mass_h),
            ("explicit_extension", &self.explicit_h),
            ("pressure", &self.pressure_n),
            ("divergence", &self.div_n),
            ("divergence_extension", &self.div_h),
            ("interface_mixed", &self.mixed_n),
            ("robin", &self.robin_n),
            ("robin_lifting", &self.robin_l),
            ("pressure_lifting", &self.pressure_l),
            ("structure", &self.structure_n),
            ("structure_mass", &self.mass_e_n),
            ("traction_pressure", &self.trac_p),
            ("traction_lifting", &self.trac_l),
            ("traction_velocity", &self.trac_u),
            ("traction_extension", &self.trac_h),
        ];
        for (name, m) in ops {
            if m.nrows() * m.ncols() > 0 {
                write_snapmat(&dir.join(format!("op_{name}.snap")), m)?;
            }
        }
        crate::io::write_csv(
            &dir.join("reduced_meta.csv"),
            "variant,N_u,N_p,N_eta,N_lambda_or_z",
            &[format!(
                "{},{},{},{},{}",
                self.variant,
                self.n_u(),
                self.n_p(),
                self.n_eta(),
                self.n_lambda_or_z()
            )],
        )
    }

    /// FE field from reduced coefficients at time `t`.
    ///
    /// Pressure adds the lifting for the boundary data at `t`. For the
    /// variant-2 velocity, `coeffs` holds the `z` coefficients followed by the
    /// displacement-rate coefficients of the extension term.
    pub fn reconstruct(
        &self,
        field: Field,
        coeffs: &[f64],
        t: f64,
        boundary: &BoundaryData,
    ) -> Result<Vec<f64>> {
        let apply = |z: &DMatrix<f64>, c: &[f64]| -> Result<DVector<f64>> {
            if c.len() != z.ncols() {
                return Err(Error::Usage(format!(
                    "{} coefficients for {} modes",
                    c.len(),
                    z.ncols()
                )));
            }
            Ok(z * DVector::from_column_slice(c))
        };
        let v = match (field, self.variant) {
            (Field::Velocity, Variant::Rom1) | (Field::Auxiliary, _) => apply(&self.zu, coeffs)?,
            (Field::Velocity, Variant::Rom2) => {
                let n = self.n_u();
                if coeffs.len() != n + self.n_eta() {
                    return Err(Error::Usage(format!(
                        "{} coefficients for {} z modes and {} extension modes",
                        coeffs.len(),
                        n,
                        self.n_eta()
                    )));
                }
                let h = self.ext_modes.as_ref().expect("variant 2 has extensions");
                apply(&self.zu, &coeffs[..n])? + apply(h, &coeffs[n..])?
            }
            (Field::Pressure, _) => {
                apply(&self.zp, coeffs)? + self.lifting.field(&Lifting::amplitudes(boundary, t))
            }
            (Field::Displacement, _) => apply(&self.ze, coeffs)?,
            (Field::Multiplier, _) => match &self.zl {
                Some(zl) => apply(zl, coeffs)?,
                None => return Err(Error::Usage("variant 2 has no multiplier".into())),
            },
            (Field::Scalar, _) => return Err(Error::Usage("scalar fields are not reduced".into())),
        };
        Ok(v.data.into())
    }

    /// Least-squares coefficients of an FE vector in the `X`-orthonormal basis of `field`.
    pub fn project_field(&self, field: Field, x: &SparseMatrix, v: &[f64]) -> Vec<f64> {
        let z = match field {
            Field::Pressure => &self.zp,
            Field::Displacement => &self.ze,
            Field::Multiplier => self.zl.as_ref().expect("multiplier basis"),
            _ => &self.zu,
        };
        (z.transpose() * DVector::from_vec(x.mul_vec(v)))
            .data
            .into()
    }
}

/// Reduced coefficients of a whole online run; column `k - 1` is step `k`.
#[derive(Debug, Clone)]
pub struct RomTrajectory {
    pub variant: Variant,
    /// Velocity (variant 1) or `z` (variant 2) coefficients.
    pub velocity: DMatrix<f64>,
    pub pressure: DMatrix<f64>,
    /// Lifting amplitudes `(p_in, p_out)` of each recorded pressure.
    pub lifting: DMatrix<f64>,
    pub displacement: DMatrix<f64>,
    pub multiplier: DMatrix<f64>,
    pub iterations: Vec<usize>,
    pub t_explicit: Vec<f64>,
    pub t_implicit: Vec<f64>,
    /// Largest weak-constraint residual per step (variant 1).
    pub constraint_residual: Vec<f64>,
}

impl RomTrajectory {
    pub fn steps(&self) -> usize {
        self.iterations.len()
    }

    pub fn online_time(&self) -> f64 {
        self.t_explicit.iter().sum::<f64>() + self.t_implicit.iter().sum::<f64>()
    }

    /// Displacement-rate coefficients `(eta^{k-1} - eta^{k-2}) / dt` that
    /// enter the variant-2 velocity at step `k`.
    fn extension_rate(&self, k: usize, dt: f64) -> DVector<f64> {
        let ne = self.displacement.nrows();
        let col = |j: usize| -> DVector<f64> {
            if j == 0 {
                DVector::zeros(ne)
            } else {
                self.displacement.column(j - 1).into_owned()
            }
        };
        if k < 2 {
            return DVector::zeros(ne);
        }
        (col(k - 1) - col(k - 2)) / dt
    }

    /// FE field at step `k` (1-based).
    pub fn field(&self, field: Field, k: usize, model: &ReducedModel) -> Vec<f64> {
        let c = k - 1;
        let v: DVector<f64> = match field {
            Field::Velocity => {
                let mut v = &model.zu * self.velocity.column(c);
                if let Some(h) = &model.ext_modes {
                    v += h * self.extension_rate(k, model.params.dt);
                }
                v
            }
            Field::Auxiliary => &model.zu * self.velocity.column(c),
            Field::Pressure => {
                &model.zp * self.pressure.column(c) + &model.lifting.fields * self.lifting.column(c)
            }
            Field::Displacement => &model.ze * self.displacement.column(c),
            Field::Multiplier => match &model.zl {
                Some(zl) => zl * self.multiplier.column(c),
                None => DVector::zeros(model.ze.nrows()),
            },
            Field::Scalar => DVector::zeros(0),
        };
        v.data.into()
    }
}

struct RomState {
    k: usize,
    u: DVector<f64>,
    p: DVector<f64>,
    g: DVector<f64>,
    eta: DVector<f64>,
    eta_prev: DVector<f64>,
    eta_prev2: DVector<f64>,
}

impl ReducedModel {
    fn pressure_norm2(&self, p: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let a = p.dot(&(&self.gram_pp * p));
        let b = 2.0 * p.dot(&(&self.gram_pl * g));
        let c = g.dot(&(&self.gram_ll * g));
        (a + b + c).max(0.0)
    }

    /// Reduced Robin-Neumann loop given the velocity's divergence and traction
    /// contributions.
    fn implicit_loop(
        &self,
        div_u: &DVector<f64>,
        trac_u: &DVector<f64>,
        state: &RomState,
        boundary: &BoundaryData,
    ) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>, usize)> {
        let p = &self.params;
        let g_next = Lifting::amplitudes(boundary, p.time(state.k + 1));
        let dt2 = p.dt * p.dt;

        // iteration-independent parts
        let mut rhs_p0 = div_u * (-p.rho_f / p.dt);
        rhs_p0 -= &self.pressure_l * &g_next;
        let history = &state.eta * 2.0 - &state.eta_prev;
        let mut rhs_e0 = &self.mass_e_n * history * (p.wall_inertia() / dt2);
        rhs_e0 += trac_u;
        rhs_e0 += &self.trac_l * &g_next;

        let mut p_j = state.p.clone();
        let mut g_j = state.g.clone();
        let mut eta_j = state.eta.clone();
        for j in 1..=p.max_implicit_iters {
            let dtt = (&eta_j - &state.eta * 2.0 + &state.eta_prev) / dt2;
            let mut rhs_p = rhs_p0.clone();
            rhs_p -= &self.mixed_n * dtt * p.rho_f;
            rhs_p += (&self.robin_n * &p_j + &self.robin_l * &g_j) * p.alpha_rob;
            let p_next = DVector::from_vec(self.pressure_factor.solve(rhs_p.as_slice()));

            let rhs_e = &rhs_e0 + &self.trac_p * &p_next;
            let eta_next = DVector::from_vec(self.structure_factor.solve(rhs_e.as_slice()));

            let rp = relative_increment(
                self.pressure_norm2(&(&p_next - &p_j), &(&g_next - &g_j))
                    .sqrt(),
                self.pressure_norm2(&p_next, &g_next).sqrt(),
            );
            let de = &eta_next - &eta_j;
            let re = relative_increment(
                de.dot(&(&self.gram_ee * &de)).max(0.0).sqrt(),
                eta_next.dot(&(&self.gram_ee * &eta_next)).max(0.0).sqrt(),
            );
            p_j = p_next;
            g_j = g_next.clone();
            eta_j = eta_next;
            if rp.min(re) < p.tol_implicit {
                return Ok((p_j, g_j, eta_j, j));
            }
        }
        Err(Error::NonConvergence {
            step: state.k + 1,
            max_iters: p.max_implicit_iters,
        })
    }

    /// Online time loop over all steps of `params`.
    pub fn online(&self, boundary: &BoundaryData) -> Result<RomTrajectory> {
        let factor = self.explicit_factor.as_ref().ok_or(Error::SingularSaddle {
            n_u: self.n_u(),
            n_lambda: self.n_lambda(),
        })?;
        let p = &self.params;
        let steps = p.steps;
        let (nu, np, ne, nl) = (self.n_u(), self.n_p(), self.n_eta(), self.n_lambda());
        let mut traj = RomTrajectory {
            variant: self.variant,
            velocity: DMatrix::zeros(nu, steps),
            pressure: DMatrix::zeros(np, steps),
            lifting: DMatrix::zeros(2, steps),
            displacement: DMatrix::zeros(ne, steps),
            multiplier: DMatrix::zeros(nl, steps),
            iterations: Vec::with_capacity(steps),
            t_explicit: Vec::with_capacity(steps),
            t_implicit: Vec::with_capacity(steps),
            constraint_residual: Vec::with_capacity(steps),
        };
        let mut state = RomState {
            k: 0,
            u: DVector::zeros(nu),
            p: DVector::zeros(np),
            g: Lifting::amplitudes(boundary, 0.0),
            eta: DVector::zeros(ne),
            eta_prev: DVector::zeros(ne),
            eta_prev2: DVector::zeros(ne),
        };
        for c in 0..steps {
            let t0 = Instant::now();
            let rate = (&state.eta - &state.eta_prev) / p.dt;
            let mut rhs = &self.mass_n * &state.u;
            rhs -= &self.grad_n * &state.p;
            rhs -= &self.grad_l * &state.g;
            let (u_new, lambda, div_u, trac_u, residual) = match self.variant {
                Variant::Rom1 => {
                    let mut full = DVector::zeros(nu + nl);
                    full.rows_mut(0, nu).copy_from(&rhs);
                    let data = &self.constraint_n * &rate;
                    full.rows_mut(nu, nl).copy_from(&data);
                    let sol = DVector::from_vec(factor.solve(full.as_slice()));
                    let u_new = sol.rows(0, nu).into_owned();
                    let lambda = sol.rows(nu, nl).into_owned();
                    let residual = (self.coupling_n.tr_mul(&u_new) - data).amax();
                    let div_u = &self.div_n * &u_new;
                    let trac_u = &self.trac_u * &u_new;
                    (u_new, lambda, div_u, trac_u, residual)
                }
                Variant::Rom2 => {
                    let rate_prev = (&state.eta_prev - &state.eta_prev2) / p.dt;
                    rhs += &self.mass_h * rate_prev;
                    rhs -= &self.explicit_h * &rate;
                    let z_new = DVector::from_vec(factor.solve(rhs.as_slice()));
                    let div_u = &self.div_n * &z_new + &self.div_h * &rate;
                    let trac_u = &self.trac_u * &z_new + &self.trac_h * &rate;
                    (z_new, DVector::zeros(0), div_u, trac_u, 0.0)
                }
            };
            let t_explicit = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let (p_new, g_new, eta_new, iters) =
                self.implicit_loop(&div_u, &trac_u, &state, boundary)?;
            let t_implicit = t1.elapsed().as_secs_f64();

            traj.velocity.set_column(c, &u_new);
            traj.pressure.set_column(c, &p_new);
            traj.lifting.set_column(c, &g_new);
            traj.displacement.set_column(c, &eta_new);
            if nl > 0 {
                traj.multiplier.set_column(c, &lambda);
            }
            traj.iterations.push(iters);
            traj.t_explicit.push(t_explicit);
            traj.t_implicit.push(t_implicit);
            traj.constraint_residual.push(residual);

            state = RomState {
                k: state.k + 1,
                u: u_new,
                p: p_new,
                g: g_new,
                eta_prev2: std::mem::replace(&mut state.eta_prev, DVector::zeros(0)),
                eta_prev: state.eta,
                eta: eta_new,
            };
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hifi::{HfSolver, Trajectory};
    use crate::meshfe::assembly::for_each_interface_point;
    use crate::meshfe::{build_mesh, build_system, EDGE_GAUSS3};
    use crate::pod::{compute_basis, InnerProduct};
    use crate::problem::default_params;
    use rand::{Rng, SeedableRng};

    fn short_params(steps: usize) -> PhysicalParams {
        let mut p = default_params();
        p.steps = steps;
        p.t_final = steps as f64 * p.dt;
        p
    }

    struct Setup {
        fe: FeSystem,
        params: PhysicalParams,
    }

    fn setup(nx: usize, ny: usize, steps: usize) -> Setup {
        let params = short_params(steps);
        let fe = build_system(build_mesh(nx, ny, params.length, params.h_f).unwrap());
        Setup { fe, params }
    }

    fn bases_from(
        s: &Setup,
        ops: &HfOperators,
        traj: &Trajectory,
        lifting: &Lifting,
        boundary: &BoundaryData,
        ext: &HarmonicExtension,
        n: usize,
    ) -> (RomBases, RomBases) {
        let ip = |f| InnerProduct::for_field(f, ops).unwrap();
        let sp0 = homogenize_pressure(&traj.p, lifting, boundary, &s.params);
        let zu = compute_basis(&traj.u, &ip(Field::Velocity), n)
            .unwrap()
            .modes;
        let zp = compute_basis(&sp0, &ip(Field::Pressure), n).unwrap().modes;
        let ze = compute_basis(&traj.eta, &ip(Field::Displacement), n)
            .unwrap()
            .modes;
        let zl = compute_basis(&traj.lambda, &ip(Field::Multiplier), n)
            .unwrap()
            .modes;
        let sz = z_snapshots(&traj.u, &traj.eta, &s.fe, ext, s.params.dt);
        let zz = compute_basis(&sz, &ip(Field::Auxiliary), n).unwrap().modes;
        (
            RomBases {
                velocity: zu,
                pressure: zp.clone(),
                displacement: ze.clone(),
                multiplier: Some(zl),
            },
            RomBases {
                velocity: zz,
                pressure: zp,
                displacement: ze,
                multiplier: None,
            },
        )
    }

    #[test]
    fn lifting_is_linear_on_rectangle() {
        let s = setup(12, 3, 5);
        let ops = HfOperators::assemble(&s.fe, &s.params);
        let lifting = Lifting::new(&s.fe, &ops).unwrap();
        for (v, x) in lifting.inlet().iter().zip(&s.fe.mesh.vertices) {
            assert!((v - (1.0 - x[0] / s.params.length)).abs() < 1e-10);
            assert!(*v >= 0.0 && *v <= 1.0 + 1e-10);
        }
        for v in s.fe.mesh.vertices_on(BoundaryTag::Inlet) {
            assert_eq!(lifting.inlet()[v], 1.0);
        }
        for v in s.fe.mesh.vertices_on(BoundaryTag::Outlet) {
            assert_eq!(lifting.inlet()[v], 0.0);
        }
    }

    #[test]
    fn homogenization_cases() {
        let s = setup(6, 2, 3);
        let ops = HfOperators::assemble(&s.fe, &s.params);
        let lifting = Lifting::new(&s.fe, &ops).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let sp = DMatrix::from_fn(s.fe.n_pressure(), 3, |_, _| rng.gen_range(-1.0..1.0));
        assert_eq!(
            homogenize_pressure(&sp, &lifting, &BoundaryData::zero(), &s.params),
            sp
        );

        let c = 7.5;
        let boundary = BoundaryData::new(move |_| c, |_| 0.0);
        let col = DMatrix::from_column_slice(s.fe.n_pressure(), 1, lifting.inlet()) * c;
        let h = homogenize_pressure(&col, &lifting, &boundary, &s.params);
        assert!(h.amax() < 1e-12);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("1".parse::<Variant>().unwrap(), Variant::Rom1);
        assert_eq!("2".parse::<Variant>().unwrap(), Variant::Rom2);
        assert!(matches!("3".parse::<Variant>(), Err(Error::Usage(_))));
    }

    #[test]
    fn projected_operators_match_fe_parents() {
        let s = setup(12, 2, 5);
        let ops = HfOperators::assemble(&s.fe, &s.params);
        let lifting = Lifting::new(&s.fe, &ops).unwrap();
        let ext = HarmonicExtension::new(&s.fe, &s.params).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut rand_mat =
            |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
        let ne = s.fe.n_displacement();
        // displacement modes vanish at the clamped ends
        let mut ze = rand_mat(ne, 3);
        ze.row_mut(0).fill(0.0);
        ze.row_mut(ne - 1).fill(0.0);
        let bases = RomBases {
            velocity: rand_mat(s.fe.n_velocity(), 4),
            pressure: rand_mat(s.fe.n_pressure(), 3),
            displacement: ze,
            multiplier: Some(rand_mat(ne, 2)),
        };
        let before = ext.solve_count();
        let m1 = ReducedModel::project_rom1(&bases, &s.fe, &ops, &lifting, &s.params).unwrap();
        let m2 =
            ReducedModel::project_rom2(&bases, &s.fe, &ops, &lifting, &ext, &s.params).unwrap();
        assert_eq!(ext.solve_count() - before, 3);

        let w = DVector::from_fn(4, |i, _| (i as f64 + 1.0).sin());
        let direct = bases.velocity.transpose()
            * DVector::from_vec(ops.mass_u.mul_vec((&bases.velocity * &w).as_slice()));
        let via = &m1.mass_n * &w;
        assert!((direct - &via).amax() <= 1e-12 * via.amax());

        let h = m2.ext_modes.as_ref().unwrap();
        let direct = bases.velocity.transpose()
            * DVector::from_vec(ops.explicit_lhs.mul_vec(h.column(1).as_slice()));
        assert!((direct - m2.explicit_h.column(1)).amax() <= 1e-12 * m2.explicit_h.amax());

        // a single FE column as basis picks a diagonal entry
        let mut e = DMatrix::zeros(s.fe.n_velocity(), 1);
        e[(17, 0)] = 1.0;
        let single = RomBases {
            velocity: e,
            ..bases.clone()
        };
        let m = ReducedModel::project_rom1(&single, &s.fe, &ops, &lifting, &s.params).unwrap();
        assert_eq!(m.mass_n[(0, 0)], ops.mass_u.get(17, 17));

        // coupling block against direct facet quadrature of lambda_m (phi_i . n)
        let zu = &bases.velocity;
        let zl = bases.multiplier.as_ref().unwrap();
        let mut oracle = DMatrix::zeros(4, 2);
        for_each_interface_point(&s.fe, EDGE_GAUSS3.points, EDGE_GAUSS3.weights, |q| {
            for i in 0..4 {
                let un: f64 = (0..3)
                    .map(|a| q.quad[a] * zu[(s.fe.trace_dof(q.dofs[a]), i)])
                    .sum();
                for m in 0..2 {
                    let lam: f64 = (0..3).map(|a| q.quad[a] * zl[(q.dofs[a], m)]).sum();
                    oracle[(i, m)] += q.w * lam * un;
                }
            }
        });
        assert!((oracle - &m1.coupling_n).amax() <= 1e-12 * m1.coupling_n.amax());

        let wrong = RomBases {
            pressure: rand_mat(5, 2),
            ..bases.clone()
        };
        assert!(matches!(
            ReducedModel::project_rom1(&wrong, &s.fe, &ops, &lifting, &s.params),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn reconstruction_cases() {
        let s = setup(6, 2, 3);
        let ops = HfOperators::assemble(&s.fe, &s.params);
        let lifting = Lifting::new(&s.fe, &ops).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let ne = s.fe.n_displacement();
        let mut ze = DMatrix::from_fn(ne, 2, |_, _| rng.gen_range(-1.0..1.0));
        ze.row_mut(0).fill(0.0);
        ze.row_mut(ne - 1).fill(0.0);
        let raw = DMatrix::from_fn(s.fe.n_pressure(), 3, |_, _| rng.gen_range(-1.0..1.0));
        let ip = InnerProduct::for_field(Field::Pressure, &ops).unwrap();
        let zp = compute_basis(&raw, &ip, 3).unwrap().modes;
        let bases = RomBases {
            velocity: DMatrix::from_fn(s.fe.n_velocity(), 2, |_, _| rng.gen_range(-1.0..1.0)),
            pressure: zp.clone(),
            displacement: ze,
            multiplier: Some(DMatrix::from_fn(ne, 2, |_, _| rng.gen_range(-1.0..1.0))),
        };
        let m = ReducedModel::project_rom1(&bases, &s.fe, &ops, &lifting, &s.params).unwrap();
        let zero = BoundaryData::zero();
        let p = m
            .reconstruct(Field::Pressure, &[0.0; 3], 0.001, &zero)
            .unwrap();
        assert!(p.iter().all(|v| *v == 0.0));
        let p = m
            .reconstruct(Field::Pressure, &[1.0, 0.0, 0.0], 0.001, &zero)
            .unwrap();
        assert_eq!(p, zp.column(0).iter().copied().collect::<Vec<_>>());
        // in-span round trip
        let target = &zp * DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let coeffs = m.project_field(Field::Pressure, &ops.mass_p, target.as_slice());
        let back = m.reconstruct(Field::Pressure, &coeffs, 0.0, &zero).unwrap();
        let diff: Vec<f64> = back.iter().zip(target.iter()).map(|(a, b)| a - b).collect();
        assert!(ip.norm(&diff) <= 1e-10 * ip.norm(target.as_slice()));
        assert!(m.reconstruct(Field::Pressure, &[1.0], 0.0, &zero).is_err());
    }

    #[test]
    fn zero_data_online_runs_are_zero() {
        let s = setup(12, 2, 20);
        let ops = HfOperators::assemble(&s.fe, &s.params);
        let lifting = Lifting::new(&s.fe, &ops).unwrap();
        let ext = HarmonicExtension::new(&s.fe, &s.params).unwrap();
        let reference = BoundaryData::reference();
        let traj = HfSolver::new(&s.fe, s.params.clone(), reference.clone())
            .unwrap()
            .run()
            .unwrap();
        let (b1, b2) = bases_from(&s, &ops, &traj, &lifting, &reference, &ext, 5);
        let zero = BoundaryData::zero();
        let m1 = ReducedModel::project_rom1(&b1, &s.fe, &ops, &lifting, &s.params).unwrap();
        let m2 = ReducedModel::project_rom2(&b2, &s.fe, &ops, &lifting, &ext, &s.params).unwrap();
        for m in [&m1, &m2] {
            let r = m.online(&zero).unwrap();
            assert!(r.iterations.iter().all(|&j| j == 1));
            for c in [&r.velocity, &r.pressure, &r.displacement, &r.lifting] {
                assert_eq!(c.amax(), 0.0);
            }
        }
    }

    #[test]
    fn z_snapshots_vanish_on_interface() {
        let s = setup(12, 2, 40);
        let reference = BoundaryData::reference();
        let traj = HfSolver::new(&s.fe, s.params.clone(), reference)
            .unwrap()
            .run()
            .unwrap();
        let ext = HarmonicExtension::new(&s.fe, &s.params).unwrap();
        let sz = z_snapshots(&traj.u, &traj.eta, &s.fe, &ext, s.params.dt);
        let scale = traj.u.amax();
        for c in 0..sz.ncols() {
            for &n in &s.fe.interface_nodes {
                assert!(sz[(2 * n, c)].abs() <= 1e-12 * scale);
                assert!(sz[(2 * n + 1, c)].abs() <= 1e-12 * scale);
            }
        }
        let flat = DMatrix::zeros(s.fe.n_displacement(), traj.u.ncols());
        assert_eq!(
            z_snapshots(&traj.u, &flat, &s.fe, &ext, s.params.dt),
            traj.u
        );
    }

    fn time_averaged_error(hf: &DMatrix<f64>, rom: &[Vec<f64>], x: &SparseMatrix) -> f64 {
        let mut sum = 0.0;
        let mut count = 0;
        let norms: Vec<f64> = (0..hf.ncols())
            .map(|c| crate::linalg::weighted_norm(x, hf.column(c).as_slice()))
            .collect();
        let max = norms.iter().cloned().fold(0.0, f64::max);
        for c in 0..hf.ncols() {
            if norms[c] < 1e-12 * max {
                continue;
            }
            let d: Vec<f64> = rom[c]
                .iter()
                .zip(hf.column(c).iter())
                .map(|(a, b)| a - b)
                .collect();
            sum += crate::linalg::weighted_norm(x, &d) / norms[c];
            count += 1;
        }
        sum / count as f64
    }

    #[test]
    fn full_rank_models_reproduce_short_trajectory() {
        let s = setup(12, 2, 60);
        let ops = HfOperators::assemble(&s.fe, &s.params);
        let lifting = Lifting::new(&s.fe, &ops).unwrap();
        let ext = HarmonicExtension::new(&s.fe, &s.params).unwrap();
        let reference = BoundaryData::reference();
        let mut params = s.params.clone();
        params.tol_implicit = 1e-12;
        let traj = HfSolver::new(&s.fe, params.clone(), reference.clone())
            .unwrap()
            .run()
            .unwrap();
        let s = Setup { fe: s.fe, params };
        let (b1, b2) = bases_from(&s, &ops, &traj, &lifting, &reference, &ext, 1000);
        let m2 = ReducedModel::project_rom2(&b2, &s.fe, &ops, &lifting, &ext, &s.params).unwrap();
        let r2 = m2.online(&reference).unwrap();
        let m1 = ReducedModel::project_rom1(&b1, &s.fe, &ops, &lifting, &s.params).unwrap();
        for (m, r) in [(&m2, &r2)] {
            let k = r.steps();
            let u: Vec<Vec<f64>> = (1..=k).map(|i| r.field(Field::Velocity, i, m)).collect();
            let p: Vec<Vec<f64>> = (1..=k).map(|i| r.field(Field::Pressure, i, m)).collect();
            let e: Vec<Vec<f64>> = (1..=k)
                .map(|i| r.field(Field::Displacement, i, m))
                .collect();
            let eu = time_averaged_error(&traj.u, &u, &ops.h1_u);
            let ep = time_averaged_error(&traj.p, &p, &ops.mass_p);
            let ee = time_averaged_error(&traj.eta, &e, &ops.stiffness_e);
            assert!(eu < 1e-6 && ep < 1e-6 && ee < 1e-6, "{eu} {ep} {ee}");
        }
        // the multiplier space is richer than the velocity traces, so the
        // full saddle is numerically singular and must say so
        if !m1.is_solvable() {
            assert!(matches!(
                m1.online(&reference),
                Err(Error::SingularSaddle { n_u, n_lambda }) if n_u == m1.n_u() && n_lambda == m1.n_lambda()
            ));
            assert!(m1.explicit_condition().is_infinite());
        }
        let few = RomBases {
            multiplier: b1.multiplier.as_ref().map(|z| z.columns(0, 2).into_owned()),
            ..b1.clone()
        };
        let m1 = ReducedModel::project_rom1(&few, &s.fe, &ops, &lifting, &s.params).unwrap();
        assert!(m1.is_solvable());
        let r1 = m1.online(&reference).unwrap();
        let scale = r1.velocity.amax().max(1.0);
        assert!(
            r1.constraint_residual.iter().all(|r| *r <= 1e-9 * scale),
            "{:?}",
            r1.constraint_residual
        );
        let k = r1.steps();
        let e: Vec<Vec<f64>> = (1..=k)
            .map(|i| r1.field(Field::Displacement, i, &m1))
            .collect();
        assert!(time_averaged_error(&traj.eta, &e, &ops.stiffness_e) < 0.1);
    }

    #[test]
    fn rom2_explicit_matrix_is_spd_and_bounded_by_fe_operator() {
        let s = setup(6, 2, 40);
        let ops = HfOperators::assemble(&s.fe, &s.params);
        let lifting = Lifting::new(&s.fe, &ops).unwrap();
        let ext = HarmonicExtension::new(&s.fe, &s.params).unwrap();
        let reference = BoundaryData::reference();
        let traj = HfSolver::new(&s.fe, s.params.clone(), reference.clone())
            .unwrap()
            .run()
            .unwrap();
        let (_, b2) = bases_from(&s, &ops, &traj, &lifting, &reference, &ext, 10);

        // FE explicit operator on velocities that vanish where the explicit step is constrained
        let mut fixed = vec![false; s.fe.n_velocity()];
        for n in s.fe.nodes_on(BoundaryTag::Interface) {
            fixed[2 * n] = true;
            fixed[2 * n + 1] = true;
        }
        for n in s.fe.nodes_on(BoundaryTag::Symmetry) {
            fixed[2 * n + 1] = true;
        }
        let free: Vec<usize> = (0..fixed.len()).filter(|&i| !fixed[i]).collect();
        let dense = ops.explicit_lhs.to_dense();
        let restricted = DMatrix::from_fn(free.len(), free.len(), |i, j| dense[(free[i], free[j])]);
        let eig = restricted.symmetric_eigen().eigenvalues;
        let kappa_fe = eig.max() / eig.min();

        for n in 1..=b2.velocity.ncols().min(10) {
            let m =
                ReducedModel::project_rom2(&b2.truncate(n), &s.fe, &ops, &lifting, &ext, &s.params)
                    .unwrap();
            let e = m.explicit_lhs.clone().symmetric_eigen().eigenvalues;
            assert!(e.min() > 0.0);
            assert!(
                (&m.explicit_lhs - m.explicit_lhs.transpose()).amax()
                    <= 1e-12 * m.explicit_lhs.amax()
            );
            assert!(
                m.explicit_condition() <= kappa_fe * (1.0 + 1e-8),
                "{} {}",
                m.explicit_condition(),
                kappa_fe
            );
        }
    }
}
