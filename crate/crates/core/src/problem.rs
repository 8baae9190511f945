//! Physical and discretization parameters of the channel/compliant-wall problem.
//!
//! Everything is kept in CGS units. [`PhysicalParams::default`] returns the
//! reference haemodynamics configuration (a 6 cm by 0.5 cm channel, K = 1300
//! steps of 1e-4 s).

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use ini::Ini;

use crate::error::{Error, Result};

/// Constitutive, geometric and time-discretization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Fluid density [g/cm^3].
    pub rho_f: f64,
    /// Dynamic viscosity [Poise].
    pub mu_f: f64,
    /// Wall density [g/cm^3].
    pub rho_s: f64,
    /// Wall thickness [cm].
    pub h_s: f64,
    /// Young modulus [dyn/cm^2].
    pub e_s: f64,
    /// Poisson ratio.
    pub nu_s: f64,
    /// Coefficient of the zeroth-order wall term.
    pub c0: f64,
    /// Coefficient of the second-derivative (tension) wall term.
    pub c1: f64,
    /// Channel length [cm].
    pub length: f64,
    /// Channel height [cm].
    pub h_f: f64,
    /// Robin coefficient of the pressure substep [1/cm].
    pub alpha_rob: f64,
    /// Time step [s].
    pub dt: f64,
    /// Final time [s].
    pub t_final: f64,
    /// Number of time steps.
    pub steps: usize,
    /// Relative-increment tolerance of the implicit loop.
    pub tol_implicit: f64,
    /// Iteration cap of the implicit loop.
    pub max_implicit_iters: usize,
}

/// Wall coefficients `(c0, c1)` from the elastic moduli.
pub fn derived_coeffs(e_s: f64, nu_s: f64, h_s: f64, h_f: f64) -> Result<(f64, f64)> {
    if !(e_s > 0.0 && h_s > 0.0 && h_f > 0.0) {
        return Err(Error::Parameter(format!(
            "E_s, h_s and h_f must be positive (got {e_s}, {h_s}, {h_f})"
        )));
    }
    if !(0.0..1.0).contains(&nu_s) {
        return Err(Error::Parameter(format!(
            "nu_s must lie in [0, 1) (got {nu_s})"
        )));
    }
    let c1 = h_s * e_s / (h_f * h_f * (1.0 - nu_s * nu_s));
    let c0 = h_s * e_s / (2.0 * (1.0 + nu_s));
    Ok((c0, c1))
}

/// Reference inlet pulse: `1e4 (1 - cos(2 pi t / 0.005))` for `t < 0.005`, zero afterwards.
pub fn inlet_pressure(t: f64) -> f64 {
    cosine_pulse(1.0e4, 0.005, t)
}

fn cosine_pulse(amplitude: f64, duration: f64, t: f64) -> f64 {
    if t < duration {
        amplitude * (1.0 - (2.0 * std::f64::consts::PI * t / duration).cos())
    } else {
        0.0
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        default_params()
    }
}

/// The reference parameter set.
pub fn default_params() -> PhysicalParams {
    let (rho_f, rho_s, h_s, e_s, nu_s, h_f) = (1.0, 1.1, 0.1, 0.75e6, 0.5, 0.5);
    let (c0, c1) = derived_coeffs(e_s, nu_s, h_s, h_f).expect("reference constants are valid");
    PhysicalParams {
        rho_f,
        mu_f: 0.035,
        rho_s,
        h_s,
        e_s,
        nu_s,
        c0,
        c1,
        length: 6.0,
        h_f,
        alpha_rob: rho_f / (rho_s * h_s),
        dt: 1.0e-4,
        t_final: 0.13,
        steps: 1300,
        tol_implicit: 1.0e-6,
        max_implicit_iters: 100,
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_f", self.rho_f),
            ("mu_f", self.mu_f),
            ("rho_s", self.rho_s),
            ("h_s", self.h_s),
            ("E_s", self.e_s),
            ("c0", self.c0),
            ("c1", self.c1),
            ("L", self.length),
            ("h_f", self.h_f),
            ("dt", self.dt),
            ("T_final", self.t_final),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive (got {value})"
                )));
            }
        }
        if !(self.nu_s > 0.0 && self.nu_s < 1.0) {
            return Err(Error::Parameter(format!(
                "nu_s must lie in (0, 1) (got {})",
                self.nu_s
            )));
        }
        if !(self.alpha_rob >= 0.0) {
            return Err(Error::Parameter(format!(
                "alpha_rob must be non-negative (got {})",
                self.alpha_rob
            )));
        }
        if self.steps == 0 || self.max_implicit_iters == 0 {
            return Err(Error::Parameter(
                "K and max_implicit_iters must be at least 1".into(),
            ));
        }
        let span = self.steps as f64 * self.dt;
        if ((span - self.t_final) / self.t_final).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "K * dt = {span} does not match T_final = {}",
                self.t_final
            )));
        }
        if !(self.tol_implicit > 0.0) {
            return Err(Error::Parameter("tol_implicit must be positive".into()));
        }
        Ok(())
    }

    /// Time of step `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Wall inertia coefficient `rho_s h_s`.
    pub fn wall_inertia(&self) -> f64 {
        self.rho_s * self.h_s
    }
}

type PressureFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Pressures prescribed on the inlet and outlet sections.
#[derive(Clone)]
pub struct BoundaryData {
    inlet: PressureFn,
    outlet: PressureFn,
    description: String,
}

impl BoundaryData {
    pub fn new(
        inlet: impl Fn(f64) -> f64 + Send + Sync + 'static,
        outlet: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            inlet: Arc::new(inlet),
            outlet: Arc::new(outlet),
            description: "custom".into(),
        }
    }

    /// Cosine pulse at the inlet, constant outlet pressure.
    pub fn pulse(amplitude: f64, duration: f64, outlet: f64) -> Self {
        Self {
            inlet: Arc::new(move |t| cosine_pulse(amplitude, duration, t)),
            outlet: Arc::new(move |_| outlet),
            description: format!(
                "pulse(amplitude={amplitude}, duration={duration}, outlet={outlet})"
            ),
        }
    }

    /// Reference data: the 1e4 dyn/cm^2 pulse of length 5 ms and a free outlet.
    pub fn reference() -> Self {
        Self::pulse(1.0e4, 0.005, 0.0)
    }

    pub fn zero() -> Self {
        Self::pulse(0.0, 0.005, 0.0)
    }

    pub fn p_in(&self, t: f64) -> f64 {
        (self.inlet)(t)
    }

    pub fn p_out(&self, t: f64) -> f64 {
        (self.outlet)(t)
    }
}

impl Default for BoundaryData {
    fn default() -> Self {
        Self::reference()
    }
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData")
            .field("kind", &self.description)
            .finish()
    }
}

/// A full run configuration: parameters, boundary data and mesh resolution.
#[derive(Debug, Clone)]
pub struct Config {
    pub params: PhysicalParams,
    pub boundary: BoundaryData,
    pub nx: usize,
    pub ny: usize,
    pub p_in_amplitude: f64,
    pub p_in_duration: f64,
    pub p_out: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            params: default_params(),
            boundary: BoundaryData::reference(),
            nx: 120,
            ny: 10,
            p_in_amplitude: 1.0e4,
            p_in_duration: 0.005,
            p_out: 0.0,
        }
    }
}

impl Config {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_ini_str(&text)
    }

    /// Parses an INI document with optional sections `[physics]`, `[time]`,
    /// `[solver]`, `[boundary]` and `[mesh]`. Missing keys keep reference values;
    /// `c0`, `c1` and `alpha_rob` are re-derived unless given explicitly.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Parse {
            line: e.line,
            message: e.msg.to_string(),
        })?;
        let known: &[(&str, &[&str])] = &[
            (
                "physics",
                &[
                    "rho_f",
                    "mu_f",
                    "rho_s",
                    "h_s",
                    "E_s",
                    "nu_s",
                    "c0",
                    "c1",
                    "L",
                    "h_f",
                    "alpha_rob",
                ],
            ),
            ("time", &["dt", "T_final", "K"]),
            ("solver", &["tol_implicit", "max_implicit_iters"]),
            ("boundary", &["p_in_amplitude", "p_in_duration", "p_out"]),
            ("mesh", &["nx", "ny"]),
        ];
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if props.iter().next().is_some() {
                    return Err(Error::Usage("keys outside of a section".into()));
                }
                continue;
            };
            let Some((_, keys)) = known.iter().find(|(s, _)| *s == section) else {
                return Err(Error::Usage(format!("unknown config section [{section}]")));
            };
            for (key, _) in props.iter() {
                if !keys.contains(&key) {
                    return Err(Error::Usage(format!("unknown key '{key}' in [{section}]")));
                }
            }
        }

        let get = |section: &str, key: &str| -> Result<Option<f64>> {
            match ini.get_from(Some(section), key) {
                None => Ok(None),
                Some(raw) => raw.trim().parse::<f64>().map(Some).map_err(|_| {
                    Error::Usage(format!("[{section}] {key} = '{raw}' is not a number"))
                }),
            }
        };
        let get_count = |section: &str, key: &str| -> Result<Option<usize>> {
            match ini.get_from(Some(section), key) {
                None => Ok(None),
                Some(raw) => raw.trim().parse::<usize>().map(Some).map_err(|_| {
                    Error::Usage(format!("[{section}] {key} = '{raw}' is not a count"))
                }),
            }
        };

        let mut cfg = Config::default();
        let p = &mut cfg.params;
        if let Some(v) = get("physics", "rho_f")? {
            p.rho_f = v;
        }
        if let Some(v) = get("physics", "mu_f")? {
            p.mu_f = v;
        }
        if let Some(v) = get("physics", "rho_s")? {
            p.rho_s = v;
        }
        if let Some(v) = get("physics", "h_s")? {
            p.h_s = v;
        }
        if let Some(v) = get("physics", "E_s")? {
            p.e_s = v;
        }
        if let Some(v) = get("physics", "nu_s")? {
            p.nu_s = v;
        }
        if let Some(v) = get("physics", "L")? {
            p.length = v;
        }
        if let Some(v) = get("physics", "h_f")? {
            p.h_f = v;
        }
        let (c0, c1) = derived_coeffs(p.e_s, p.nu_s, p.h_s, p.h_f)?;
        p.c0 = get("physics", "c0")?.unwrap_or(c0);
        p.c1 = get("physics", "c1")?.unwrap_or(c1);
        p.alpha_rob = get("physics", "alpha_rob")?.unwrap_or(p.rho_f / (p.rho_s * p.h_s));

        let dt = get("time", "dt")?;
        let t_final = get("time", "T_final")?;
        let steps = get_count("time", "K")?;
        if let Some(v) = dt {
            p.dt = v;
        }
        match (t_final, steps) {
            (Some(t), Some(k)) => {
                p.t_final = t;
                p.steps = k;
            }
            (Some(t), None) => {
                p.t_final = t;
                p.steps = (t / p.dt).round() as usize;
            }
            (None, Some(k)) => {
                p.steps = k;
                p.t_final = k as f64 * p.dt;
            }
            (None, None) => {
                p.t_final = p.steps as f64 * p.dt;
            }
        }
        if let Some(v) = get("solver", "tol_implicit")? {
            p.tol_implicit = v;
        }
        if let Some(v) = get_count("solver", "max_implicit_iters")? {
            p.max_implicit_iters = v;
        }
        p.validate()?;

        cfg.p_in_amplitude = get("boundary", "p_in_amplitude")?.unwrap_or(cfg.p_in_amplitude);
        cfg.p_in_duration = get("boundary", "p_in_duration")?.unwrap_or(cfg.p_in_duration);
        cfg.p_out = get("boundary", "p_out")?.unwrap_or(cfg.p_out);
        if !(cfg.p_in_duration > 0.0) {
            return Err(Error::Parameter("p_in_duration must be positive".into()));
        }
        cfg.boundary = BoundaryData::pulse(cfg.p_in_amplitude, cfg.p_in_duration, cfg.p_out);
        cfg.nx = get_count("mesh", "nx")?.unwrap_or(cfg.nx);
        cfg.ny = get_count("mesh", "ny")?.unwrap_or(cfg.ny);
        if cfg.nx == 0 || cfg.ny == 0 {
            return Err(Error::Parameter(
                "mesh cell counts must be at least 1".into(),
            ));
        }
        Ok(cfg)
    }

    /// Serializes every effective value, so the document round-trips through
    /// [`Config::from_ini_str`].
    pub fn to_ini_string(&self) -> String {
        let p = &self.params;
        format!(
            "[physics]\nrho_f = {}\nmu_f = {}\nrho_s = {}\nh_s = {}\nE_s = {}\nnu_s = {}\nc0 = {}\nc1 = {}\nL = {}\nh_f = {}\nalpha_rob = {}\n\n\
             [time]\ndt = {}\nT_final = {}\nK = {}\n\n\
             [solver]\ntol_implicit = {}\nmax_implicit_iters = {}\n\n\
             [boundary]\np_in_amplitude = {}\np_in_duration = {}\np_out = {}\n\n\
             [mesh]\nnx = {}\nny = {}\n",
            p.rho_f,
            p.mu_f,
            p.rho_s,
            p.h_s,
            p.e_s,
            p.nu_s,
            p.c0,
            p.c1,
            p.length,
            p.h_f,
            p.alpha_rob,
            p.dt,
            p.t_final,
            p.steps,
            p.tol_implicit,
            p.max_implicit_iters,
            self.p_in_amplitude,
            self.p_in_duration,
            self.p_out,
            self.nx,
            self.ny
        )
    }
}
