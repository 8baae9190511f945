//! The four subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use fsirom_core::analysis::{relative_errors, ErrorReport, PerfReport, ERROR_HEADER, PERF_HEADER};
use fsirom_core::hifi::{HfOperators, HfSolver, Trajectory};
use fsirom_core::io::{read_csv, write_csv};
use fsirom_core::meshfe::{build_mesh, build_system, FeSystem, Field, HarmonicExtension};
use fsirom_core::pod::{compute_basis, write_spectrum, InnerProduct, PodBasis};
use fsirom_core::problem::Config;
use fsirom_core::rom::{
    homogenize_pressure, z_snapshots, Lifting, ReducedModel, RomBases, Variant,
};
use fsirom_core::Error;

use crate::manifest::RunManifest;
use crate::svg::LineChart;

pub const CONFIG_FILE: &str = "config.ini";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// Some entries of a sweep failed; the rest were written.
    Partial,
}

/// Worker cap from `FSIROM_WORKERS`, if set.
pub fn worker_cap() -> Result<Option<usize>> {
    match std::env::var("FSIROM_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Usage(format!(
                "FSIROM_WORKERS must be a positive integer, got '{v}'"
            ))
            .into()),
        },
        Err(_) => Ok(None),
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_cap()? {
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn absolute(p: &Path) -> String {
    fs::canonicalize(p)
        .unwrap_or_else(|_| p.to_path_buf())
        .display()
        .to_string()
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

fn system_for(cfg: &Config) -> Result<FeSystem> {
    Ok(build_system(build_mesh(
        cfg.nx,
        cfg.ny,
        cfg.params.length,
        cfg.params.h_f,
    )?))
}

fn read_config(dir: &Path) -> Result<Config> {
    let path = dir.join(CONFIG_FILE);
    Config::from_file(&path).with_context(|| format!("reading {}", path.display()))
}

pub fn hf(config: Option<&Path>, out: &Path) -> Result<Status> {
    let t0 = Instant::now();
    let cfg = match config {
        Some(p) => Config::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => Config::default(),
    };
    create_out(out)?;
    let fe = system_for(&cfg)?;
    let traj = HfSolver::new(&fe, cfg.params.clone(), cfg.boundary.clone())?.run()?;
    traj.save(out)?;
    let ini = cfg.to_ini_string();
    fs::write(out.join(CONFIG_FILE), &ini)?;

    let mut m = RunManifest::new("hf", ini);
    if let Some(p) = config {
        m.input("config", absolute(p));
    }
    let files: Vec<String> = [
        "u.snap",
        "p.snap",
        "eta.snap",
        "lambda.snap",
        "trajectory.csv",
        "timing.csv",
        CONFIG_FILE,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    m.record_outputs(out, &files)?;
    m.wall_time_s = t0.elapsed().as_secs_f64();
    m.write(out)?;
    eprintln!(
        "hf: {} steps, {} velocity DOFs, {:.2} s",
        traj.steps(),
        fe.n_velocity(),
        traj.total_time()
    );
    Ok(Status::Complete)
}

pub fn pod(snapshots: &Path, n_max: usize, out: &Path) -> Result<Status> {
    let t0 = Instant::now();
    if n_max == 0 {
        return Err(Error::Usage("--n-max must be at least 1".into()).into());
    }
    let cfg = read_config(snapshots)?;
    let traj = Trajectory::load(snapshots, cfg.params.clone())?;
    create_out(out)?;
    let fe = system_for(&cfg)?;
    let ops = HfOperators::assemble(&fe, &cfg.params);
    let lifting = Lifting::new(&fe, &ops)?;
    let ext = HarmonicExtension::new(&fe, &cfg.params)?;
    let sp = homogenize_pressure(&traj.p, &lifting, &cfg.boundary, &cfg.params);
    let sz = z_snapshots(&traj.u, &traj.eta, &fe, &ext, cfg.params.dt);

    let jobs = [
        (Field::Velocity, &traj.u),
        (Field::Pressure, &sp),
        (Field::Displacement, &traj.eta),
        (Field::Multiplier, &traj.lambda),
        (Field::Auxiliary, &sz),
    ];
    let bases: Vec<PodBasis> = pool()?.install(|| {
        jobs.par_iter()
            .map(|(field, s)| compute_basis(s, &InnerProduct::for_field(*field, &ops)?, n_max))
            .collect::<std::result::Result<Vec<_>, Error>>()
    })?;
    let mut files = Vec::new();
    for b in &bases {
        b.save(out)?;
        files.push(format!("basis_{}.snap", b.field.name()));
    }
    let refs: Vec<&PodBasis> = bases.iter().collect();
    write_spectrum(&out.join("pod_spectrum.csv"), &refs)?;
    let ini = cfg.to_ini_string();
    fs::write(out.join(CONFIG_FILE), &ini)?;
    files.extend(["pod_spectrum.csv".to_string(), CONFIG_FILE.to_string()]);

    let mut m = RunManifest::new("pod", ini);
    m.input("snapshots", absolute(snapshots));
    m.input("n_max", n_max.to_string());
    m.record_outputs(out, &files)?;
    m.wall_time_s = t0.elapsed().as_secs_f64();
    m.write(out)?;
    for b in &bases {
        eprintln!(
            "pod: {:>6} {:>3} modes, first-mode energy {:.4}",
            b.field.name(),
            b.n_modes(),
            b.energy(1)
        );
    }
    Ok(Status::Complete)
}

/// Parses `N` or an inclusive range `start:stop:step`.
pub fn parse_n_list(spec: &str) -> Result<Vec<usize>, Error> {
    let bad = || {
        Error::Usage(format!(
            "--n expects an integer or start:stop:step, got '{spec}'"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let list: Vec<usize> = match nums.as_slice() {
        [n] => vec![*n],
        [a, b, s] if *s > 0 && a <= b => (*a..=*b).step_by(*s).collect(),
        _ => return Err(bad()),
    };
    if list.contains(&0) {
        return Err(Error::Usage("mode counts must be at least 1".into()));
    }
    Ok(list)
}

/// Replaces rows keyed by their first two fields and rewrites the file sorted by key.
fn merge_rows(path: &Path, header: &str, new_rows: &[String]) -> Result<()> {
    let key = |row: &str| -> (u64, u64) {
        let mut it = row.split(',');
        let a = it.next().and_then(|v| v.parse().ok()).unwrap_or(0);
        let b = it.next().and_then(|v| v.parse().ok()).unwrap_or(0);
        (a, b)
    };
    let mut rows: BTreeMap<(u64, u64), String> = BTreeMap::new();
    if path.exists() {
        let (existing_header, existing) = read_csv(path)?;
        if existing_header.join(",") != header {
            return Err(anyhow!("{}: unexpected header", path.display()));
        }
        for r in existing {
            let line = r.join(",");
            rows.insert(key(&line), line);
        }
    }
    for r in new_rows {
        rows.insert(key(r), r.clone());
    }
    let all: Vec<String> = rows.into_values().collect();
    write_csv(path, header, &all)?;
    Ok(())
}

pub struct RomArgs<'a> {
    pub variant: &'a str,
    pub n: &'a str,
    pub basis: &'a Path,
    pub out: &'a Path,
    pub timed: bool,
    pub save_reduced: bool,
}

pub fn rom(args: &RomArgs) -> Result<Status> {
    let t0 = Instant::now();
    let variant = Variant::from_str(args.variant)?;
    let ns = parse_n_list(args.n)?;
    let basis_manifest = RunManifest::read(args.basis)?;
    basis_manifest
        .verify(args.basis)
        .with_context(|| format!("{} changed since it was written", args.basis.display()))?;
    let snapshots = PathBuf::from(basis_manifest.inputs.get("snapshots").ok_or_else(|| {
        anyhow!(
            "{}: manifest does not name the snapshot directory",
            args.basis.display()
        )
    })?);
    let cfg = read_config(args.basis)?;
    let hf = Trajectory::load(&snapshots, cfg.params.clone())?;
    let fe = system_for(&cfg)?;
    let ops = HfOperators::assemble(&fe, &cfg.params);
    let lifting = Lifting::new(&fe, &ops)?;
    let ext = match variant {
        Variant::Rom1 => None,
        Variant::Rom2 => Some(HarmonicExtension::new(&fe, &cfg.params)?),
    };
    let load = |f| PodBasis::load(args.basis, f).map(|b| b.modes);
    let full = match variant {
        Variant::Rom1 => RomBases {
            velocity: load(Field::Velocity)?,
            pressure: load(Field::Pressure)?,
            displacement: load(Field::Displacement)?,
            multiplier: Some(load(Field::Multiplier)?),
        },
        Variant::Rom2 => RomBases {
            velocity: load(Field::Auxiliary)?,
            pressure: load(Field::Pressure)?,
            displacement: load(Field::Displacement)?,
            multiplier: None,
        },
    };
    let hf_total = hf.total_time();

    let run_one =
        |n: usize| -> std::result::Result<(ErrorReport, PerfReport, ReducedModel), Error> {
            let bases = full.truncate(n);
            let model = match &ext {
                None => ReducedModel::project_rom1(&bases, &fe, &ops, &lifting, &cfg.params)?,
                Some(ext) => {
                    ReducedModel::project_rom2(&bases, &fe, &ops, &lifting, ext, &cfg.params)?
                }
            };
            let traj = model.online(&cfg.boundary)?;
            let errors = relative_errors(&hf, &traj, &model, &fe, &ops, n)?;
            let perf = PerfReport::new(&model, &traj, n, hf_total);
            Ok((errors, perf, model))
        };
    let results: Vec<_> = if args.timed {
        ns.iter().map(|&n| run_one(n)).collect()
    } else {
        pool()?.install(|| ns.par_iter().map(|&n| run_one(n)).collect())
    };

    create_out(args.out)?;
    let (mut err_rows, mut perf_rows, mut files) = (Vec::new(), Vec::new(), Vec::new());
    let mut status = Status::Complete;
    for (&n, r) in ns.iter().zip(results) {
        match r {
            Ok((e, p, model)) => {
                eprintln!(
                    "rom {variant} N = {n}: err_u {:.3e} err_p {:.3e} err_eta {:.3e} it_avg {:.2} speedup {:.1}",
                    e.u.mean, e.p.mean, e.eta.mean, p.it_avg, p.speedup_total
                );
                err_rows.push(e.csv_row());
                perf_rows.push(p.csv_row());
                if args.save_reduced {
                    let dir = format!("reduced_v{variant}_N{n}");
                    model.save(&args.out.join(&dir))?;
                    for entry in fs::read_dir(args.out.join(&dir))? {
                        let name = entry?.file_name().to_string_lossy().to_string();
                        files.push(format!("{dir}/{name}"));
                    }
                }
            }
            Err(e) => {
                eprintln!("rom {variant} N = {n}: {e}");
                status = Status::Partial;
            }
        }
    }
    merge_rows(&args.out.join("rom_error.csv"), ERROR_HEADER, &err_rows)?;
    merge_rows(&args.out.join("rom_perf.csv"), PERF_HEADER, &perf_rows)?;
    files.extend(["rom_error.csv".to_string(), "rom_perf.csv".to_string()]);

    let mut m = RunManifest::new("rom", cfg.to_ini_string());
    m.input("basis", absolute(args.basis));
    m.input("snapshots", snapshots.display().to_string());
    m.input("variant", variant.to_string());
    m.input("n", args.n);
    m.input("timed", args.timed.to_string());
    m.record_outputs(args.out, &files)?;
    m.wall_time_s = t0.elapsed().as_secs_f64();
    m.write(args.out)?;
    Ok(status)
}

/// Rows of a CSV as named columns; a zero-length file counts as empty.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    path: PathBuf,
}

impl Table {
    fn read(path: &Path) -> Result<Option<Table>> {
        if !path.exists() {
            return Ok(None);
        }
        if fs::metadata(path)?.len() == 0 {
            return Ok(Some(Table {
                header: Vec::new(),
                rows: Vec::new(),
                path: path.to_path_buf(),
            }));
        }
        let (header, rows) = read_csv(path)?;
        Ok(Some(Table {
            header,
            rows,
            path: path.to_path_buf(),
        }))
    }

    fn column(&self, name: &str) -> Result<usize, Error> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("{}: missing column '{name}'", self.path.display()),
            })
    }

    fn number(&self, row: usize, col: usize) -> Result<f64, Error> {
        self.rows[row][col]
            .trim()
            .parse()
            .map_err(|_| Error::Parse {
                line: row + 2,
                message: format!(
                    "{}: '{}' is not a number",
                    self.path.display(),
                    self.rows[row][col]
                ),
            })
    }

    /// `(x, y)` series grouped by the value of `group`, in first-seen order.
    fn series(
        &self,
        group: &str,
        x: &str,
        y: &str,
    ) -> Result<Vec<(String, Vec<(f64, f64)>)>, Error> {
        if self.rows.is_empty() {
            return Ok(Vec::new());
        }
        let (g, xi, yi) = (self.column(group)?, self.column(x)?, self.column(y)?);
        let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for r in 0..self.rows.len() {
            let key = self.rows[r][g].clone();
            let point = (self.number(r, xi)?, self.number(r, yi)?);
            match out.iter_mut().find(|(k, _)| *k == key) {
                Some((_, pts)) => pts.push(point),
                None => out.push((key, vec![point])),
            }
        }
        Ok(out)
    }
}

fn chart(
    table: &Table,
    group: &str,
    label: &dyn Fn(&str, &str) -> String,
    x: &str,
    ys: &[&str],
    mut c: LineChart,
) -> Result<LineChart> {
    for y in ys {
        for (g, pts) in table.series(group, x, y)? {
            c.add(&label(&g, y), pts);
        }
    }
    Ok(c)
}

pub fn plot(input: &Path, out: &Path) -> Result<Status> {
    let t0 = Instant::now();
    let spectrum = Table::read(&input.join("pod_spectrum.csv"))?;
    let errors = Table::read(&input.join("rom_error.csv"))?;
    let perf = Table::read(&input.join("rom_perf.csv"))?;
    if spectrum.is_none() && errors.is_none() && perf.is_none() {
        return Err(anyhow!(
            "{}: none of pod_spectrum.csv, rom_error.csv, rom_perf.csv found",
            input.display()
        ));
    }
    let mut charts: Vec<(&str, LineChart)> = Vec::new();
    let by_field = |g: &str, _: &str| g.to_string();
    let by_variant = |g: &str, y: &str| format!("ROM {g} {y}");
    if let Some(t) = &spectrum {
        charts.push((
            "spectrum.svg",
            chart(
                t,
                "field",
                &by_field,
                "index",
                &["sigma"],
                LineChart::new("POD singular values", "index", "sigma", true),
            )?,
        ));
        charts.push((
            "energy.svg",
            chart(
                t,
                "field",
                &by_field,
                "index",
                &["cumulative_energy"],
                LineChart::new("POD retained energy", "N", "retained energy", false),
            )?,
        ));
    }
    if let Some(t) = &errors {
        charts.push((
            "errors.svg",
            chart(
                t,
                "variant",
                &by_variant,
                "N",
                &["err_u", "err_p", "err_eta"],
                LineChart::new("Relative errors", "N", "time-averaged relative error", true),
            )?,
        ));
        charts.push((
            "stress.svg",
            chart(
                t,
                "variant",
                &by_variant,
                "N",
                &["err_stress"],
                LineChart::new("Interface stress error", "N", "relative L2 error", true),
            )?,
        ));
    }
    if let Some(t) = &perf {
        charts.push((
            "condition.svg",
            chart(
                t,
                "variant",
                &by_variant,
                "N",
                &["cond_explicit"],
                LineChart::new(
                    "Condition number of explicit step",
                    "N",
                    "condition number",
                    true,
                ),
            )?,
        ));
        charts.push((
            "iterations.svg",
            chart(
                t,
                "variant",
                &by_variant,
                "N",
                &["it_max", "it_avg"],
                LineChart::new("Implicit step iterations", "N", "iterations", false),
            )?,
        ));
        charts.push((
            "speedup.svg",
            chart(
                t,
                "variant",
                &by_variant,
                "N",
                &["speedup_total"],
                LineChart::new("Speedup", "N", "speedup", true),
            )?,
        ));
    }
    create_out(out)?;
    let mut files = Vec::new();
    for (name, c) in &charts {
        fs::write(out.join(name), c.render())?;
        files.push(name.to_string());
    }
    let mut m = RunManifest::new("plot", String::new());
    m.input("in", absolute(input));
    m.record_outputs(out, &files)?;
    m.wall_time_s = t0.elapsed().as_secs_f64();
    m.write(out)?;
    Ok(Status::Complete)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_list_parsing() {
        assert_eq!(parse_n_list("30").unwrap(), vec![30]);
        assert_eq!(parse_n_list("2:50:2").unwrap().len(), 25);
        assert_eq!(parse_n_list("10:50:10").unwrap(), vec![10, 20, 30, 40, 50]);
        assert_eq!(parse_n_list("5:5:1").unwrap(), vec![5]);
        for bad in ["", "a", "0", "1:2", "5:1:1", "1:5:0", "0:4:2"] {
            assert!(matches!(parse_n_list(bad), Err(Error::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn rows_merge_by_key() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        merge_rows(&p, "variant,N,v", &["2,10,a".into(), "1,10,b".into()]).unwrap();
        merge_rows(&p, "variant,N,v", &["2,10,c".into(), "2,4,d".into()]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "variant,N,v\n1,10,b\n2,4,d\n2,10,c\n");
        assert!(merge_rows(&p, "other,header", &[]).is_err());
    }
}
