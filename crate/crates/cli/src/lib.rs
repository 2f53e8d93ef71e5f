//! Scenario runner behind the `lidskii` binary: builds a fixture, its
//! contour and series solution, runs the requested checks and writes
//! `report.json` plus one CSV per check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod report;
pub mod scenario;

use std::path::{Path, PathBuf};

use lidskii_core::contour::{build_contour, DEFAULT_TARGET_TAIL};
use lidskii_core::evolution::{solve_cauchy_with, SolveOptions};
use lidskii_core::fixtures::{admissible_phi, generate_kind, FixtureKind};
use rayon::prelude::*;
use thiserror::Error;

use crate::checks::Context;
use crate::report::{compare, CheckReport, Golden, Report, Tolerance};
use crate::scenario::{Check, FixtureSource, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] lidskii_core::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_ERROR
    }
}

/// Checks written by `gen`. `initial` is left out: its `1e-6` threshold is
/// below `t‖Wh‖` at the last probe time for most fixtures.
pub const DEFAULT_CHECKS: [Check; 6] = [
    Check::Residue,
    Check::Grouping,
    Check::Ode,
    Check::Contraction,
    Check::Tails,
    Check::Stats,
];

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's `output_dir`.
    pub out_dir: Option<PathBuf>,
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// Runs the scenario in memory. Setup failures past fixture construction
/// (contour geometry, solver preconditions) become a failing `setup` entry.
pub fn evaluate_scenario(s: &Scenario, parallel: bool) -> Result<(Report, Vec<(String, String)>), CliError> {
    let (b, sys) = s.build_fixture()?;
    let h = s.initial_vector(b.dim())?;
    let t_grid = s.sorted_t_grid();
    let setup = || -> Result<Context, lidskii_core::Error> {
        let spec = build_contour(&b, &s.phi, s.theta, s.varsigma(), t_grid[0], DEFAULT_TARGET_TAIL)?;
        let solution = solve_cauchy_with(&b, &sys, &s.phi, &h, &spec, &SolveOptions::default())?;
        Ok(Context {
            b: b.clone(),
            sys: sys.clone(),
            phi: s.phi.clone(),
            spec,
            solution,
            h: h.clone(),
            t_grid: t_grid.clone(),
            parallel,
        })
    };
    let ctx = match setup() {
        Ok(c) => c,
        Err(e) => {
            let mut r = CheckReport::new("setup");
            r.fail_with(&e);
            return Ok((Report::new(&s.name, vec![r]), Vec::new()));
        }
    };
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for &check in &s.checks {
        let out = ctx.run(check);
        reports.push(out.report);
        files.extend(out.files);
    }
    Ok((Report::new(&s.name, reports), files))
}

fn resolve_out_dir(s: &Scenario, path: &Path, opts: &RunOptions) -> PathBuf {
    if let Some(d) = &opts.out_dir {
        return d.clone();
    }
    match &s.output_dir {
        Some(d) if Path::new(d).is_absolute() => PathBuf::from(d),
        Some(d) => path.parent().unwrap_or(Path::new(".")).join(d),
        None => PathBuf::from("out").join(&s.name),
    }
}

pub fn write_outputs(dir: &Path, report: &Report, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    std::fs::write(dir.join("report.json"), report.to_json())?;
    Ok(())
}

/// `run <scenario.json>`.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let s = Scenario::load(path)?;
    let (report, files) = evaluate_scenario(&s, opts.parallel)?;
    let out_dir = resolve_out_dir(&s, path, opts);
    write_outputs(&out_dir, &report, &files)?;
    Ok(RunOutcome { report, out_dir })
}

/// Scenario skeleton for a seeded fixture.
pub fn generate_scenario(kind: FixtureKind, dim: usize, seed: u64) -> Result<Scenario, CliError> {
    let f = generate_kind(kind, dim, seed)?;
    let (_, phi) = admissible_phi(f.theta, 0)
        .ok_or_else(|| lidskii_core::Error::PreconditionFailed("no admissible phi".into()))?;
    Ok(Scenario {
        name: format!("{}-{dim}-{seed}", kind.name()),
        fixture: FixtureSource::Recipe(f.recipe),
        phi,
        theta: f.theta,
        varsigma: None,
        t_grid: vec![0.01, 0.1, 1.0],
        checks: DEFAULT_CHECKS.into_iter().collect(),
        h: None,
        h_seed: seed,
        output_dir: None,
    })
}

/// `gen --kind K --dim N --seed S --out P`.
pub fn generate_fixture(kind: &str, dim: usize, seed: u64, out: &Path) -> Result<Scenario, CliError> {
    let kind = FixtureKind::parse(kind).map_err(|e| CliError::Parse(e.to_string()))?;
    let s = generate_scenario(kind, dim, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, s.to_json())?;
    Ok(s)
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    /// Overrides the relative tolerance declared in each golden.
    pub tol: Option<f64>,
    pub parallel: bool,
    /// Where regenerated reports go; defaults to a temporary directory.
    pub out_dir: Option<PathBuf>,
    /// Rewrite goldens from the current run instead of comparing.
    pub bless: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyEntry {
    pub name: String,
    pub pass: bool,
    pub diffs: Vec<String>,
}

pub fn golden_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join("golden").join(format!("{stem}.json"))
}

/// Scenario files directly inside `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn verify_one(dir: &Path, path: &Path, out_root: &Path, opts: &VerifyOptions) -> Result<VerifyEntry, CliError> {
    let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
    let s = Scenario::load(path)?;
    let (report, files) = evaluate_scenario(&s, opts.parallel)?;
    write_outputs(&out_root.join(&stem), &report, &files)?;
    let gpath = golden_path(dir, &stem);
    if opts.bless {
        let tolerance = match std::fs::read_to_string(&gpath) {
            Ok(text) => serde_json::from_str::<Golden>(&text).map(|g| g.tolerance).unwrap_or_default(),
            Err(_) => Tolerance::default(),
        };
        std::fs::create_dir_all(gpath.parent().unwrap())?;
        let golden = Golden { tolerance, report };
        std::fs::write(&gpath, serde_json::to_string_pretty(&golden).unwrap() + "\n")?;
        return Ok(VerifyEntry {
            name: stem,
            pass: true,
            diffs: Vec::new(),
        });
    }
    let diffs = match std::fs::read_to_string(&gpath) {
        Err(_) => vec![format!("missing golden {}", gpath.display())],
        Ok(text) => {
            let golden: Golden =
                serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", gpath.display())))?;
            let mut tol = golden.tolerance;
            if let Some(rel) = opts.tol {
                tol.rel = rel;
            }
            compare(&report, &golden.report, &tol)
        }
    };
    Ok(VerifyEntry {
        name: stem,
        pass: diffs.is_empty(),
        diffs,
    })
}

/// `verify-all <dir>`: reruns every scenario in `dir` and compares with
/// `dir/golden/<stem>.json`.
pub fn verify_all(dir: &Path, opts: &VerifyOptions) -> Result<Vec<VerifyEntry>, CliError> {
    let files = scenario_files(dir)?;
    if files.is_empty() {
        return Err(CliError::Io(format!("no scenario files in {}", dir.display())));
    }
    let out_root = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| std::env::temp_dir().join(format!("lidskii-verify-{}", std::process::id())));
    if opts.parallel {
        files.par_iter().map(|p| verify_one(dir, p, &out_root, opts)).collect()
    } else {
        files.iter().map(|p| verify_one(dir, p, &out_root, opts)).collect()
    }
}
