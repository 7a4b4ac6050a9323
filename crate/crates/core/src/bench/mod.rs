//! Plant files, the random plant generator, synthesis runs with verification,
//! batch tables, and the command-line front end.

pub mod cli;
pub mod gen;
pub mod plant_file;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{verify_synthesis, Claims, Mode, VerificationReport};
use crate::error::{Error, Result};
use crate::icp::{IcpConfig, IcpResult, IcpStatus, InvariantReport, KktResidual};
use crate::sof::{synthesize_hinf, synthesize_mixed, synthesize_sa, Controller, Plant};

pub use gen::{generate, write_plants, GenConfig};
pub use plant_file::{load_plant, save_plant, PlantFile};
pub use table::{render_csv, render_text};

/// What to synthesise and with which outer-loop settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSettings {
    pub mode: Mode,
    /// H∞ level of the mixed problem; `None` is pure H2.
    pub gamma: Option<f64>,
    pub icp: IcpConfig,
    #[serde(skip)]
    pub f0: Option<Controller>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings { mode: Mode::Sa, gamma: None, icp: IcpConfig::default(), f0: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceEntry {
    pub k: usize,
    pub objective: f64,
    pub step: f64,
    pub ipm_iters: usize,
    pub corrections: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub total_s: f64,
    pub per_iteration_s: Vec<f64>,
}

/// The result file of one synthesis run. Everything except `timing` is
/// deterministic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthOutcome {
    pub plant: String,
    pub mode: Mode,
    pub gamma: Option<f64>,
    pub status: IcpStatus,
    pub iterations: usize,
    pub alpha0_open: f64,
    pub controller: Controller,
    /// `β`, `γ` or `trace(Z)`.
    pub objective: f64,
    /// The same quantity at the Phase-1 point.
    pub start_objective: f64,
    pub claims: Claims,
    pub trace: Vec<TraceEntry>,
    pub invariants: InvariantReport,
    pub kkt: KktResidual,
    pub failure: Option<String>,
    pub verification: VerificationReport,
    pub timing: Timing,
}

impl SynthOutcome {
    pub fn accepted(&self) -> bool {
        self.verification.passed && matches!(self.status, s if s.converged() || s == IcpStatus::MaxIters)
    }

    /// `0` for an accepted run, `3` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.accepted() {
            0
        } else {
            3
        }
    }
}

/// Exit code for an error: `1` for bad input, `2` for infeasibility, `3`
/// for numerical trouble.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Infeasible(_) => 2,
        Error::NumericalFailure(_) | Error::Precondition(_) => 3,
        _ => 1,
    }
}

fn trace_of(r: &IcpResult) -> Vec<TraceEntry> {
    r.records
        .iter()
        .map(|rec| TraceEntry {
            k: rec.k,
            objective: rec.objective,
            step: rec.step,
            ipm_iters: rec.ipm_iters,
            corrections: rec.corrections,
        })
        .collect()
}

pub fn run_synthesis(plant: &Plant, s: &SynthSettings) -> Result<SynthOutcome> {
    let clock = Instant::now();
    let f0 = s.f0.as_ref();
    let (controller, objective, start_objective, claims, result) = match s.mode {
        Mode::Sa => {
            let r = synthesize_sa(plant, f0, &s.icp)?;
            (r.controller, r.beta, r.beta0, Claims::Sa { beta: r.beta }, r.result)
        }
        Mode::Hinf => {
            let r = synthesize_hinf(plant, f0, &s.icp)?;
            (r.controller, r.gamma, r.gamma0, Claims::Hinf { gamma: r.gamma }, r.result)
        }
        Mode::Mixed => {
            let r = synthesize_mixed(plant, s.gamma, f0, &s.icp)?;
            let claims = Claims::Mixed { gamma: s.gamma, trace_z: r.trace_z };
            (r.controller, r.trace_z, r.trace_z0, claims, r.result)
        }
    };
    let verification = verify_synthesis(plant, &controller, &claims)?;
    Ok(SynthOutcome {
        plant: plant.name.clone(),
        mode: s.mode,
        gamma: if s.mode == Mode::Mixed { s.gamma } else { None },
        status: result.status,
        iterations: result.iterations(),
        alpha0_open: plant.open_loop_abscissa()?,
        controller,
        objective,
        start_objective,
        claims,
        trace: trace_of(&result),
        invariants: result.invariants.clone(),
        kkt: result.kkt,
        failure: result.failure.clone(),
        verification,
        timing: Timing {
            total_s: clock.elapsed().as_secs_f64(),
            per_iteration_s: result.records.iter().map(|r| r.time_s).collect(),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
    Infeasible,
    NumericalFailure,
    Unverified,
    Error,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max_iters",
            RunStatus::Infeasible => "infeasible",
            RunStatus::NumericalFailure => "numerical_failure",
            RunStatus::Unverified => "unverified",
            RunStatus::Error => "error",
        }
    }
}

/// One table row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub mode: Mode,
    pub alpha0_a: Option<f64>,
    /// Values for [`metric_columns`] of the mode.
    pub metrics: Vec<Option<f64>>,
    pub iter: Option<usize>,
    pub time_s: f64,
    pub status: RunStatus,
    pub message: Option<String>,
    pub verification: Option<VerificationReport>,
}

pub fn metric_columns(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::Sa => &["alpha0_AF"],
        Mode::Hinf => &["gamma", "hinf"],
        Mode::Mixed => &["trace_Z", "h2", "hinf"],
    }
}

impl RunRecord {
    pub fn from_outcome(o: &SynthOutcome) -> Self {
        let v = &o.verification;
        let metrics = match o.mode {
            Mode::Sa => vec![Some(v.alpha_closed)],
            Mode::Hinf => vec![Some(o.objective), v.hinf],
            Mode::Mixed => vec![Some(o.objective), v.h2, v.hinf],
        };
        let status = if !v.passed {
            RunStatus::Unverified
        } else if o.status.converged() {
            RunStatus::Converged
        } else if o.status == IcpStatus::MaxIters {
            RunStatus::MaxIters
        } else {
            RunStatus::NumericalFailure
        };
        RunRecord {
            name: o.plant.clone(),
            mode: o.mode,
            alpha0_a: Some(o.alpha0_open),
            metrics,
            iter: Some(o.iterations),
            time_s: o.timing.total_s,
            status,
            message: o.failure.clone(),
            verification: Some(v.clone()),
        }
    }

    pub fn failed(name: &str, mode: Mode, alpha0_a: Option<f64>, err: &Error, time_s: f64) -> Self {
        let status = match exit_code_for(err) {
            2 => RunStatus::Infeasible,
            3 => RunStatus::NumericalFailure,
            _ => RunStatus::Error,
        };
        RunRecord {
            name: name.to_string(),
            mode,
            alpha0_a,
            metrics: vec![None; metric_columns(mode).len()],
            iter: None,
            time_s,
            status,
            message: Some(err.to_string()),
            verification: None,
        }
    }
}

fn run_file(path: &Path, s: &SynthSettings) -> RunRecord {
    let clock = Instant::now();
    let stem = path.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_default();
    let plant = match load_plant(path) {
        Ok(p) => p,
        Err(e) => return RunRecord::failed(&stem, s.mode, None, &e, clock.elapsed().as_secs_f64()),
    };
    match run_synthesis(&plant, s) {
        Ok(o) => RunRecord::from_outcome(&o),
        Err(e) => {
            let alpha = plant.open_loop_abscissa().ok();
            RunRecord::failed(&plant.name, s.mode, alpha, &e, clock.elapsed().as_secs_f64())
        }
    }
}

/// The `*.json` files of a directory, sorted.
pub fn plant_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every plant file of `dir` in parallel. Failures become rows; rows are
/// ordered by name.
pub fn bench_dir(dir: &Path, s: &SynthSettings) -> Result<Vec<RunRecord>> {
    let files = plant_files(dir)?;
    let mut rows: Vec<RunRecord> = files.par_iter().map(|p| run_file(p, s)).collect();
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(rows)
}
