//! The `bmi` command line: `synth`, `bench`, `gen` and `verify`.
//!
//! Exit codes: `0` success, `1` malformed input or unsupported structure,
//! `2` infeasible, `3` numerical or verification failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analysis::{verify_synthesis, Claims, Mode};
use crate::error::{Error, Result};
use crate::sof::Controller;

use super::{
    bench_dir, exit_code_for, load_plant, render_csv, render_text, run_synthesis, write_plants, GenConfig,
    SynthSettings,
};

#[derive(Parser, Debug)]
#[command(name = "bmi", version, about = "Static output feedback synthesis by inner convex approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesise a controller for one plant and write the result as JSON
    Synth {
        /// Plant file
        plant: PathBuf,
        #[command(flatten)]
        opts: SynthOpts,
        /// Starting gain: a controller file or a previous result file
        #[arg(long)]
        f0: Option<PathBuf>,
        /// Result file
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run every plant file of a directory and print a table
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        opts: SynthOpts,
        /// Also write the table as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Format of the table on stdout
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Generate random plant files
    Gen(GenOpts),
    /// Re-check a result file against its plant
    Verify {
        plant: PathBuf,
        result: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args, Debug)]
struct SynthOpts {
    /// sa, hinf or mixed
    #[arg(long)]
    mode: Option<Mode>,
    /// H-infinity level for mixed synthesis (omit for pure H2)
    #[arg(long)]
    gamma: Option<f64>,
    /// Proximal weight
    #[arg(long)]
    rho: Option<f64>,
    /// Strictness margin
    #[arg(long)]
    eps: Option<f64>,
    /// Maximum outer iterations
    #[arg(long)]
    max_iters: Option<usize>,
    /// Seed of the runtime invariant sampling
    #[arg(long)]
    seed: Option<u64>,
    /// JSON settings file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SynthOpts {
    fn settings(&self) -> Result<SynthSettings> {
        let mut s = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            None => SynthSettings::default(),
        };
        if let Some(m) = self.mode {
            s.mode = m;
        }
        if self.gamma.is_some() {
            s.gamma = self.gamma;
        }
        if let Some(v) = self.rho {
            s.icp.rho = v;
        }
        if let Some(v) = self.eps {
            s.icp.eps_strict = v;
        }
        if let Some(v) = self.max_iters {
            s.icp.max_outer_iters = v;
        }
        if let Some(v) = self.seed {
            s.icp.sample_seed = v;
        }
        s.icp.validate()?;
        Ok(s)
    }
}

#[derive(Args, Debug)]
struct GenOpts {
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    nu: usize,
    #[arg(long, default_value_t = 2)]
    ny: usize,
    #[arg(long, default_value_t = 1)]
    nw: usize,
    /// Defaults to nu + 1
    #[arg(long)]
    nz: Option<usize>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Lower end of the open-loop spectral abscissa band
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    alpha_min: f64,
    /// Upper end of the open-loop spectral abscissa band
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use B = C = I (state feedback); needs nu = ny = n
    #[arg(long)]
    identity_io: bool,
    /// Output directory
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct WithController {
    controller: Controller,
}

fn read_controller(path: &Path) -> Result<Controller> {
    let text = fs::read_to_string(path)?;
    if let Ok(k) = serde_json::from_str::<Controller>(&text) {
        return Ok(k);
    }
    let w: WithController =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: no controller found: {e}", path.display())))?;
    Ok(w.controller)
}

#[derive(Deserialize)]
struct ClaimedResult {
    controller: Controller,
    claims: Claims,
}

fn synth(plant: &Path, opts: &SynthOpts, f0: Option<&Path>, out: &Path) -> Result<i32> {
    let plant = load_plant(plant)?;
    let mut s = opts.settings()?;
    if let Some(path) = f0 {
        let k = read_controller(path)?;
        k.check_for(&plant)?;
        s.f0 = Some(k);
    }
    log::info!("synth {} ({}) with {:?}", plant.name, s.mode, s.icp);
    let outcome = run_synthesis(&plant, &s)?;
    let mut text = serde_json::to_string_pretty(&outcome)?;
    text.push('\n');
    fs::write(out, text)?;
    println!(
        "{}: {} objective {:.6} after {} iterations ({:?}), verification {}",
        outcome.plant,
        outcome.mode,
        outcome.objective,
        outcome.iterations,
        outcome.status,
        if outcome.verification.passed { "passed" } else { "FAILED" }
    );
    Ok(outcome.exit_code())
}

fn bench(dir: &Path, opts: &SynthOpts, csv: Option<&Path>, format: Format) -> Result<i32> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    let s = opts.settings()?;
    let rows = bench_dir(dir, &s)?;
    for r in rows.iter().filter(|r| r.message.is_some()) {
        log::warn!("{}: {}", r.name, r.message.as_deref().unwrap_or_default());
    }
    let table = render_csv(s.mode, &rows);
    if let Some(path) = csv {
        fs::write(path, &table)?;
    }
    match format {
        Format::Text => print!("{}", render_text(s.mode, &rows)),
        Format::Csv => print!("{table}"),
    }
    Ok(0)
}

fn gen(o: &GenOpts) -> Result<i32> {
    let cfg = GenConfig {
        n: o.n,
        n_u: o.nu,
        n_y: o.ny,
        n_w: o.nw,
        n_z: o.nz,
        count: o.count,
        band: (o.alpha_min, o.alpha_max),
        seed: o.seed,
        identity_io: o.identity_io,
    };
    let paths = write_plants(&cfg, &o.out)?;
    log::info!("wrote {} plants to {}", paths.len(), o.out.display());
    Ok(0)
}

fn verify(plant: &Path, result: &Path) -> Result<i32> {
    let plant = load_plant(plant)?;
    let r: ClaimedResult = serde_json::from_str(&fs::read_to_string(result)?)
        .map_err(|e| Error::Config(format!("{}: {e}", result.display())))?;
    r.controller.check_for(&plant)?;
    let report = verify_synthesis(&plant, &r.controller, &r.claims)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.passed { 0 } else { 3 })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let res = match &cli.command {
        Command::Synth { plant, opts, f0, out } => synth(plant, opts, f0.as_deref(), out),
        Command::Bench { dir, opts, csv, format } => bench(dir, opts, csv.as_deref(), *format),
        Command::Gen(o) => gen(o),
        Command::Verify { plant, result } => verify(plant, result),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
