//! Command-line front end: `simulate`, `analyze`, `sweep`, `selftest` and
//! `plot`.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical or regime failure
//! (including a failed self-test), 3 I/O failure.

pub mod config;
pub mod plot;
pub mod selftest;
pub mod sweep;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, ErrorClass, Result};
use crate::estimate::estimate_from_stack;
use crate::stackio::{
    estimate_report, read_stack, write_estimate_csv, write_profile_csv, write_stack,
    write_visibility_map_csv,
};
use crate::synth::{synthesize_stack, ModelKind, StackMetadata};

pub use config::RunConfig;
pub use selftest::{run_selftest, SelftestCheck, SelftestOptions};
pub use sweep::{run_sweep, sweep_csv, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Gaussian,
    Spdc,
}

#[derive(Debug, Parser)]
#[command(name = "icfringe", version, about = "Induced-coherence fringe simulation and correlation-width recovery")]
pub struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for all outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Overrides the configured noise seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "ICFRINGE_THREADS")]
    pub threads: Option<usize>,
    /// Overrides the configured correlation model.
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a phase-stepped stack and its sidecar.
    Simulate {
        /// Stack file; defaults to `<out-dir>/stack.icfs`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Recover the correlation width from a stack file.
    Analyze { stack: PathBuf },
    /// Simulate and analyze every point of the configured grid.
    Sweep,
    /// Run the built-in oracle checks.
    Selftest {
        #[arg(long, hide = true, default_value_t = 0.0, allow_negative_numbers = true)]
        perturb: f64,
    },
    /// Draw radial-profile CSVs as an SVG line plot.
    Plot {
        #[arg(required = true)]
        profiles: Vec<PathBuf>,
        /// Defaults to `<out-dir>/profiles.svg`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    SelftestFailed,
}

pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Input => 1,
        ErrorClass::Numerical => 2,
        ErrorClass::Io => 3,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::SelftestFailed) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::parse(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.noise.rng_seed = seed;
    }
    if let Some(m) = cli.model {
        cfg.model = match m {
            ModelArg::Gaussian => ModelKind::Gaussian,
            ModelArg::Spdc => ModelKind::Spdc,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the command; its console output goes to `out` once it finishes.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let mut buffer = Vec::new();
    let outcome = match cli.threads {
        Some(0) => Err(Error::invalid("threads", "must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
            .install(|| dispatch(cli, &mut buffer)),
        None => dispatch(cli, &mut buffer),
    };
    out.write_all(&buffer)?;
    outcome
}

fn dispatch(cli: &Cli, out: &mut Vec<u8>) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate { output } => {
            let cfg = load_config(cli)?;
            let path = output.clone().unwrap_or_else(|| cli.out_dir.join("stack.icfs"));
            let bytes = simulate(&cfg, &path)?;
            out.write_all(cfg.echo().as_bytes())?;
            writeln!(out, "wrote {} ({bytes} bytes) and its .meta sidecar", path.display())?;
        }
        Command::Analyze { stack } => {
            let cfg = load_config(cli)?;
            let report = analyze(&cfg, stack, &cli.out_dir)?;
            out.write_all(report.as_bytes())?;
        }
        Command::Sweep => {
            let cfg = load_config(cli)?;
            let rows = run_sweep(&cfg)?;
            fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join("sweep.csv");
            fs::write(&path, sweep_csv(&rows))?;
            for r in &rows {
                writeln!(
                    out,
                    "w_p {:.4e}  d {:.4e}  photon_scale {:.3e}  {}  variance/theory {}",
                    r.w_p,
                    r.d,
                    r.photon_scale,
                    r.status,
                    r.variance_mean
                        .map(|v| format!("{:.5}", v / r.theory_variance))
                        .unwrap_or_else(|| "-".into()),
                )?;
            }
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Selftest { perturb } => {
            let checks = run_selftest(&SelftestOptions {
                alpha_perturbation: *perturb,
            });
            for c in &checks {
                writeln!(out, "{}", c.line())?;
            }
            let passed = checks.iter().all(|c| c.passed);
            writeln!(out, "{}", if passed { "selftest passed" } else { "selftest FAILED" })?;
            if !passed {
                return Ok(Outcome::SelftestFailed);
            }
        }
        Command::Plot { profiles, output } => {
            let series = profiles
                .iter()
                .map(|p| {
                    let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    Ok((label, plot::parse_profile_csv(&fs::read_to_string(p)?)?))
                })
                .collect::<Result<Vec<_>>>()?;
            fs::create_dir_all(&cli.out_dir)?;
            let path = output.clone().unwrap_or_else(|| cli.out_dir.join("profiles.svg"));
            fs::write(&path, plot::profiles_svg(&series))?;
            writeln!(out, "wrote {}", path.display())?;
        }
    }
    Ok(Outcome::Success)
}

/// Synthesizes the configured stack and writes it with its sidecar.
pub fn simulate(cfg: &RunConfig, path: &Path) -> Result<u64> {
    let model = cfg.build_model(&cfg.setup)?;
    let stack = synthesize_stack(
        &model,
        &cfg.envelope,
        &cfg.setup,
        &cfg.geometry,
        &cfg.noise,
        &cfg.phases(),
        &cfg.quadrature,
    )?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_stack(&stack, path)
}

/// Analyzes a stack file and writes `visibility_map.csv`, `profile.csv`,
/// `estimate.csv` and `report.txt` into `out_dir`. Returns the report.
///
/// The optical setup comes from the configuration when it sets any setup
/// key or the stack has no synthesis record, otherwise from the sidecar.
pub fn analyze(cfg: &RunConfig, stack_path: &Path, out_dir: &Path) -> Result<String> {
    let stack = read_stack(stack_path)?;
    let mut analysis = cfg.analysis;
    if cfg.sets_setup() || matches!(stack.metadata(), StackMetadata::Unknown) {
        analysis.setup = Some(cfg.setup);
    }
    let result = estimate_from_stack(&stack, &analysis)?;
    fs::create_dir_all(out_dir)?;
    let file = |name: &str| -> Result<std::io::BufWriter<fs::File>> {
        Ok(std::io::BufWriter::new(fs::File::create(out_dir.join(name))?))
    };
    write_visibility_map_csv(&result.visibility_map, file("visibility_map.csv")?)?;
    write_profile_csv(&result.profile, file("profile.csv")?)?;
    write_estimate_csv(&result.estimate, file("estimate.csv")?)?;
    let report = estimate_report(&result.estimate);
    fs::write(out_dir.join("report.txt"), &report)?;
    Ok(report)
}
