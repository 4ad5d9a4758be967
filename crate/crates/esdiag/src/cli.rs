use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use esdiag_core::channels::ChannelKind;
use esdiag_core::sampler::{BootstrapConfig, SamplerConfig};
use esdiag_core::witness::Normalization;

use crate::commands;
use crate::config::{
    parse_channel, parse_normalization, parse_shot_model, uniform_grid, FileConfig, Format, Output, RunConfig,
};
use crate::error::{CliError, EXIT_UNMODELED};
use crate::format::{self, document, pretty, DiagnosisDoc};
use esdiag_core::diagnose::DiagnosisKind;

/// Entanglement-swapping simulator and channel diagnostics.
#[derive(Debug, Parser)]
#[command(name = "esdiag", version)]
pub struct Cli {
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (a directory for `simulate`); stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form W(d) curves
    Curves(CurvesArgs),
    /// Simulated coincidence experiment with bootstrap witness estimate
    Simulate(SimulateArgs),
    /// Classify the error source behind a probability set or records file
    Diagnose(DiagnoseArgs),
    /// Simulated Hong-Ou-Mandel visibility calibration
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Channels to tabulate [default: all three noisy channels]
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
    /// Explicit strength values
    #[arg(long, value_delimiter = ',', conflicts_with = "points")]
    pub grid: Option<Vec<f64>>,
    /// Evenly spaced strengths on [0, 1] [default: 21]
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// identity, depolarizing, phase_damping or amplitude_damping [default: identity]
    #[arg(long)]
    pub channel: Option<String>,
    /// Channel strength d [default: 0]
    #[arg(long)]
    pub strength: Option<f64>,
    /// BSM visibility v [default: 1]
    #[arg(long)]
    pub visibility: Option<f64>,
    /// Trials per sequence [default: 100]
    #[arg(long)]
    pub shots: Option<u64>,
    /// Sequences per configuration [default: 60]
    #[arg(long)]
    pub sequences: Option<usize>,
    /// Trials per sequence of each singles record [default: 100000]
    #[arg(long)]
    pub singles_shots: Option<u64>,
    /// averaged or mixture_resolved [default: averaged]
    #[arg(long)]
    pub shot_model: Option<String>,
    /// conditioned or genuine_rate_calibrated [default: conditioned]
    #[arg(long)]
    pub normalization: Option<String>,
    /// Bootstrap resamples [default: 1000]
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Trials of each HOM calibration arm [default: 100000]
    #[arg(long)]
    pub hom_shots: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Summary JSON, probability JSON or JSON-lines records file
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Uncertainty applied to every probability, overriding the input's
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Bootstrap resamples when estimating from records [default: 1000]
    #[arg(long)]
    pub resamples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Interfering fraction of the two photons
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Trials of each arm [default: 100000]
    #[arg(long)]
    pub shots: Option<u64>,
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let output = Output { path: cli.out.clone().or(file.out.clone()), format: cli.format.or(file.format).unwrap_or(Format::Json) };
    match cli.command {
        Command::Curves(a) => {
            let kinds = match a.kinds.or(file.curves.kinds) {
                Some(names) => names.iter().map(|n| parse_channel(n)).collect::<Result<Vec<_>, _>>()?,
                None => ChannelKind::NOISY.to_vec(),
            };
            let grid = match (a.grid, a.points) {
                (Some(g), _) => g,
                (None, Some(n)) => uniform_grid(n),
                (None, None) => file.curves.grid.unwrap_or_else(|| uniform_grid(file.curves.points.unwrap_or(21))),
            };
            if let Some(bad) = grid.iter().find(|d| !(0.0..=1.0).contains(*d)) {
                return Err(CliError::Config(format!("grid value {bad} must lie in [0, 1]")));
            }
            let rows = commands::curves(&kinds, &grid)?;
            format::emit(output.path.as_deref(), &commands::render_curves(&rows, output.format))?;
            Ok(0)
        }
        Command::Simulate(a) => {
            let cfg = resolve_run(a, &file, seed, output)?;
            let sim = commands::simulate(&cfg)?;
            match &cfg.output.path {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                    let (records, summary, ext) = match cfg.output.format {
                        Format::Json => (
                            format::records_jsonl(&sim.experiment, &sim.calibration, cfg.normalization),
                            pretty(&commands::summary(&sim)?),
                            ("jsonl", "json"),
                        ),
                        Format::Csv => (format::records_csv(&sim.experiment), commands::summary_csv(&sim), ("csv", "csv")),
                    };
                    format::emit(Some(&dir.join(format!("records.{}", ext.0))), &records)?;
                    format::emit(Some(&dir.join(format!("summary.{}", ext.1))), &summary)?;
                }
                None => {
                    let text = match cfg.output.format {
                        Format::Json => pretty(&commands::summary(&sim)?),
                        Format::Csv => commands::summary_csv(&sim),
                    };
                    format::emit(None, &text)?;
                }
            }
            Ok(0)
        }
        Command::Diagnose(a) => {
            let input = a
                .input
                .or(file.diagnose.input)
                .ok_or_else(|| CliError::Config("diagnose needs --input".into()))?;
            let loaded = commands::load_diagnose_input(&input)?;
            let boot = BootstrapConfig { resamples: a.resamples.unwrap_or(1000), seed };
            let result = commands::diagnose(loaded, a.sigma.or(file.diagnose.sigma), &boot)?;
            let text = match output.format {
                Format::Json => pretty(&document(&DiagnosisDoc::new(&result.diagnosis, &result.input, result.sigma))),
                Format::Csv => DiagnosisDoc::csv(&result.diagnosis),
            };
            format::emit(output.path.as_deref(), &text)?;
            Ok(if result.diagnosis.kind == DiagnosisKind::Unmodeled { EXIT_UNMODELED } else { 0 })
        }
        Command::Calibrate(a) => {
            let overlap = a
                .overlap
                .or(file.calibrate.overlap)
                .ok_or_else(|| CliError::Config("calibrate needs --overlap".into()))?;
            let shots = a.shots.or(file.calibrate.shots).unwrap_or(100_000);
            let doc = commands::calibrate(overlap, shots, seed)?;
            format::emit(output.path.as_deref(), &commands::render_calibration(&doc, output.format))?;
            Ok(0)
        }
    }
}

fn resolve_run(a: SimulateArgs, file: &FileConfig, seed: u64, output: Output) -> Result<RunConfig, CliError> {
    let s = &file.simulate;
    let defaults = SamplerConfig::default();
    let channel = parse_channel(a.channel.as_deref().or(s.channel.as_deref()).unwrap_or("identity"))?;
    let normalization = match a.normalization.as_deref().or(s.normalization.as_deref()) {
        Some(n) => parse_normalization(n)?,
        None => Normalization::Conditioned,
    };
    let shot_model = match a.shot_model.as_deref().or(s.shot_model.as_deref()) {
        Some(m) => parse_shot_model(m)?,
        None => defaults.shot_model,
    };
    let cfg = RunConfig {
        channel,
        strength: a.strength.or(s.strength).unwrap_or(0.0),
        visibility: a.visibility.or(s.visibility).unwrap_or(1.0),
        sampler: SamplerConfig {
            shots: a.shots.or(s.shots).unwrap_or(defaults.shots),
            sequences: a.sequences.or(s.sequences).unwrap_or(defaults.sequences),
            singles_shots: a.singles_shots.or(s.singles_shots).unwrap_or(defaults.singles_shots),
            seed,
            shot_model,
        },
        normalization,
        resamples: a.resamples.or(s.resamples).unwrap_or(1000),
        hom_shots: a.hom_shots.or(s.hom_shots).unwrap_or(100_000),
        output,
    };
    cfg.validate()?;
    Ok(cfg)
}
