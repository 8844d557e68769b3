//! driftcast: streaming SoH forecasting runs, sweeps, synthetic data, and
//! report merging from the command line.

mod config;
mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use driftcast_core::evaluation::{
    build_report, sweep, write_report_json, write_sweep_csv, write_traces_csv, SweepAxis,
};
use driftcast_core::forecast::ModelKind;
use driftcast_core::ingest::{
    load_cycle_capacity_csv, preset, preset_series, synth_named, write_soh_csv, CsvSchema,
};
use driftcast_core::protocol::run_stream_pretrained;
use driftcast_core::SohSeries64;

use config::{effective_config, parse_grid, FileConfig, Overrides};

/// Failures sorted by exit code: 1 config, 2 data, 3 runtime.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "driftcast", version, about = "Streaming battery SoH forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream one series and write report.json, traces.csv, model.json.
    Run(RunArgs),
    /// Run a grid of configs over one axis and write sweep.csv.
    Sweep(SweepArgs),
    /// Generate a synthetic degradation CSV.
    Synth(SynthArgs),
    /// Merge stored run reports into one comparison table.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; keys match the run config fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cycle/capacity CSV to stream (see data_schema in the config).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic preset to stream instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for the run artifacts.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Which field the grid varies: n or h.
    #[arg(long)]
    axis: String,
    /// Grid values: "5,10,20" or "2..20 step 2".
    #[arg(long, num_args = 1.., required = true)]
    grid: Vec<String>,
    /// Maximum parallel cells (defaults to the CPU count).
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML config with a [synth] parameter table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset: smooth-short, irregular-short, smooth-long, irregular-long.
    #[arg(long)]
    preset: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the generator seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories, each holding a report.json.
    #[arg(required = true)]
    run_dirs: Vec<PathBuf>,
    /// Output CSV path for the merged table.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("DRIFTCAST_LOG", "warn"),
    )
    .init();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

/// Resolves the series: exactly one of a data file or a preset name.
fn load_series(
    data: Option<&Path>,
    preset_name: Option<&str>,
    schema: &CsvSchema<f64>,
) -> Result<SohSeries64, CliError> {
    match (data, preset_name) {
        (Some(_), Some(_)) => {
            Err(CliError::Config("pass exactly one of --data or --preset, not both".into()))
        }
        (None, None) => Err(CliError::Config("pass --data FILE or --preset NAME".into())),
        (Some(path), None) => {
            load_cycle_capacity_csv(path, schema).map_err(|e| CliError::Data(e.to_string()))
        }
        (None, Some(name)) => preset_series(name).map_err(|e| CliError::Config(e.to_string())),
    }
}

/// A pretraining source is a preset name when one matches, otherwise a
/// CSV path read with the same schema as the main data.
fn load_pretrain(source: &str, schema: &CsvSchema<f64>) -> Result<SohSeries64, CliError> {
    if preset::<f64>(source).is_ok() {
        return preset_series(source).map_err(|e| CliError::Runtime(e.to_string()));
    }
    load_cycle_capacity_csv(Path::new(source), schema)
        .map_err(|e| CliError::Data(e.to_string()))
}

fn resolve_schema(file: &FileConfig) -> Result<CsvSchema<f64>, CliError> {
    match &file.data_schema {
        Some(choice) => choice.resolve(),
        None => Ok(CsvSchema::default()),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (config, file) = effective_config(args.config.as_deref(), &args.overrides)?;
    let schema = resolve_schema(&file)?;
    let series = load_series(args.data.as_deref(), args.preset.as_deref(), &schema)?;
    let pretrain = config
        .pretrain_series
        .as_deref()
        .map(|source| load_pretrain(source, &schema))
        .transpose()?;

    let result = run_stream_pretrained(&config, &series, pretrain.as_ref())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = build_report(&result, &series).map_err(|e| CliError::Runtime(e.to_string()))?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", args.out.display())))?;
    let runtime = |e: driftcast_core::Error| CliError::Runtime(e.to_string());
    write_traces_csv(&args.out.join("traces.csv"), &result).map_err(runtime)?;
    write_report_json(&args.out.join("report.json"), &report).map_err(runtime)?;
    let checkpoint = serde_json::to_string_pretty(&result.final_state)
        .map_err(|e| CliError::Runtime(format!("serializing model state: {e}")))?;
    std::fs::write(args.out.join("model.json"), checkpoint + "\n")
        .map_err(|e| CliError::Runtime(format!("writing model.json: {e}")))?;

    println!(
        "{}: rmse {:.6}  mae% {:.4}  time {:.5} s/it  (records {}, updates {}, seed {})",
        result.series_label,
        report.metrics.rmse,
        report.metrics.mae_percent,
        report.metrics.mean_time_s,
        result.records.len(),
        result.updates,
        config.seed
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let (config, file) = effective_config(args.config.as_deref(), &args.overrides)?;
    let axis: SweepAxis = args.axis.parse().map_err(|e: driftcast_core::Error| {
        CliError::Config(e.to_string())
    })?;
    let grid = parse_grid(&args.grid.join(" "))?;
    let schema = resolve_schema(&file)?;
    let series = load_series(args.data.as_deref(), args.preset.as_deref(), &schema)?;
    let models: Vec<ModelKind> = match &args.overrides.model {
        Some(_) => vec![config.model],
        None => vec![
            ModelKind::Mlp,
            ModelKind::Rnn,
            ModelKind::Persistence,
            ModelKind::WindowedLinear,
        ],
    };

    let table = sweep(&config, axis, &grid, &models, &series, args.jobs)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", args.out.display())))?;
    let path = args.out.join("sweep.csv");
    write_sweep_csv(&path, &table).map_err(|e| CliError::Runtime(e.to_string()))?;

    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "wrote {} rows ({} models x {} grid points, {} failed) to {} (seed {})",
        table.rows.len(),
        models.len(),
        grid.len(),
        failed,
        path.display(),
        config.seed
    );
    for row in table.rows.iter().filter(|r| r.error.is_some()) {
        log::warn!(
            "cell {} {}={} failed: {}",
            row.model,
            axis,
            row.value,
            row.error.as_deref().unwrap_or("")
        );
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let file = args.config.as_deref().map(FileConfig::load).transpose()?.unwrap_or_default();
    let (mut params, label) = match (&args.preset, file.synth) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "pass either --preset or a [synth] config table, not both".into(),
            ))
        }
        (Some(name), None) => (
            preset::<f64>(name).map_err(|e| CliError::Config(e.to_string()))?,
            name.clone(),
        ),
        (None, Some(params)) => (params, "synthetic".to_string()),
        (None, None) => {
            return Err(CliError::Config(
                "pass --preset NAME or a config file with a [synth] table".into(),
            ))
        }
    };
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    let series = synth_named(&params, label).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", parent.display())))?;
    }
    write_soh_csv(&args.out, &series, Some(params.seed))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!(
        "wrote {} cycles ({}) to {} (seed {})",
        series.len(),
        params.model,
        args.out.display(),
        params.seed
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let rows = report::merge_reports(&args.run_dirs)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", parent.display())))?;
    }
    report::write_merged_csv(&args.out, &rows)?;
    print!("{}", report::render_table(&rows));
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}
