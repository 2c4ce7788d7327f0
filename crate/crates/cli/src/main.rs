use clap::{Args, Parser, Subcommand};
use optprofiler::calibrate::cmd_calibrate;
use optprofiler::config::{load_run_config, resolve_out_dir, RunConfig};
use optprofiler::meta::{cmd_meta_train, load_meta_config};
use optprofiler::plot::render_profiles_svg;
use optprofiler::runner::cmd_run;
use optprofiler::scorer::{score_records, summary_text, write_bundle};
use optprofiler::util::{atomic_write, to_pretty_json};
use optprofiler_core::error::{Error, Result};
use optprofiler_core::protocol::{read_all_records, Condition};
use optprofiler_core::scoring::{ingest_timing_table, score_matrix_text, score_table, ScoreReport};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "optprofiler",
    version,
    about = "Run, score, and compare neural-network optimizers under a shared budget protocol"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run description (TOML).
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Output directory for trial records (default: config `out`, then ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for trial execution (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the run condition: "time" or "step".
    #[arg(long)]
    condition: Option<String>,
    /// Charge every step this many simulated seconds instead of reading the real clock.
    #[arg(long)]
    simulated_clock: Option<f64>,
    /// Override the seed list, comma separated (e.g. "0,1,2").
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Directory of trial records produced by `run`.
    #[arg(long, conflicts_with = "timing", required_unless_present = "timing")]
    records: Option<PathBuf>,
    /// Prepared timing table (CSV) to score directly.
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Run description; supplies target fraction, ratio cap, and output directory defaults.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Largest performance ratio entering the score integral.
    #[arg(long)]
    r_max: Option<f64>,
    /// Budget fraction at which targets are read.
    #[arg(long)]
    target_fraction: Option<f64>,
    /// Output directory for the score bundle (default: config `out`, then ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Named timing table as NAME=PATH; repeat for side-by-side columns.
    #[arg(long = "timing", required = true)]
    timing: Vec<String>,
    /// Ratio cap for tables whose name does not contain "step".
    #[arg(long, default_value_t = 2.75)]
    r_max_time: f64,
    /// Ratio cap for tables whose name contains "step".
    #[arg(long, default_value_t = 1.5)]
    r_max_step: f64,
    /// Output directory for scores, profiles, and the combined report (default: ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Run description naming the workloads to pilot.
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Reference table CSV: workload,optimizer,reference_steps,reference_runtime_sec.
    #[arg(long)]
    reference: PathBuf,
    /// Fraction of the reference step count to run as the pilot.
    #[arg(long, default_value_t = 0.05)]
    pilot_fraction: f64,
    /// Simulated seconds per step for the pilot (default: real clock).
    #[arg(long)]
    simulated_clock: Option<f64>,
    /// Output directory for calibration.json (default: ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetaTrainArgs {
    /// Meta-training description (TOML).
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Output directory for the checkpoint and meta-loss curve.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the trial grid of a run config, resuming finished cells.
    Run(RunArgs),
    /// Aggregate trial records (or one timing table) into benchmark scores.
    Score(ScoreArgs),
    /// Score prepared timing tables side by side.
    Report(ReportArgs),
    /// Pilot workloads locally and transfer reference budgets to this machine.
    Calibrate(CalibrateArgs),
    /// Meta-train the learned optimizer over a task distribution.
    MetaTrain(MetaTrainArgs),
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("bad seed '{}': {e}", s.trim())))
        })
        .collect()
}

fn cmd_run_cli(args: RunArgs) -> Result<()> {
    let mut config = load_run_config(&args.config)?;
    if let Some(text) = &args.seeds {
        config.seeds = parse_seeds(text)?;
    }
    if let Some(text) = &args.condition {
        config.condition = Condition::from_str(text)?;
    }
    if let Some(sec_per_step) = args.simulated_clock {
        for entry in &mut config.workloads {
            entry.budget.sec_per_step = Some(sec_per_step);
        }
    }
    config.validate()?;
    let out = resolve_out_dir(args.out.as_deref(), config.out.as_deref());
    let outcome = cmd_run(&config, &out, args.jobs)?;
    println!(
        "ran {} trials, reused {} finished ones; records in {}",
        outcome.executed,
        outcome.skipped,
        out.display()
    );
    Ok(())
}

fn expected_cells(config: &RunConfig) -> String {
    let mut cells = Vec::new();
    for w in &config.workloads {
        for a in &config.algorithms {
            for s in &config.seeds {
                cells.push(format!("{}/{}/seed{}", w.workload.id(), a.name(), s));
            }
        }
    }
    let shown = cells.len().min(12);
    let mut text = cells[..shown].join(", ");
    if cells.len() > shown {
        text.push_str(&format!(", ... ({} total)", cells.len()));
    }
    text
}

fn cmd_score_cli(args: ScoreArgs) -> Result<()> {
    let config = args.config.as_deref().map(load_run_config).transpose()?;
    let out = resolve_out_dir(
        args.out.as_deref(),
        config.as_ref().and_then(|c| c.out.as_deref()),
    );
    if let Some(path) = &args.timing {
        let table = ingest_timing_table(path)?;
        let r_max = args.r_max.unwrap_or(2.75);
        let report = score_table(&table, r_max)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "timing".to_string());
        atomic_write(&out.join("scores.json"), to_pretty_json(&report)?.as_bytes())?;
        atomic_write(
            &out.join(format!("profiles_{name}.svg")),
            render_profiles_svg(&name, &report.profiles, r_max).as_bytes(),
        )?;
        print!("{}", score_matrix_text(&[(name, &report)]));
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        return Ok(());
    }

    let records_dir = args.records.expect("clap enforces records or timing");
    let records = read_all_records(&records_dir)?;
    if records.is_empty() {
        return Err(match &config {
            Some(c) => Error::Protocol(format!(
                "no trial records in {}; expected cells: {}",
                records_dir.display(),
                expected_cells(c)
            )),
            None => Error::Protocol(format!("no trial records in {}", records_dir.display())),
        });
    }
    let condition = records[0].budget.condition;
    let r_max = args.r_max.unwrap_or_else(|| match (&config, condition) {
        (Some(c), Condition::TimeControl) => c.r_max_time,
        (Some(c), Condition::StepControl) => c.r_max_step,
        (None, Condition::TimeControl) => 2.75,
        (None, Condition::StepControl) => 1.5,
    });
    let target_fraction = args
        .target_fraction
        .or(config.as_ref().map(|c| c.target_fraction))
        .unwrap_or(0.75);
    let bundle = score_records(&records, target_fraction, r_max)?;
    let written = write_bundle(&bundle, &out)?;
    print!("{}", summary_text(&bundle));
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

fn cmd_report_cli(args: ReportArgs) -> Result<()> {
    let out = resolve_out_dir(args.out.as_deref(), None);
    let mut reports: Vec<(String, ScoreReport)> = Vec::new();
    for spec in &args.timing {
        let (name, path) = spec.split_once('=').ok_or_else(|| {
            Error::Config(format!("--timing takes NAME=PATH, got '{spec}'"))
        })?;
        if reports.iter().any(|(n, _)| n == name) {
            return Err(Error::Config(format!("duplicate timing name '{name}'")));
        }
        let r_max = if name.contains("step") {
            args.r_max_step
        } else {
            args.r_max_time
        };
        let table = ingest_timing_table(std::path::Path::new(path))?;
        reports.push((name.to_string(), score_table(&table, r_max)?));
    }
    for (name, report) in &reports {
        let r_max = if name.contains("step") {
            args.r_max_step
        } else {
            args.r_max_time
        };
        atomic_write(
            &out.join(format!("profiles_{name}.svg")),
            render_profiles_svg(name, &report.profiles, r_max).as_bytes(),
        )?;
    }
    let columns: Vec<(String, &ScoreReport)> = reports
        .iter()
        .map(|(n, r)| (n.clone(), r))
        .collect();
    let matrix = score_matrix_text(&columns);
    let json: BTreeMap<&String, &ScoreReport> = reports.iter().map(|(n, r)| (n, r)).collect();
    atomic_write(&out.join("scores.json"), to_pretty_json(&json)?.as_bytes())?;
    atomic_write(&out.join("report.txt"), matrix.as_bytes())?;
    print!("{matrix}");
    for (name, report) in &reports {
        for w in &report.warnings {
            eprintln!("warning [{name}]: {w}");
        }
    }
    Ok(())
}

fn cmd_calibrate_cli(args: CalibrateArgs) -> Result<()> {
    let config = load_run_config(&args.config)?;
    let out = resolve_out_dir(args.out.as_deref(), config.out.as_deref());
    let outcomes = cmd_calibrate(
        &config,
        &args.reference,
        args.pilot_fraction,
        args.simulated_clock,
        &out,
    )?;
    for o in &outcomes {
        println!(
            "{}: {:.6} s/step locally ({} pilot steps) -> budget {} s of reference {} s",
            o.workload,
            o.local_time_per_step,
            o.pilot_steps,
            o.transferred_budget_sec,
            o.reference_runtime_sec
        );
    }
    println!("wrote {}", out.join("calibration.json").display());
    Ok(())
}

fn cmd_meta_train_cli(args: MetaTrainArgs) -> Result<()> {
    let config = load_meta_config(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let summary = cmd_meta_train(&config, &out)?;
    println!(
        "meta-loss {:.6} -> {:.6}; checkpoint {}",
        summary.initial_meta_loss,
        summary.final_meta_loss,
        summary.checkpoint.display()
    );
    if let Some(reason) = &summary.divergence {
        eprintln!("warning: meta-training stopped early: {reason}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run_cli(args),
        Command::Score(args) => cmd_score_cli(args),
        Command::Report(args) => cmd_report_cli(args),
        Command::Calibrate(args) => cmd_calibrate_cli(args),
        Command::MetaTrain(args) => cmd_meta_train_cli(args),
    }
}

/// 2 is bad input, 3 a numeric failure inside a run, 4 an i/o failure.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric { .. } | Error::Estimation(_) => 3,
        Error::Io(_) => 4,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
