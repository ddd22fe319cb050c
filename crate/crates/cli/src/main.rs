use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tracing_subscriber::EnvFilter;

use snb_core::acid::{self, Scenario, StoreKind};
use snb_core::datagen::{self, GenConfig, TEMPORAL_DIR};
use snb_core::driver::{self, DriverConfig, DriverMode};
use snb_core::model::{ModeratorDeletion, MILLIS_PER_SECOND};
use snb_core::paramgen::{self, ParamgenConfig};
use snb_core::pipeline::{self, PipelineConfig};
use snb_core::refstore::naive::NaiveStore;
use snb_core::refstore::RefStore;

#[derive(Parser)]
#[command(
    name = "snb",
    version,
    about = "Social network graph workload: generate, curate, drive, check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a temporal graph and split it into snapshot and update stream.
    Datagen(DatagenArgs),
    /// Curate per-day query parameters from a generated data set.
    Paramgen(ParamgenArgs),
    /// Replay a data set against the reference store.
    Driver(DriverArgs),
    /// Run the isolation scenarios against a store.
    Acid(AcidArgs),
    /// Run every stage end to end and write a disclosure report.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct DatagenArgs {
    /// JSON generator configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    persons: Option<usize>,
    #[arg(long)]
    cutoff_fraction: Option<f64>,
    #[arg(long)]
    t_safe_secs: Option<f64>,
    #[arg(long, value_enum)]
    moderator_deletion: Option<ModeratorArg>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeratorArg {
    DeleteForum,
    KeepForum,
}

impl From<ModeratorArg> for ModeratorDeletion {
    fn from(m: ModeratorArg) -> Self {
        match m {
            ModeratorArg::DeleteForum => ModeratorDeletion::DeleteForum,
            ModeratorArg::KeepForum => ModeratorDeletion::KeepForum,
        }
    }
}

#[derive(Args)]
struct ParamgenArgs {
    /// Output directory of `datagen`.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON curation configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    per_day: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Benchmark,
    Validate,
}

#[derive(Args)]
struct DriverArgs {
    /// JSON driver configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    tcr: Option<f64>,
    /// Output directory of `datagen`.
    #[arg(long)]
    stream: PathBuf,
    /// Output directory of `paramgen`.
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    warmup_secs: Option<f64>,
    #[arg(long)]
    window_secs: Option<f64>,
    #[arg(long)]
    read_threads: Option<usize>,
    #[arg(long)]
    write_threads: Option<usize>,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Line-delimited commit audit log of a benchmark run.
    #[arg(long)]
    audit_log: Option<PathBuf>,
}

#[derive(Args)]
struct AcidArgs {
    #[arg(long, default_value = "reference")]
    store: String,
    /// Scenario name or `all`.
    #[arg(long, default_value = "all")]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON pipeline configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    persons: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    tcr: Option<f64>,
    #[arg(long)]
    warmup_secs: Option<f64>,
    #[arg(long)]
    window_secs: Option<f64>,
}

fn load_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn emit<T: Serialize>(value: &T, to: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match to {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => stdout_line(&text),
    }
}

/// Writes to stdout, treating a closed pipe as success.
fn stdout_line(text: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.context("writing stdout"),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn mode(m: ModeArg) -> DriverMode {
    match m {
        ModeArg::Benchmark => DriverMode::Benchmark,
        ModeArg::Validate => DriverMode::Validate,
    }
}

fn datagen_cmd(a: DatagenArgs) -> Result<()> {
    let mut cfg: GenConfig = load_json(a.config.as_deref())?;
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.num_persons, a.persons);
    set(&mut cfg.cutoff_fraction, a.cutoff_fraction);
    set(
        &mut cfg.t_safe_millis,
        a.t_safe_secs
            .map(|s| (s * MILLIS_PER_SECOND as f64).round() as i64),
    );
    set(
        &mut cfg.moderator_deletion,
        a.moderator_deletion.map(Into::into),
    );
    let (graph, split) = datagen::generate_dataset(&cfg)?;
    datagen::serialize(&split, &a.out)?;
    datagen::write_config(&a.out, &cfg)?;
    datagen::write_graph(&a.out.join(TEMPORAL_DIR), &graph)?;
    emit(&pipeline::emit_stats(&split), None)
}

fn paramgen_cmd(a: ParamgenArgs) -> Result<()> {
    let mut cfg: ParamgenConfig = load_json(a.config.as_deref())?;
    set(&mut cfg.k, a.k);
    set(&mut cfg.per_day, a.per_day);
    set(&mut cfg.seed, a.seed);
    let graph = datagen::read_graph(&a.graph.join(TEMPORAL_DIR))?;
    let split = datagen::deserialize(&a.graph)?;
    let (Some(first), Some(last)) = (split.stream.first(), split.stream.last()) else {
        bail!(
            "{} has an empty update stream; no days to curate",
            a.graph.display()
        );
    };
    let buckets = paramgen::generate_parameters(
        &graph,
        first.scheduled_time.day(),
        last.scheduled_time.day(),
        &cfg,
    )?;
    paramgen::write_parameters(&a.out, &buckets, &cfg)?;
    let partial = buckets.iter().filter(|b| b.partial).count();
    eprintln!(
        "wrote {} parameter days ({partial} partial) to {}",
        buckets.len(),
        a.out.display()
    );
    Ok(())
}

fn driver_cmd(a: DriverArgs) -> Result<()> {
    let gen = datagen::read_config(&a.stream)?;
    let mut cfg: DriverConfig = match a.config.as_deref() {
        Some(p) => load_json(Some(p))?,
        None => DriverConfig {
            t_safe_millis: gen.t_safe_millis,
            ..DriverConfig::default()
        },
    };
    set(&mut cfg.mode, a.mode.map(mode));
    set(&mut cfg.tcr, a.tcr);
    set(&mut cfg.warmup_secs, a.warmup_secs);
    set(&mut cfg.window_secs, a.window_secs);
    set(&mut cfg.read_threads, a.read_threads);
    set(&mut cfg.write_threads, a.write_threads);
    cfg.validate()?;
    if cfg.t_safe_millis != gen.t_safe_millis {
        bail!(
            "tSafeMillis {} differs from the data set's {}",
            cfg.t_safe_millis,
            gen.t_safe_millis
        );
    }
    let split = datagen::deserialize(&a.stream)?;
    let buckets = paramgen::read_parameters(&a.params)?;
    let store = RefStore::bulk_load(&split.snapshot, gen.moderator_deletion)?;
    let schedule = driver::build_schedule(&split.stream, &buckets, &cfg, split.cutoff)?;
    match cfg.mode {
        DriverMode::Benchmark => {
            let outcome = driver::run_benchmark(&schedule, &store, &cfg)?;
            let violations = driver::audit_violations(&outcome.audit).len();
            if let Some(path) = &a.audit_log {
                driver::write_audit_log(path, &outcome.audit)?;
            }
            if violations > 0 {
                tracing::error!(
                    violations,
                    "updates started before their dependency committed"
                );
            }
            emit(&outcome.report, a.report.as_deref())?;
            if !outcome.report.valid {
                eprintln!(
                    "run invalid: on-time ratio {:.4}",
                    outcome.report.on_time_ratio
                );
            }
        }
        DriverMode::Validate => {
            let naive = NaiveStore::new(split.snapshot.clone(), gen.moderator_deletion);
            let report = driver::cross_validate(&schedule, &store, &naive, &cfg.triggers);
            emit(&report, a.report.as_deref())?;
            report.into_result()?;
        }
    }
    Ok(())
}

fn acid_cmd(a: AcidArgs) -> Result<bool> {
    let Some(store) = StoreKind::parse(&a.store) else {
        bail!(
            "unknown store {:?}; expected one of {:?}",
            a.store,
            StoreKind::ALL.map(StoreKind::name)
        );
    };
    let scenarios: Vec<Scenario> = match a.scenario.as_str() {
        "all" => Scenario::ALL.to_vec(),
        name => match Scenario::parse(name) {
            Some(s) => vec![s],
            None => bail!(
                "unknown scenario {name:?}; expected all or one of {:?}",
                Scenario::ALL.map(Scenario::name)
            ),
        },
    };
    let report = acid::run_acid(store, &scenarios, a.seed, a.runs);
    emit(&report, a.report.as_deref())?;
    Ok(report.all_passed)
}

fn pipeline_cmd(a: PipelineArgs) -> Result<bool> {
    let mut cfg: PipelineConfig = load_json(a.config.as_deref())?;
    set(&mut cfg.out_dir, a.out);
    set(&mut cfg.datagen.seed, a.seed);
    set(&mut cfg.datagen.num_persons, a.persons);
    set(&mut cfg.driver.mode, a.mode.map(mode));
    set(&mut cfg.driver.tcr, a.tcr);
    set(&mut cfg.driver.warmup_secs, a.warmup_secs);
    set(&mut cfg.driver.window_secs, a.window_secs);
    let report = pipeline::run_pipeline(&cfg)?;
    stdout_line(pipeline::summary(&report).trim_end())?;
    let clean = report.audit_violations.unwrap_or(0) == 0
        && report.run.as_ref().is_none_or(|r| r.valid)
        && report.validation.as_ref().is_none_or(|v| v.diffs == 0);
    Ok(clean)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let ok = match Cli::parse().command {
        Command::Datagen(a) => datagen_cmd(a).map(|_| true),
        Command::Paramgen(a) => paramgen_cmd(a).map(|_| true),
        Command::Driver(a) => driver_cmd(a).map(|_| true),
        Command::Acid(a) => acid_cmd(a),
        Command::Pipeline(a) => pipeline_cmd(a),
    }?;
    if !ok {
        std::process::exit(1);
    }
    Ok(())
}
