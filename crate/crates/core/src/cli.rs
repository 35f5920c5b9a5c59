//! Command-line interface of the `caging` binary.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::eval::{
    format_score_row, generate_dataset, parse_score_csv, read_dataset, run_study, score_records,
    simulate_record, write_dataset, write_records, GenerationConfig, MSweepConfig, Metric,
    PerturbStudyConfig, ScoreRequest, ScoreSettings, StudyConfig, SCORE_HEADER,
};
use crate::metrics::{effort_of_escape, EscapeConfig};
use crate::planner::PlannerKind;
use crate::scenarios::{make_scenario, ScenarioConfig, SystemState, SCENARIO_NAMES};

/// Records scored between appends to the score table.
const SCORE_BATCH: usize = 4;

#[derive(Parser, Debug)]
#[command(
    name = "caging",
    version,
    about = "Energy-margin robustness scores for planar manipulation"
)]
pub struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML or JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the config file.
    #[arg(long, env = "CAGING_SEED")]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the scripted controller once and record a trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<String>,
        /// Also write every simulator step.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Generate a labeled dataset of randomized trajectories.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        n_traj: Option<usize>,
    },
    /// Score every frame of a dataset; reruns skip rows already written.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated metric names.
        #[arg(long)]
        metrics: Option<String>,
    },
    /// Effort of escape from a scenario's initial state.
    Escape {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        planner: Option<PlannerKind>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Dataset generation, scoring table, field-size sweep and perturbation curves.
    Study {
        #[command(flatten)]
        common: Common,
        /// Comma-separated metric names; an empty list gives an empty report.
        #[arg(long)]
        metrics: Option<String>,
    },
}

/// Everything a run reads; echoed to `config.toml` in the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub scenario: ScenarioConfig,
    /// Scenarios of a study; empty means `scenario` alone.
    pub scenarios: Vec<ScenarioConfig>,
    pub metrics: Vec<Metric>,
    pub n_traj: usize,
    pub k_frames: usize,
    pub k_hat: usize,
    pub scoring: ScoreSettings,
    /// Settings of the `escape` subcommand.
    pub escape: EscapeConfig,
    pub m_sweep: MSweepConfig,
    pub perturbation: PerturbStudyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let study = StudyConfig::default();
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            scenario: ScenarioConfig::default_for("pushing").expect("known scenario"),
            scenarios: Vec::new(),
            metrics: study.metrics,
            n_traj: study.n_traj,
            k_frames: study.k_frames,
            k_hat: study.k_hat,
            scoring: study.scoring,
            escape: EscapeConfig::default(),
            m_sweep: study.m_sweep,
            perturbation: study.perturbation,
        }
    }
}

impl RunConfig {
    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            seed: self.seed,
            scenarios: if self.scenarios.is_empty() {
                vec![self.scenario.clone()]
            } else {
                self.scenarios.clone()
            },
            metrics: self.metrics.clone(),
            n_traj: self.n_traj,
            k_frames: self.k_frames,
            k_hat: self.k_hat,
            scoring: self.scoring.clone(),
            m_sweep: self.m_sweep.clone(),
            perturbation: self.perturbation.clone(),
        }
    }

    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            n_traj: self.n_traj,
            k_frames: self.k_frames,
            k_hat: self.k_hat,
            seed: self.seed,
        }
    }
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration (exit code 2).
    Usage(String),
    /// Failure while running (exit code 1).
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses TOML, or JSON for `.json` files; other extensions try TOML first.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig, CliError> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    let from_json = |t: &str| {
        serde_json::from_str::<RunConfig>(t).map_err(|e| {
            usage(format!(
                "{}: line {} column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })
    };
    if is_json {
        return from_json(text);
    }
    match toml::from_str::<RunConfig>(text) {
        Ok(c) => Ok(c),
        Err(e) => {
            let is_toml = path.extension().is_some_and(|e| e == "toml");
            if !is_toml && text.trim_start().starts_with('{') {
                return from_json(text);
            }
            let loc = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}: ")
                })
                .unwrap_or_default();
            Err(usage(format!("{}: {loc}{}", path.display(), e.message())))
        }
    }
}

fn scenario_by_name(name: &str) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::default_for(name).ok_or_else(|| {
        usage(format!(
            "unknown scenario {name:?}; valid scenarios: {}",
            SCENARIO_NAMES.join(", ")
        ))
    })
}

/// Empty text gives an empty list.
pub fn parse_metrics(list: &str) -> Result<Vec<Metric>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Metric>().map_err(usage))
        .collect()
}

/// Config file, then flags; a `--scenario` matching the file's scenario keeps its overrides.
fn resolve(common: &Common, scenario: Option<&str>) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text, p)?
        }
        None => RunConfig::default(),
    };
    if let Some(name) = scenario {
        if cfg.scenario.name() != name {
            cfg.scenario = scenario_by_name(name)?;
        }
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn echo_config(cfg: &RunConfig) -> anyhow::Result<()> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let text = toml::to_string(cfg).context("serializing the resolved config")?;
    fs::write(cfg.output_dir.join("config.toml"), text).context("writing config.toml")?;
    Ok(())
}

#[derive(Serialize)]
struct StepDump<'a> {
    step: usize,
    z: &'a SystemState,
}

fn cmd_simulate(cfg: &RunConfig, dump_frames: bool) -> Result<(), CliError> {
    let spec = make_scenario(&cfg.scenario).map_err(|e| usage(e.to_string()))?;
    echo_config(cfg)?;
    let id = format!("{}-seed{}", cfg.scenario.name(), cfg.seed);
    let rec = simulate_record(&id, &cfg.scenario, cfg.seed, cfg.k_frames, cfg.k_hat)
        .map_err(anyhow::Error::from)?;
    write_records(
        &cfg.output_dir.join("trajectory.jsonl"),
        std::slice::from_ref(&rec),
    )
    .map_err(anyhow::Error::from)?;
    if dump_frames {
        let rollout = spec.rollout(cfg.seed).map_err(|e| anyhow!("{e}"))?;
        let mut out = Vec::new();
        for (step, z) in rollout.states.iter().enumerate() {
            serde_json::to_writer(&mut out, &StepDump { step, z }).map_err(anyhow::Error::from)?;
            out.push(b'\n');
        }
        fs::write(cfg.output_dir.join("frames.jsonl"), out).context("writing frames.jsonl")?;
    }
    println!(
        "{id}: success {} captured frames {}/{}",
        rec.success_label,
        rec.captured_labels.iter().filter(|&&c| c).count(),
        rec.captured_labels.len()
    );
    Ok(())
}

fn cmd_generate(cfg: &RunConfig) -> Result<(), CliError> {
    make_scenario(&cfg.scenario).map_err(|e| usage(e.to_string()))?;
    let gen = cfg.generation();
    gen.validate().map_err(|e| usage(e.to_string()))?;
    echo_config(cfg)?;
    let d = generate_dataset(&cfg.scenario, &gen).map_err(anyhow::Error::from)?;
    write_dataset(&cfg.output_dir.join("dataset.jsonl"), &d).map_err(anyhow::Error::from)?;
    println!(
        "{} trajectories, {} successful",
        d.records.len(),
        d.records.iter().filter(|r| r.success_label).count()
    );
    Ok(())
}

fn cmd_score(cfg: &RunConfig, dataset: &Path) -> Result<(), CliError> {
    cfg.scoring.validate().map_err(|e| usage(e.to_string()))?;
    let records =
        read_dataset(dataset).with_context(|| format!("reading dataset {}", dataset.display()))?;
    echo_config(cfg)?;
    let path = cfg.output_dir.join("scores.csv");
    let existing = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(anyhow::Error::from(e).context("reading scores.csv").into()),
    };
    let done_rows = parse_score_csv(&existing)
        .with_context(|| format!("reading existing scores {}", path.display()))?;
    let done: HashSet<(String, usize, Metric)> = done_rows
        .into_iter()
        .map(|r| (r.traj_id, r.frame, r.metric))
        .collect();
    // drop an interrupted final line before appending
    let keep = existing.rfind('\n').map_or(0, |i| i + 1);
    let mut text = existing[..keep].to_string();
    if text.is_empty() {
        text = format!("{SCORE_HEADER}\n");
    }
    fs::write(&path, &text).context("writing scores.csv")?;
    let mut file = fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .context("opening scores.csv")?;
    let skip = |id: &str, frame: usize, m: Metric| done.contains(&(id.to_string(), frame, m));
    let mut added = 0;
    for (b, batch) in records.chunks(SCORE_BATCH).enumerate() {
        let req = ScoreRequest {
            metrics: &cfg.metrics,
            settings: &cfg.scoring,
            seed: cfg.seed,
            frame_limit: None,
            fallback: Some(&cfg.scenario),
            first_index: b * SCORE_BATCH,
        };
        let rows = score_records(batch, &req, &skip).map_err(anyhow::Error::from)?;
        let mut chunk = String::new();
        for r in &rows {
            chunk.push_str(&format_score_row(r).map_err(anyhow::Error::from)?);
        }
        file.write_all(chunk.as_bytes())
            .context("appending to scores.csv")?;
        added += rows.len();
    }
    println!("{added} new rows in {}", path.display());
    Ok(())
}

fn cmd_escape(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = make_scenario(&cfg.scenario).map_err(|e| usage(e.to_string()))?;
    cfg.escape
        .planner
        .validate()
        .map_err(|e| usage(e.to_string()))?;
    echo_config(cfg)?;
    let r = effort_of_escape(&spec, &spec.initial_state(), &cfg.escape, cfg.seed);
    let json = serde_json::to_string_pretty(&r).map_err(anyhow::Error::from)?;
    fs::write(cfg.output_dir.join("escape.json"), json).context("writing escape.json")?;
    println!(
        "effort {} J after {} iterations, {} improvements",
        r.effort,
        r.iterations_used,
        r.bound_history.len()
    );
    Ok(())
}

fn cmd_study(cfg: &RunConfig) -> Result<(), CliError> {
    let study = cfg.study();
    study.validate().map_err(|e| usage(e.to_string()))?;
    echo_config(cfg)?;
    let report = run_study(&study).map_err(anyhow::Error::from)?;
    report.write(&cfg.output_dir).map_err(anyhow::Error::from)?;
    for r in &report.table {
        println!(
            "{:10} {:14} auc {:.3} ap {:.3}",
            r.scenario, r.metric, r.auc, r.ap
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            common,
            scenario,
            dump_frames,
        } => cmd_simulate(&resolve(&common, scenario.as_deref())?, dump_frames),
        Command::Generate {
            common,
            scenario,
            n_traj,
        } => {
            let mut cfg = resolve(&common, scenario.as_deref())?;
            if let Some(n) = n_traj {
                cfg.n_traj = n;
            }
            cmd_generate(&cfg)
        }
        Command::Score {
            common,
            dataset,
            metrics,
        } => {
            let mut cfg = resolve(&common, None)?;
            if let Some(m) = metrics {
                cfg.metrics = parse_metrics(&m)?;
            }
            cmd_score(&cfg, &dataset)
        }
        Command::Escape {
            common,
            scenario,
            planner,
            rounds,
            budget,
        } => {
            let mut cfg = resolve(&common, scenario.as_deref())?;
            if let Some(p) = planner {
                cfg.escape.planner_kind = p;
            }
            if let Some(r) = rounds {
                cfg.escape.rounds = r;
            }
            if let Some(b) = budget {
                cfg.escape.budget = b;
            }
            cmd_escape(&cfg)
        }
        Command::Study { common, metrics } => {
            let mut cfg = resolve(&common, None)?;
            if let Some(m) = metrics {
                cfg.metrics = parse_metrics(&m)?;
            }
            cmd_study(&cfg)
        }
    }
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let workers = cli.workers;
    if workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return 2;
    }
    let result = match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool.install(|| dispatch(cli)),
        Err(e) => Err(CliError::Runtime(anyhow!("starting the worker pool: {e}"))),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
