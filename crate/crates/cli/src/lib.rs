//! `lane` command line: `data`, `train`, `eval` and `trees`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime
//! abort. Dataset directories default to `$LANE_DATA_ROOT/<task>`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Arg, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use lane_core::config::{RunConfig, KEYS};
use lane_core::eval::{self, length_histogram, EvalReport};
use lane_core::trainer::{run_curriculum, LessonReport, RunReport, Trainer};
use lane_core::vocab::Vocab;
use lane_core::{Model, ModelError};
use lane_scan::io::{read_examples, write_examples};
use lane_scan::miniscan::{load_miniscan, DEFAULT_LIMIT};
use lane_scan::{generate_scan, generate_scan_ext, load_mcd, split, DataError, DatasetSplit, Example, ExtSizes, SplitName};
use serde_json::{json, Value};
use thiserror::Error;

pub const DATA_ROOT_VAR: &str = "LANE_DATA_ROOT";
pub const DEFAULT_DATA_ROOT: &str = "data";

pub const TASKS: &[&str] = &[
    "simple",
    "add_jump",
    "around_right",
    "length",
    "mcd1",
    "mcd2",
    "mcd3",
    "scan_ext",
    "miniscan",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(m) => CliError::Config(m),
            ModelError::Data(_) | ModelError::UnknownWord(_) | ModelError::UnknownAction(_) => {
                CliError::Data(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "lane", version, about = "Compositional command translation with a slot-memory model")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build train/dev/test files for a task.
    Data(DataArgs),
    /// Train through the curriculum and evaluate on the test split.
    Train(TrainArgs),
    /// Greedy exact-match evaluation of a checkpoint.
    Eval(EvalArgs),
    /// Print learned derivations for a list of commands.
    Trees(TreesArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// One of simple, add_jump, around_right, length, mcd1..3, scan_ext, miniscan.
    task: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory [default: $LANE_DATA_ROOT/<task>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// MCD training index (one command per line).
    #[arg(long)]
    mcd_train: Option<PathBuf>,
    /// MCD test index.
    #[arg(long)]
    mcd_test: Option<PathBuf>,
    /// MiniSCAN file with [train]/[test] sections instead of the bundled one.
    #[arg(long)]
    source: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Key-value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory [default: $LANE_DATA_ROOT/<task>].
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Train this many consecutive seeds and report the mean accuracy.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Drop the simplicity reward (gamma = 0).
    #[arg(long)]
    no_simplicity: bool,
    /// Train a single lesson on all data.
    #[arg(long)]
    no_curriculum: bool,
    /// Any config key, e.g. --set gamma=0.5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory [default: the one used for training].
    #[arg(long)]
    data: Option<PathBuf>,
    /// train, dev or test.
    #[arg(long, default_value = "test")]
    split: String,
    /// Write per-example predictions as TSV.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Write the per-length accuracy table as CSV.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Keep only commands up to this length [default: as trained].
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args, Debug)]
struct TreesArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// One command per line.
    #[arg(long)]
    commands: PathBuf,
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn command() -> clap::Command {
    Cli::command().mut_subcommand("train", |c| {
        KEYS.iter().fold(c, |c, &k| {
            c.arg(
                Arg::new(k)
                    .long(flag_name(k))
                    .value_name("VALUE")
                    .help(format!("Config key `{k}`"))
                    .help_heading("Config keys"),
            )
        })
    })
}

/// Parse `args` (program name first) and run the chosen subcommand.
pub fn main_with(args: &[String]) -> Result<()> {
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                emit(&e.to_string())?;
                return Ok(());
            }
            return Err(CliError::Config(e.render().to_string().trim_end().to_string()));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Config(e.to_string()))?;
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match cli.cmd {
        Cmd::Data(a) => cmd_data(&a),
        Cmd::Train(a) => {
            let sub = matches.subcommand_matches("train").expect("train matches");
            let cfg = train_config(&a, sub)?;
            cmd_train(&a, cfg)
        }
        Cmd::Eval(a) => cmd_eval(&a),
        Cmd::Trees(a) => cmd_trees(&a),
    }
}

/// Write to stdout; a closed pipe (`lane eval | head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(runtime(e)),
        _ => Ok(()),
    }
}

macro_rules! say {
    ($($arg:tt)*) => { emit(&format!($($arg)*)) };
}

pub fn data_root() -> PathBuf {
    std::env::var_os(DATA_ROOT_VAR).map_or_else(|| PathBuf::from(DEFAULT_DATA_ROOT), PathBuf::from)
}

// ---------------------------------------------------------------- data

pub fn build_split(
    task: &str,
    seed: u64,
    mcd: Option<(&Path, &Path)>,
    source: Option<&Path>,
) -> Result<DatasetSplit> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())));
    let split = match task {
        "simple" | "add_jump" | "around_right" | "length" => {
            let name: SplitName = task.parse()?;
            split(name, &generate_scan(), seed).extract_dev(seed)
        }
        "mcd1" | "mcd2" | "mcd3" => {
            let (tr, te) = mcd.ok_or_else(|| {
                CliError::Data(format!("{task} needs its index files: pass --mcd-train and --mcd-test"))
            })?;
            let mut s = load_mcd(&read(tr)?, &read(te)?, &generate_scan())?;
            s.name = task.to_string();
            s.seed = seed;
            s.extract_dev(seed)
        }
        "scan_ext" => generate_scan_ext(seed, ExtSizes::default()).extract_dev(seed),
        // Too small to spare a dev set; lessons judge on their own pool.
        "miniscan" => match source {
            Some(p) => load_miniscan(&read(p)?)?,
            None => load_miniscan(DEFAULT_LIMIT)?,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown task `{other}`; expected one of {}",
                TASKS.join(", ")
            )))
        }
    };
    Ok(split)
}

pub fn write_split(dir: &Path, s: &DatasetSplit) -> Result<()> {
    let io = |e: std::io::Error| CliError::Data(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    write_examples(&dir.join("train.txt"), &s.train)?;
    write_examples(&dir.join("dev.txt"), &s.dev)?;
    write_examples(&dir.join("test.txt"), &s.test)?;
    fs::write(dir.join("sizes.txt"), sizes_text(s)).map_err(io)?;
    Ok(())
}

fn sizes_text(s: &DatasetSplit) -> String {
    format!(
        "task {}\nseed {}\ntrain {}\ndev {}\ntest {}\ntotal {}\n",
        s.name,
        s.seed,
        s.train.len(),
        s.dev.len(),
        s.test.len(),
        s.train.len() + s.dev.len() + s.test.len()
    )
}

fn cmd_data(a: &DataArgs) -> Result<()> {
    let mcd = match (&a.mcd_train, &a.mcd_test) {
        (Some(t), Some(u)) => Some((t.as_path(), u.as_path())),
        (None, None) => None,
        _ => return Err(CliError::Config("--mcd-train and --mcd-test go together".into())),
    };
    let s = build_split(&a.task, a.seed, mcd, a.source.as_deref())?;
    for w in &s.warnings {
        log::warn!("{w}");
    }
    let out = a.out.clone().unwrap_or_else(|| data_root().join(&a.task));
    write_split(&out, &s)?;
    say!("{}wrote {}\n", sizes_text(&s), out.display())?;
    Ok(())
}

// ---------------------------------------------------------------- train

fn train_config(a: &TrainArgs, m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    let mut errors = Vec::new();
    for &k in KEYS {
        if let Some(v) = m.get_one::<String>(k) {
            if let Err(e) = cfg.set(k, v) {
                errors.push(format!("--{}: {e}", flag_name(k)));
            }
        }
    }
    for kv in &a.set {
        match kv.split_once('=') {
            Some((k, v)) => {
                if let Err(e) = cfg.set(k.trim(), v.trim()) {
                    errors.push(format!("--set {kv}: {e}"));
                }
            }
            None => errors.push(format!("--set {kv}: expected KEY=VALUE")),
        }
    }
    if a.no_simplicity {
        cfg.train.gamma = 0.0;
    }
    if a.no_curriculum {
        cfg.train.curriculum = false;
    }
    if a.seeds == 0 {
        errors.push("--seeds must be at least 1".into());
    }
    errors.extend(cfg.problems());
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(format!("invalid configuration:\n  {}", errors.join("\n  "))))
    }
}

/// Train, dev and test examples of a dataset directory.
pub struct Dataset {
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    pub fn load(dir: &Path, max_len: usize) -> Result<Self> {
        let part = |name: &str| -> Result<Vec<Example>> {
            let p = dir.join(name);
            if !p.exists() {
                return Err(CliError::Data(format!(
                    "{} not found; build it with `lane data`",
                    p.display()
                )));
            }
            let mut ex = read_examples(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            if max_len > 0 {
                ex.retain(|e| e.command.len() <= max_len);
            }
            Ok(ex)
        };
        Ok(Dataset {
            train: part("train.txt")?,
            dev: part("dev.txt")?,
            test: part("test.txt")?,
        })
    }

    fn part(&self, name: &str) -> Result<&[Example]> {
        match name {
            "train" => Ok(&self.train),
            "dev" => Ok(&self.dev),
            "test" => Ok(&self.test),
            other => Err(CliError::Config(format!("unknown split `{other}`; expected train, dev or test"))),
        }
    }
}

fn lesson_json(l: &LessonReport, checkpoint: &Path) -> Value {
    json!({
        "bound": l.bound,
        "pool": l.pool,
        "dev": l.dev,
        "epochs": l.epochs,
        "updates": l.updates,
        "entropy_weight": l.entropy_weight,
        "dev_accuracy": l.dev_accuracy,
        "converged": l.converged,
        "checkpoint": checkpoint.file_name().map(|f| f.to_string_lossy().into_owned()),
    })
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub test: EvalReport,
    pub manifest: Value,
}

/// Train one seed into `out` and evaluate on the test split.
pub fn train_run(cfg: &RunConfig, data_dir: &Path, out: &Path) -> Result<RunOutcome> {
    let data = Dataset::load(data_dir, cfg.max_len)?;
    if data.train.is_empty() {
        return Err(CliError::Data(format!("{}: no training examples", data_dir.display())));
    }
    let vocab = Vocab::from_examples(data.train.iter().chain(&data.dev));
    let unseen: Vec<String> = vocab
        .unknown_tokens(&data.test)
        .into_iter()
        .filter(|t| data.test.iter().any(|e| e.command.contains(t)))
        .collect();
    if !unseen.is_empty() {
        return Err(CliError::Data(format!(
            "test commands use words absent from training: {}",
            unseen.join(" ")
        )));
    }
    fs::create_dir_all(out).map_err(runtime)?;
    fs::write(out.join("config.txt"), cfg.render()).map_err(runtime)?;

    let seed = cfg.train.seed;
    let model = Model::new(cfg.model.clone(), vocab, seed)?;
    let mut trainer = Trainer::new(model, cfg.train.clone())?;
    let mut metrics = BufWriter::new(File::create(out.join("metrics.log")).map_err(runtime)?);
    let extra = json!({ "task": cfg.task, "max_len": cfg.max_len, "data": data_dir, "max_steps": cfg.train.max_steps });
    let mut lessons = Vec::new();
    let report = run_curriculum(
        &mut trainer,
        &data.train,
        &data.dev,
        &mut metrics,
        &mut |model, li, lr| {
            let p = out.join(format!("lesson-{li}.ckpt"));
            model.save(&p, seed, li, extra.clone())?;
            lessons.push(lesson_json(lr, &p));
            log::info!("lesson {li} done: {lr:?}");
            Ok(())
        },
    )?;
    metrics.flush().map_err(runtime)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }

    let model = &trainer.model;
    model.save(&out.join("model.ckpt"), seed, report.lessons.len(), extra.clone())?;
    let test = eval::evaluate(model, &data.test, cfg.train.max_steps)?;
    fs::write(out.join("predictions.tsv"), test.dump()).map_err(runtime)?;
    fs::write(out.join("length.csv"), test.length_table(&length_histogram(&data.train))).map_err(runtime)?;

    let manifest = json!({
        "task": cfg.task,
        "data": data_dir,
        "seed": seed,
        "sizes": { "train": data.train.len(), "dev": data.dev.len(), "test": data.test.len() },
        "config": cfg,
        "lessons": lessons,
        "warnings": report.warnings,
        "budget_exhausted": report.budget_exhausted,
        "updates": report.history.len(),
        "final": {
            "test_accuracy": test.accuracy,
            "test_correct": test.correct,
            "test_total": test.total,
            "dev_accuracy": report.lessons.last().map(|l| l.dev_accuracy),
        },
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    fs::write(out.join("manifest.json"), text + "\n").map_err(runtime)?;
    Ok(RunOutcome { report, test, manifest })
}

fn cmd_train(a: &TrainArgs, cfg: RunConfig) -> Result<()> {
    let data_dir = a.data.clone().unwrap_or_else(|| data_root().join(&cfg.task));
    if a.seeds == 1 {
        let o = train_run(&cfg, &data_dir, &a.out)?;
        say!(
            "seed {} test accuracy {:.4} ({}/{})\n",
            cfg.train.seed, o.test.accuracy, o.test.correct, o.test.total
        )?;
        return Ok(());
    }
    let mut runs = Vec::new();
    for k in 0..a.seeds {
        let mut c = cfg.clone();
        c.train.seed = cfg.train.seed + k;
        let dir = a.out.join(format!("seed-{}", c.train.seed));
        let o = train_run(&c, &data_dir, &dir)?;
        say!(
            "seed {} test accuracy {:.4} ({}/{})\n",
            c.train.seed, o.test.accuracy, o.test.correct, o.test.total
        )?;
        runs.push(json!({ "seed": c.train.seed, "dir": dir, "test_accuracy": o.test.accuracy }));
    }
    let accs: Vec<f64> = runs.iter().map(|r| r["test_accuracy"].as_f64().unwrap_or(0.0)).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let summary = json!({ "runs": runs, "mean_test_accuracy": mean });
    fs::create_dir_all(&a.out).map_err(runtime)?;
    let text = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    fs::write(a.out.join("summary.json"), text + "\n").map_err(runtime)?;
    say!("mean test accuracy over {} seeds {mean:.4}\n", accs.len())?;
    Ok(())
}

// ---------------------------------------------------------------- eval

fn load_checkpoint(p: &Path) -> Result<(Model, lane_core::model::CheckpointMeta)> {
    if !p.exists() {
        return Err(CliError::Data(format!("{}: checkpoint not found", p.display())));
    }
    Model::load(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn max_steps(meta: &lane_core::model::CheckpointMeta) -> usize {
    meta.extra["max_steps"]
        .as_u64()
        .map_or(lane_core::rollout::DEFAULT_MAX_STEPS, |n| n as usize)
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (model, meta) = load_checkpoint(&a.checkpoint)?;
    let data_dir = match (&a.data, meta.extra["data"].as_str(), meta.extra["task"].as_str()) {
        (Some(d), _, _) => d.clone(),
        (None, Some(d), _) => PathBuf::from(d),
        (None, None, Some(t)) => data_root().join(t),
        (None, None, None) => return Err(CliError::Config("no dataset known for this checkpoint; pass --data".into())),
    };
    let max_len = a
        .max_len
        .unwrap_or_else(|| meta.extra["max_len"].as_u64().unwrap_or(0) as usize);
    let data = Dataset::load(&data_dir, max_len)?;
    let examples = data.part(&a.split)?;
    let report = eval::evaluate(&model, examples, max_steps(&meta))?;
    let table = report.length_table(&length_histogram(&data.train));
    let mut text = format!(
        "{} accuracy {:.4} ({}/{})\n{table}",
        a.split, report.accuracy, report.correct, report.total
    );
    for f in &report.failures {
        text += &format!("miss\t{}\t{}\t{}\n", f.command, f.predicted, f.target);
    }
    emit(&text)?;
    if let Some(p) = &a.dump {
        fs::write(p, report.dump()).map_err(runtime)?;
    }
    if let Some(p) = &a.table {
        fs::write(p, table).map_err(runtime)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- trees

/// Derivation dump for one command.
pub fn tree_text(model: &Model, command: &str, max_steps: usize) -> std::result::Result<String, ModelError> {
    let words: Vec<String> = command.split_whitespace().map(str::to_string).collect();
    let tr = eval::infer(model, &words, max_steps)?;
    let (steps, bracketed) = tr.derivation(model);
    let mut s = format!("> {}\n  tree {bracketed}\n", words.join(" "));
    for (i, st) in steps.iter().enumerate() {
        s += &format!("  {:>2}. {st}\n", i + 1);
    }
    let out: Vec<&str> = tr.output.actions().into_iter().map(|a| model.vocab.dst[a].as_str()).collect();
    match &tr.abort_reason {
        Some(r) if tr.aborted => s += &format!("  aborted: {r}\n"),
        _ => s += &format!("  out {}\n", out.join(" ")),
    }
    Ok(s)
}

fn cmd_trees(a: &TreesArgs) -> Result<()> {
    let (model, meta) = load_checkpoint(&a.checkpoint)?;
    let text = fs::read_to_string(&a.commands)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.commands.display())))?;
    let mut bad = 0;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match tree_text(&model, line, max_steps(&meta)) {
            Ok(s) => emit(&s)?,
            Err(e) => {
                bad += 1;
                eprintln!("line {}: {e}", n + 1);
            }
        }
    }
    if bad > 0 {
        return Err(CliError::Data(format!("{bad} command line(s) could not be processed")));
    }
    Ok(())
}
