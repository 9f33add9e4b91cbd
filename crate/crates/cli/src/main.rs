//! Command-line front end: synthesize data, train, score, fit thresholds,
//! evaluate, and run the on-line detector over standard input.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use storn::evaluation::Criterion;
use storn::pipeline::{
    evaluate, fit_online_thresholds, halves, model_input, score_offline_set, score_online_set, sequence_seed, Corpus,
    CorpusConfig, ThresholdTable,
};
use storn::scoring::{
    offline_csv, online_csv, parse_offline_csv, parse_online_csv, OfflineConfig, OnlineConfig, OnlineKind,
    ScoreError, StreamingScorer, DEFAULT_IS_SAMPLES, DEFAULT_PERCENTILE, DEFAULT_WINDOW,
};
use storn::seqmodel::{ModelDims, StornModel, SCORE_SAMPLES};
use storn::synthdata::{read_dataset, Dataset, JOINTS};
use storn::trainer::{train, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "storn", version, about = "STORN anomaly detection on multivariate time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize train/valid/test datasets into a directory.
    Generate(GenerateArgs),
    /// Fit a model on the training set of a corpus directory.
    Train(TrainArgs),
    /// Per-sequence scores (elbo, is_likelihood, map_dev, step_bound).
    ScoreOffline(ScoreOfflineArgs),
    /// Per-step scores (bound, bound_smoothed, bound_diff, grad_magnitude).
    ScoreOnline(ScoreOnlineArgs),
    /// Fit the twelve on-line thresholds on the fitting half.
    Thresholds(ThresholdArgs),
    /// Fit on one half, report metrics on the other.
    Evaluate(EvaluateArgs),
    /// On-line detection: frames on stdin, scores and verdicts on stdout.
    Stream(StreamArgs),
    /// Draw a trajectory from the model.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Anomaly-free sequences.
    #[arg(long = "n", alias = "normal", default_value_t = 320)]
    normal: usize,
    #[arg(long, default_value_t = 100)]
    anomalous: usize,
    /// Seconds per sequence.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = 1)]
    min_hits: usize,
    #[arg(long, default_value_t = 3)]
    max_hits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Corpus directory written by `generate`.
    #[arg(long)]
    data: PathBuf,
    /// `key = value` file; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch bounds as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 3)]
    latent: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args, Debug)]
struct ScoreOfflineArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset file, or a corpus directory (its test set is used).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IS_SAMPLES)]
    is_samples: usize,
    #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
    percentile: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone, Copy)]
struct OnlineArgs {
    /// Frames in the gradient window.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Latent sample paths per step.
    #[arg(long, default_value_t = SCORE_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl OnlineArgs {
    fn config(&self) -> OnlineConfig {
        OnlineConfig { samples: self.samples, window: self.window, seed: self.seed }
    }
}

#[derive(Args, Debug)]
struct ScoreOnlineArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    online: OnlineArgs,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[arg(long)]
    data: PathBuf,
    /// On-line score CSV from `score-online`.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Seed of the fitting/test split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    offline: Option<PathBuf>,
    #[arg(long)]
    online: Option<PathBuf>,
    /// Seed of the fitting/test split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for metrics.csv and localization.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StreamArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    thresholds: PathBuf,
    /// Position of the stream in a scored set; selects the same noise as
    /// `score-online` used for that sequence.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[command(flatten)]
    online: OnlineArgs,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 150)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure after arguments were accepted; exits with status 2.
struct RunError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for RunError {
    fn from(e: E) -> Self {
        RunError(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), RunError> {
    match command {
        Command::Generate(a) => generate(a)?,
        Command::Train(a) => train_cmd(a)?,
        Command::ScoreOffline(a) => score_offline(a)?,
        Command::ScoreOnline(a) => score_online(a)?,
        Command::Thresholds(a) => thresholds(a)?,
        Command::Evaluate(a) => evaluate_cmd(a)?,
        Command::Stream(a) => stream(a)?,
        Command::Sample(a) => sample(a)?,
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<StornModel> {
    StornModel::from_text(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn load_data(path: &Path) -> Result<Dataset> {
    let file = if path.is_dir() { path.join("test.csv") } else { path.to_path_buf() };
    read_dataset(&file).with_context(|| format!("loading {}", file.display()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let cfg = CorpusConfig {
        normal: a.normal,
        anomalous: a.anomalous,
        duration: a.duration,
        hits_per_sequence: (a.min_hits, a.max_hits),
        seed: a.seed,
    };
    info!("generate: {cfg:?}");
    let corpus = Corpus::generate(&cfg)?;
    corpus.write(&a.out)?;
    info!(
        "wrote {} train, {} valid, {} test sequences to {}",
        corpus.train.len(),
        corpus.valid.len(),
        corpus.test.len(),
        a.out.display()
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_text(&read(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.epochs {
        cfg.max_epochs = v;
        if a.patience.is_none() {
            cfg.patience = cfg.patience.min(v);
        }
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.patience {
        cfg.patience = v;
    }
    cfg.validate()?;
    let corpus = Corpus::read(&a.data)?;
    let dims = ModelDims { x_dim: corpus.train.x_dim, z_dim: a.latent, hidden_dim: a.hidden };
    info!("train: {dims:?}\n{cfg}");
    let (model, history) = train(StornModel::new(dims, cfg.seed)?, &corpus.train.inputs(), &corpus.valid.inputs(), &cfg)?;
    let best = history.best();
    info!("best epoch {} with validation bound {:.4}", best.epoch, best.valid_bound);
    write(&a.out, &model.to_text())?;
    if let Some(p) = &a.history {
        write(p, &history.to_csv())?;
    }
    Ok(())
}

fn score_offline(a: ScoreOfflineArgs) -> Result<()> {
    let cfg = OfflineConfig { is_samples: a.is_samples, percentile: a.percentile };
    info!("score-offline: {cfg:?}, seed {}", a.seed);
    let model = load_model(&a.model)?;
    let data = load_data(&a.data)?;
    let records = score_offline_set(&model, &data, &cfg, a.seed)?;
    write(&a.out, &offline_csv(&records))
}

fn score_online(a: ScoreOnlineArgs) -> Result<()> {
    let cfg = a.online.config();
    info!("score-online: {cfg:?}");
    let model = load_model(&a.model)?;
    let data = load_data(&a.data)?;
    let records = score_online_set(&model, &data, &cfg)?;
    write(&a.out, &online_csv(&records))
}

fn thresholds(a: ThresholdArgs) -> Result<()> {
    info!("thresholds: split seed {}", a.seed);
    let data = load_data(&a.data)?;
    let records = parse_online_csv(&read(&a.scores)?)?;
    let (fit, _) = halves(&data, a.seed);
    let table = fit_online_thresholds(&records, &data, &fit)?;
    write(&a.out, &table.to_csv())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    if a.offline.is_none() && a.online.is_none() {
        bail!("nothing to evaluate: pass --offline and/or --online");
    }
    info!("evaluate: split seed {}", a.seed);
    let data = load_data(&a.data)?;
    let offline = a.offline.as_deref().map(|p| read(p).and_then(|t| Ok(parse_offline_csv(&t)?))).transpose()?;
    let online = a.online.as_deref().map(|p| read(p).and_then(|t| Ok(parse_online_csv(&t)?))).transpose()?;
    let report = evaluate(&data, offline.as_deref(), online.as_deref(), a.seed)?;
    print!("{}", report.to_text());
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        if let Some(off) = &report.offline {
            write(&dir.join("metrics.csv"), &off.to_csv())?;
        }
        if !report.online.is_empty() {
            write(&dir.join("localization.csv"), &report.localization_csv())?;
        }
    }
    Ok(())
}

/// Parses `t,v1,...,vD`.
fn parse_frame(line: &str, dim: usize) -> Result<(usize, Vec<f64>), String> {
    let mut fields = line.split(',').map(str::trim);
    let t = fields
        .next()
        .and_then(|f| f.parse::<usize>().ok())
        .ok_or_else(|| "first field must be a step index".to_string())?;
    let x = fields.map(|f| f.parse::<f64>().map_err(|_| format!("bad value {f:?}"))).collect::<Result<Vec<_>, _>>()?;
    if x.len() != dim {
        return Err(format!("expected {dim} values, got {}", x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err("non-finite value".into());
    }
    Ok((t, x))
}

/// Output per frame: `t,bound,bound_smoothed,bound_diff,grad_magnitude,bits`.
/// The twelve bits run over (bound, smoothed, diff, grad) × (criterion 1, 2, 3);
/// `1` marks a normal verdict, `0` an anomaly.
fn stream(a: StreamArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let table = ThresholdTable::from_csv(&read(&a.thresholds)?)?;
    let cfg = OnlineConfig { seed: sequence_seed(a.online.seed, a.index), ..a.online.config() };
    info!("stream: {cfg:?} (base seed {}, index {})", a.online.seed, a.index);
    let order: Vec<_> = OnlineKind::ALL
        .iter()
        .flat_map(|&k| Criterion::ONLINE.map(|c| *table.get(k, c).expect("complete table")))
        .collect();
    let kinds: Vec<_> = OnlineKind::ALL.iter().flat_map(|&k| [k; 3]).collect();
    let mut scorer = StreamingScorer::new(&model, cfg)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (n, line) in io::stdin().lock().lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (t, x) = match parse_frame(&line, model.dims().x_dim) {
            Ok(v) => v,
            Err(msg) => {
                eprintln!("line {}: {msg}", n + 1);
                continue;
            }
        };
        let x = model_input(&model, std::slice::from_ref(&x))?.remove(0);
        let f = match scorer.push(t, &x) {
            Err(e @ ScoreError::OutOfOrder { .. }) => bail!("line {}: {e}", n + 1),
            r => r?,
        };
        let bits: String =
            kinds.iter().zip(&order).map(|(&k, th)| if th.is_anomalous(f.get(k)) { '0' } else { '1' }).collect();
        writeln!(out, "{},{:?},{:?},{:?},{:?},{bits}", f.t, f.bound, f.smoothed, f.diff, f.grad)?;
        out.flush()?;
    }
    Ok(())
}

fn sample(a: SampleArgs) -> Result<()> {
    info!("sample: len {}, seed {}", a.len, a.seed);
    let model = load_model(&a.model)?;
    let mut x = model.sample_sequence(a.len, a.seed)?;
    if let Some(norm) = model.norm() {
        x = norm.denormalize(&x)?;
    }
    let mut text = String::from("t");
    for j in 0..x.first().map_or(JOINTS, Vec::len) {
        text.push_str(&format!(",x{j}"));
    }
    text.push('\n');
    for (t, row) in x.iter().enumerate() {
        text.push_str(&t.to_string());
        for v in row {
            text.push_str(&format!(",{v:?}"));
        }
        text.push('\n');
    }
    match &a.out {
        Some(p) => write(p, &text),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}
