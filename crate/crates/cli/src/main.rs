//! `evclass`: synthesize, slice, train, evaluate and inspect event-stream
//! classifiers.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric divergence during training.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use evclass::codec::{decode_events, read_annotations, render_frame};
use evclass::harness::{
    confusion_csv, eval_chunks, eval_tracks, predict, predictions_jsonl, prepare_examples, render_report,
    slice_files, slice_manifest, train, Checkpoint, ChunkDataset, EvalReport, NegativePolicy, Precision, Protocol,
    SliceConfig, TrainConfig,
};
use evclass::model::{EncoderConfig, Variant};
use evclass::synth::{write_dataset, SynthConfig};
use evclass::{SamplingSpec, Strategy};

#[derive(Debug, Parser)]
#[command(name = "evclass", version, about = "Flying-object classification on event-camera streams")]
struct Cli {
    /// Log filter, e.g. `info` or `evclass=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Cut annotated recordings into a chunk dataset.
    Slice(SliceArgs),
    /// Train a chunk classifier.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a chunk dataset.
    Eval(EvalArgs),
    /// Classify every annotated track of a recording.
    Predict(PredictArgs),
    /// Render accumulation frames or confusion matrices.
    #[command(subcommand)]
    Render(RenderCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplingFlag {
    Random,
    Recent,
    Fps,
}

impl From<SamplingFlag> for Strategy {
    fn from(f: SamplingFlag) -> Self {
        match f {
            SamplingFlag::Random => Strategy::Random,
            SamplingFlag::Recent => Strategy::MostRecent,
            SamplingFlag::Fps => Strategy::Fps,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EncoderFlag {
    Flat,
    Hierarchical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecisionFlag {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProtocolFlag {
    Chunk,
    Track,
}

/// Sampling overrides shared by `train` and `eval`.
#[derive(Debug, Args)]
struct SamplingArgs {
    #[arg(long, value_enum)]
    sampling: Option<SamplingFlag>,
    /// Points per chunk after sampling.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SamplingArgs {
    fn apply(&self, spec: &mut SamplingSpec) {
        if let Some(s) = self.sampling {
            spec.strategy = s.into();
        }
        if let Some(n) = self.points {
            spec.target_n = n;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON synth config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tracks_per_class: Option<usize>,
    /// Maximum track duration in microseconds.
    #[arg(long)]
    max_duration_us: Option<u64>,
}

#[derive(Debug, Args)]
struct SliceArgs {
    /// Output chunk dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Synthetic dataset manifest; splits are taken from it.
    #[arg(long, conflicts_with_all = ["events", "annotations"])]
    manifest: Option<PathBuf>,
    /// EVF1 recording (with --annotations).
    #[arg(long, requires = "annotations")]
    events: Option<PathBuf>,
    /// JSON-lines annotations (with --events).
    #[arg(long, requires = "events")]
    annotations: Option<PathBuf>,
    /// JSON slice config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    delta_us: Option<u64>,
    #[arg(long)]
    min_events: Option<usize>,
    /// Negative patches per recording: a count, `auto` or `off`.
    #[arg(long)]
    negatives: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Chunk dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// JSON training config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    encoder: Option<EncoderFlag>,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    precision: Option<PrecisionFlag>,
    #[arg(long)]
    no_class_weighting: bool,
    /// Write per-epoch metrics here as JSON.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    protocol: ProtocolFlag,
    #[arg(long, default_value = "test")]
    split: String,
    /// Overrides the checkpoint's sampling for evaluation.
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the confusion matrix as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    /// Output JSON lines (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum RenderCommand {
    /// Accumulate events of [t0, t1) into a PGM image.
    Frame {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        t0: u64,
        #[arg(long)]
        t1: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a saved report and optionally write its confusion matrix as CSV.
    Confusion {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Diverged(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Diverged(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Diverged(e) => e,
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

impl From<evclass::Error> for Failure {
    fn from(e: evclass::Error) -> Self {
        use evclass::harness::HarnessError;
        if e.is_divergence() {
            return Failure::Diverged(e.into());
        }
        match e {
            evclass::Error::Harness(HarnessError::InvalidConfig(_))
            | evclass::Error::Synth(evclass::synth::SynthError::InvalidConfig(_))
            | evclass::Error::Sampling(evclass::sampling::SamplingError::ZeroTarget)
            | evclass::Error::Model(evclass::model::ModelError::InvalidConfig(_)) => Failure::Usage(e.into()),
            other => Failure::Data(other.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(Failure::Usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(Failure::Usage)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Data)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CmdResult {
    std::fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Data)
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let mut config: SynthConfig = read_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.tracks_per_class {
        config.tracks_per_class = n;
    }
    if let Some(d) = a.max_duration_us {
        config.duration_us[1] = d;
    }
    config.validate().map_err(usage)?;
    let manifest = write_dataset(&config, &a.out)?;
    println!(
        "wrote {} recordings, {} tracks to {}",
        manifest.recordings.len(),
        manifest.tracks.len(),
        a.out.display()
    );
    Ok(())
}

fn parse_negatives(s: &str) -> Result<NegativePolicy, Failure> {
    match s {
        "auto" => Ok(NegativePolicy::Auto),
        "off" => Ok(NegativePolicy::Off),
        n => n
            .parse()
            .map(NegativePolicy::Count)
            .map_err(|_| usage(format!("--negatives expects a count, auto or off, got {n:?}"))),
    }
}

fn cmd_slice(a: SliceArgs) -> CmdResult {
    let mut config: SliceConfig = read_config(a.config.as_deref())?;
    if let Some(d) = a.delta_us {
        config.delta_us = d;
    }
    if let Some(m) = a.min_events {
        config.min_events = m;
    }
    if let Some(n) = &a.negatives {
        config.negatives = parse_negatives(n)?;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if config.delta_us == 0 || !evclass::codec::FRAME_US.is_multiple_of(config.delta_us) {
        return Err(usage("--delta-us must divide the 33000 us annotation frame"));
    }
    let summary = match (&a.manifest, &a.events, &a.annotations) {
        (Some(m), None, None) => {
            let dir = m.parent().unwrap_or(Path::new("."));
            slice_manifest(dir, &a.out, &config)?
        }
        (None, Some(e), Some(n)) => slice_files(e, n, &a.out, &config)?,
        _ => return Err(usage("slice needs --manifest, or --events with --annotations")),
    };
    println!(
        "{} chunks ({} negatives) from {} tracks; {} tracks rejected, {} chunks dropped",
        summary.chunks,
        summary.negatives,
        summary.tracks,
        summary.rejected_tracks,
        summary.dropped_chunks.values().sum::<u64>()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let mut config: TrainConfig = read_config(a.config.as_deref())?;
    if let Some(e) = a.encoder {
        let variant = match e {
            EncoderFlag::Flat => Variant::Flat,
            EncoderFlag::Hierarchical => Variant::Hierarchical,
        };
        if config.encoder.variant != variant {
            config.encoder = EncoderConfig::default_for(variant);
        }
    }
    a.sampling.apply(&mut config.sampling);
    if let Some(s) = a.sampling.seed {
        config.seed = s;
    }
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    if let Some(b) = a.batch_size {
        config.batch_size = b;
    }
    if let Some(lr) = a.lr {
        config.lr = lr;
    }
    if let Some(p) = a.precision {
        config.precision = match p {
            PrecisionFlag::F32 => Precision::F32,
            PrecisionFlag::F64 => Precision::F64,
        };
    }
    if a.no_class_weighting {
        config.class_weighting = false;
    }
    config.validate().map_err(usage)?;

    let data = ChunkDataset::load(&a.data)?;
    if data.summary.delta_us != config.delta_us {
        return Err(usage(format!(
            "dataset was sliced with {} us chunks but the config asks for {} us",
            data.summary.delta_us, config.delta_us
        )));
    }
    let train_set = prepare_examples(&data.split("train"), &config.sampling)?;
    let val_set = prepare_examples(&data.split("val"), &config.sampling)?;
    let outcome = train(&train_set, &val_set, &config)?;
    outcome.best.save(&a.out)?;
    if let Some(h) = &a.history {
        let json = serde_json::to_string_pretty(&outcome.history).expect("history serializes");
        write_bytes(h, json.as_bytes())?;
    }
    for log in &outcome.history {
        println!(
            "epoch {:>3}  loss {:.4}  train {:.4}  val {:.4}",
            log.epoch, log.mean_loss, log.train_accuracy, log.val_accuracy
        );
    }
    println!(
        "saved epoch {} (val accuracy {:.4}) to {}",
        outcome.best.header.epoch,
        outcome.best.header.val_accuracy,
        a.out.display()
    );
    Ok(())
}

fn write_report_files(report: &EvalReport, json: Option<&Path>, csv: Option<&Path>) -> CmdResult {
    if let Some(p) = json {
        let mut text = serde_json::to_string_pretty(report).expect("report serializes");
        text.push('\n');
        write_bytes(p, text.as_bytes())?;
    }
    if let Some(p) = csv {
        write_bytes(p, confusion_csv(report.confusion()).as_bytes())?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let mut checkpoint = Checkpoint::load(&a.checkpoint)?;
    a.sampling.apply(&mut checkpoint.header.sampling);
    if checkpoint.header.sampling.target_n == 0 {
        return Err(usage("--points must be at least 1"));
    }
    let data = ChunkDataset::load(&a.data)?;
    let report = match a.protocol {
        ProtocolFlag::Chunk => eval_chunks(&checkpoint, &data, &a.split)?,
        ProtocolFlag::Track => eval_tracks(&checkpoint, &data, &a.split)?,
    };
    debug_assert_eq!(
        report.protocol,
        match a.protocol {
            ProtocolFlag::Chunk => Protocol::Chunk,
            ProtocolFlag::Track => Protocol::Track,
        }
    );
    print!("{}", render_report(&report));
    write_report_files(&report, a.report.as_deref(), a.csv.as_deref())
}

fn cmd_predict(a: PredictArgs) -> CmdResult {
    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let stream = decode_events(&read_bytes(&a.events)?).map_err(evclass::Error::from)?;
    let text = String::from_utf8(read_bytes(&a.annotations)?)
        .context("annotations are not UTF-8")
        .map_err(Failure::Data)?;
    let ann = read_annotations(&text).map_err(evclass::Error::from)?;
    let out = predictions_jsonl(&predict(&checkpoint, &stream, &ann)?);
    match &a.out {
        Some(p) => write_bytes(p, out.as_bytes()),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn cmd_render(c: RenderCommand) -> CmdResult {
    match c {
        RenderCommand::Frame { events, t0, t1, out } => {
            if t0 > t1 {
                return Err(usage("--t0 must not exceed --t1"));
            }
            let stream = decode_events(&read_bytes(&events)?).map_err(evclass::Error::from)?;
            let frame = render_frame(&stream, t0, t1);
            write_bytes(&out, &frame.to_pgm())?;
            println!("{} events in [{t0}, {t1}) written to {}", frame.total(), out.display());
            Ok(())
        }
        RenderCommand::Confusion { report, csv } => {
            let report: EvalReport = serde_json::from_slice(&read_bytes(&report)?)
                .with_context(|| format!("parsing report {}", report.display()))
                .map_err(Failure::Data)?;
            print!("{}", render_report(&report));
            write_report_files(&report, None, csv.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "warn".into());
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Slice(a) => cmd_slice(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Render(c) => cmd_render(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
