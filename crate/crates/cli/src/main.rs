//! `curdesc` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input or configuration,
//! 3 runtime failure (non-finite loss, I/O).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use curdesc_core::datasynth::{self, Sample};
use curdesc_core::experiment::{self, CandidateSource, ExperimentConfig};
use curdesc_core::metrics::{self, BleuSmoothing, MetricReport};
use curdesc_core::schedules::{schedule_table, table_to_csv, DropoutMode, DropoutSchedule, NoiseMode, NoiseSchedule};
use curdesc_core::tensor::{read_checkpoint, CHECKPOINT_VERSION};
use curdesc_core::{ActivationKind, DescriberModel, Error};

const AFTER_HELP: &str = "Configuration precedence: command-line flags > --config file (JSON) > built-in defaults.\n\
Exit codes: 0 ok, 1 usage, 2 bad input/config, 3 runtime failure.";

#[derive(Parser)]
#[command(name = "curdesc", about = "Curriculum-regularized describer toolkit", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic train/val splits as JSON lines.
    Synth(SynthArgs),
    /// Train one model and write runs/<name>/{config.json, log.csv, model.ckpt, report.json}.
    Train(TrainArgs),
    /// Score a trained checkpoint on a split.
    Eval(EvalArgs),
    /// Score a caption file: {"<video_id>": {"candidate": "...", "references": ["..."]}}.
    EvalCaptions(EvalCaptionsArgs),
    /// Scheduled sigma versus a list of fixed sigmas.
    AblateNoise(AblateNoiseArgs),
    /// The eight on/off combinations of noise, dropout and Mish.
    AblateGrid(AblateGridArgs),
    /// Emit a noise or dropout schedule as CSV.
    Schedule(ScheduleArgs),
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON experiment config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every random stream, including data synthesis.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// off | scheduled | fixed=<sigma>
    #[arg(long, value_parser = parse_noise)]
    noise: Option<NoiseMode>,
    /// off | scheduled | fixed=<delta>
    #[arg(long, value_parser = parse_dropout)]
    dropout: Option<DropoutMode>,
    #[arg(long, value_parser = parse_activation)]
    activation: Option<ActivationKind>,
    /// Run name (directory under --runs-dir).
    #[arg(long)]
    name: Option<String>,
    /// Record per-epoch wall time in log.csv (makes logs run-dependent).
    #[arg(long)]
    log_wall_time: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Directory receiving train.jsonl and val.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value = "runs")]
    runs_dir: PathBuf,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitName {
    Train,
    Val,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory holding config.json and model.ckpt.
    #[arg(long)]
    run: PathBuf,
    /// Checkpoint to load instead of <run>/model.ckpt.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "val")]
    split: SplitName,
    /// JSON-lines split to score instead of regenerating one.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Score ground truth against itself (checks the pipeline).
    #[arg(long)]
    ground_truth: bool,
    /// Report destination; `.csv` writes CSV, anything else JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write decoded captions in the eval-captions input format.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct EvalCaptionsArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Report destination; `.csv` writes CSV, anything else JSON.
    #[arg(long)]
    out: PathBuf,
    /// BLEU without epsilon smoothing.
    #[arg(long)]
    unsmoothed: bool,
}

#[derive(Args)]
struct AblateNoiseArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3, 0.4, 0.5])]
    sigmas: Vec<f64>,
    /// Concurrent training runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Table destination; `.csv` writes CSV, anything else aligned text.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep each cell's run directory here.
    #[arg(long)]
    runs_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AblateGridArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Activation used in rows where Mish is off.
    #[arg(long, value_parser = parse_activation, default_value = "gelu")]
    baseline: ActivationKind,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleKind {
    Noise,
    Dropout,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, value_enum)]
    kind: ScheduleKind,
    #[arg(long, default_value_t = 0.3)]
    sigma_max: f64,
    #[arg(long, default_value_t = 0.25)]
    delta_max: f64,
    #[arg(long, default_value_t = 25)]
    e_max: u32,
    /// Last epoch in the table (rows run 0..=epochs).
    #[arg(long, default_value_t = 30)]
    epochs: u32,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_noise(s: &str) -> Result<NoiseMode, String> {
    match s {
        "off" => Ok(NoiseMode::Off),
        "scheduled" => Ok(NoiseMode::Scheduled(NoiseSchedule::default())),
        _ => match s.strip_prefix("fixed=") {
            Some(v) => v
                .parse()
                .map(|sigma| NoiseMode::Fixed { sigma })
                .map_err(|e| format!("bad sigma '{v}': {e}")),
            None => Err(format!("expected off, scheduled or fixed=<sigma>, got '{s}'")),
        },
    }
}

fn parse_dropout(s: &str) -> Result<DropoutMode, String> {
    match s {
        "off" => Ok(DropoutMode::Off),
        "scheduled" => Ok(DropoutMode::Scheduled(DropoutSchedule::default())),
        _ => match s.strip_prefix("fixed=") {
            Some(v) => v
                .parse()
                .map(|delta| DropoutMode::Fixed { delta })
                .map_err(|e| format!("bad delta '{v}': {e}")),
            None => Err(format!("expected off, scheduled or fixed=<delta>, got '{s}'")),
        },
    }
}

fn parse_activation(s: &str) -> Result<ActivationKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            c = c.with_seed(seed);
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.lr {
            c.lr_base = v;
        }
        if let Some(v) = self.noise {
            c.noise = v;
        }
        if let Some(v) = self.dropout {
            c.dropout = v;
        }
        if let Some(v) = self.activation {
            c.model.activation = v;
        }
        if let Some(v) = &self.name {
            c.name = v.clone();
        }
        if self.log_wall_time {
            c.log_wall_time = true;
        }
        c.validate()?;
        Ok(c)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn write_report(report: &MetricReport, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) if is_csv(p) => report.write_csv(p),
        Some(p) => report.write_json(p),
        None => Ok(()),
    }
}

fn print_mean(report: &MetricReport) {
    let m = &report.mean;
    println!(
        "videos={} bleu4={:.4} rouge_l={:.4} cider_d={:.4} div2={:.4} re4={:.4}",
        report.videos.len(),
        m.bleu4,
        m.rouge_l,
        m.cider_d,
        m.div2,
        m.re4
    );
}

fn cmd_synth(a: &SynthArgs) -> Result<(), Error> {
    let c = a.cfg.resolve()?;
    let ds = datasynth::generate(&c.synth)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    datasynth::write_jsonl(&a.out_dir.join("train.jsonl"), &ds.train)?;
    datasynth::write_jsonl(&a.out_dir.join("val.jsonl"), &ds.val)?;
    println!(
        "wrote {} train and {} val samples to {}",
        ds.train.len(),
        ds.val.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), Error> {
    let c = a.cfg.resolve()?;
    let quiet = a.quiet;
    let run = experiment::run_to_dir(&c, &a.runs_dir, &mut |r| {
        if !quiet {
            eprintln!(
                "epoch {:>3}  loss {:.4}  sigma {:.3}  delta {:.3}  lr {:.2e}",
                r.epoch, r.loss, r.sigma, r.delta, r.lr
            );
        }
    })?;
    println!(
        "run {}: train loss {:.4} -> {:.4}",
        run.paths.dir.display(),
        run.outcome.log.initial_loss,
        run.outcome.log.final_loss
    );
    print_mean(&run.evaluation.report);
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Error> {
    let c = ExperimentConfig::load(&a.run.join("config.json"))?;
    let ckpt_path = a.checkpoint.clone().unwrap_or_else(|| a.run.join("model.ckpt"));
    let model = DescriberModel::from_checkpoint(c.model.clone(), &read_checkpoint(&ckpt_path)?)?;
    let vocab = c.synth.vocabulary();
    let split: Vec<Sample> = match &a.data {
        Some(p) => datasynth::read_jsonl(p, &vocab)?,
        None => {
            let ds = datasynth::generate(&c.synth)?;
            match a.split {
                SplitName::Train => ds.train,
                SplitName::Val => ds.val,
            }
        }
    };
    let source = if a.ground_truth {
        CandidateSource::GroundTruth
    } else {
        CandidateSource::Model
    };
    let ev = experiment::evaluate(&model, &vocab, &split, source)?;
    write_report(&ev.report, a.out.as_deref())?;
    if let Some(p) = &a.predictions {
        let map: serde_json::Map<String, serde_json::Value> = ev
            .predictions
            .iter()
            .zip(&split)
            .map(|((id, words), s)| {
                (
                    id.clone(),
                    serde_json::json!({ "candidate": words.join(" "), "references": [s.caption] }),
                )
            })
            .collect();
        write_file(p, &(serde_json::to_string_pretty(&map).expect("json") + "\n"))?;
    }
    print_mean(&ev.report);
    println!("exact_match={:.4}", ev.exact_match);
    Ok(())
}

fn cmd_eval_captions(a: &EvalCaptionsArgs) -> Result<(), Error> {
    let corpus = metrics::read_caption_file(&a.pred)?;
    let smoothing = if a.unsmoothed {
        BleuSmoothing::None
    } else {
        BleuSmoothing::Epsilon
    };
    let report = metrics::corpus_report_with(&corpus, smoothing)?;
    write_report(&report, Some(&a.out))?;
    print_mean(&report);
    Ok(())
}

fn emit_table(table: &experiment::AblationTable, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) if is_csv(p) => write_file(p, &table.to_csv())?,
        Some(p) => write_file(p, &table.to_text())?,
        None => {}
    }
    print!("{}", table.to_text());
    Ok(())
}

fn cmd_ablate_noise(a: &AblateNoiseArgs) -> Result<(), Error> {
    let c = a.cfg.resolve()?;
    let table = experiment::ablate_noise(&c, &a.sigmas, a.jobs, a.runs_dir.as_deref())?;
    emit_table(&table, a.out.as_deref())
}

fn cmd_ablate_grid(a: &AblateGridArgs) -> Result<(), Error> {
    let c = a.cfg.resolve()?;
    let table = experiment::ablate_grid(&c, a.baseline, a.jobs, a.runs_dir.as_deref())?;
    emit_table(&table, a.out.as_deref())
}

fn cmd_schedule(a: &ScheduleArgs) -> Result<(), Error> {
    let rows = match a.kind {
        ScheduleKind::Noise => schedule_table(&NoiseSchedule::new(a.sigma_max, a.e_max)?, a.epochs),
        ScheduleKind::Dropout => schedule_table(&DropoutSchedule::new(a.delta_max, a.e_max)?, a.epochs),
    };
    let csv = table_to_csv(&rows);
    match &a.out {
        Some(p) => write_file(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::EvalCaptions(a) => cmd_eval_captions(a),
        Command::AblateNoise(a) => cmd_ablate_noise(a),
        Command::AblateGrid(a) => cmd_ablate_grid(a),
        Command::Schedule(a) => cmd_schedule(a),
    }
}

fn main() -> ExitCode {
    let version: &'static str = Box::leak(
        format!(
            "{} (checkpoint format CLVD v{CHECKPOINT_VERSION})",
            env!("CARGO_PKG_VERSION")
        )
        .into_boxed_str(),
    );
    let matches = match Cli::command().version(version).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = write!(std::io::stderr(), "{}", e.render());
                    ExitCode::from(1)
                }
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(std::io::stderr(), "{}", e.render());
            return ExitCode::from(1);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
