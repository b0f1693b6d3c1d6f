//! Training recipe, evaluation, run directories and ablation studies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::datasynth::{self, Dataset, Sample, SynthConfig, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::{corpus_report, tokenize, CaptionSet, MetricReport, MetricRow};
use crate::model::{Batch, Curriculum, DescriberModel, ModelConfig, StepRngs};
use crate::rng::{Purpose, RngStreams, DEFAULT_SEED};
use crate::schedules::{DropoutMode, DropoutSchedule, NoiseMode, NoiseSchedule};
use crate::tensor::{read_checkpoint, write_checkpoint, Tensor};

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run directory name under the runs root.
    pub name: String,
    pub model: ModelConfig,
    pub synth: SynthConfig,
    pub epochs: u32,
    pub batch_size: usize,
    pub lr_base: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Decoupled: applied to the weights directly, outside the moments.
    pub weight_decay: f64,
    pub adam_eps: f64,
    pub warmup_epochs: u32,
    pub epsilon_smoothing: f64,
    pub noise: NoiseMode,
    pub dropout: DropoutMode,
    pub seed: u64,
    /// Fill the `seconds` log column. Off by default so logs stay
    /// byte-identical across repeated runs.
    pub log_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "desk".into(),
            model: ModelConfig::default(),
            synth: SynthConfig::default(),
            epochs: 30,
            batch_size: 4,
            lr_base: 1e-4,
            beta1: 0.9,
            beta2: 0.99,
            weight_decay: 0.01,
            adam_eps: 1e-8,
            warmup_epochs: 5,
            epsilon_smoothing: 0.1,
            noise: NoiseMode::Scheduled(NoiseSchedule::default()),
            dropout: DropoutMode::Scheduled(DropoutSchedule::default()),
            seed: DEFAULT_SEED,
            log_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Uses `seed` for every stream, the synthetic data included.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synth.seed = seed;
        self
    }

    pub fn curriculum(&self) -> Curriculum {
        Curriculum {
            noise: self.noise,
            dropout: self.dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for r in [
            self.model.validate(),
            self.synth.validate(),
            self.noise.validate(),
            self.dropout.validate(),
        ] {
            if let Err(e) = r {
                problems.push(e.to_string());
            }
        }
        if self.model.validate().is_ok() && self.synth.validate().is_ok() {
            if let Err(e) = self.synth.check_fits(&self.model) {
                problems.push(e.to_string());
            }
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".into());
        }
        if !(self.lr_base > 0.0 && self.lr_base.is_finite()) {
            problems.push(format!("lr_base must be positive, got {}", self.lr_base));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                problems.push(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            problems.push(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            problems.push(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if !(0.0..1.0).contains(&self.epsilon_smoothing) {
            problems.push(format!(
                "epsilon_smoothing must lie in [0, 1), got {}",
                self.epsilon_smoothing
            ));
        }
        // epochs = 0 is allowed and produces an untrained checkpoint
        if self.epochs > 0 && self.warmup_epochs > self.epochs {
            problems.push(format!(
                "warmup_epochs {} exceeds epochs {}",
                self.warmup_epochs, self.epochs
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.synth.n_train.div_ceil(self.batch_size.max(1)) as u64
    }
}

/// Linear per-step warm-up from 0 to `lr_base` over the first
/// `warmup_epochs` epochs, then constant.
pub fn lr_at(config: &ExperimentConfig, global_step: u64, steps_per_epoch: u64) -> f64 {
    let warm = config.warmup_epochs as u64 * steps_per_epoch;
    if global_step >= warm {
        config.lr_base
    } else {
        config.lr_base * global_step as f64 / warm as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One Adam update with bias correction. Weight decay shrinks the weights
/// first (`θ ← θ − lr·wd·θ`), then the moment-based step is applied.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, hp: &AdamHyper) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Contract(format!(
            "adam_step got {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::Contract(format!(
                "adam_step shape mismatch at slot {i}: param {:?}, grad {:?}, moment {:?}",
                p.shape(),
                g.shape(),
                state.m[i].shape()
            )));
        }
    }
    state.t += 1;
    let bc1 = 1.0 - hp.beta1.powf(state.t as f64);
    let bc2 = 1.0 - hp.beta2.powf(state.t as f64);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let (m, v) = (m.data_mut(), v.data_mut());
        for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * gj;
            v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *w -= hp.lr * hp.weight_decay * *w;
            *w -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: u32,
    /// Mean training-mode loss over the epoch's steps.
    pub loss: f64,
    pub sigma: f64,
    pub delta: f64,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    pub seconds: Option<f64>,
}

pub const LOG_CSV_HEADER: &str = "epoch,loss,sigma,delta,lr,seconds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub rows: Vec<EpochRow>,
    /// Evaluation-mode loss over the training split before the first step.
    pub initial_loss: f64,
    /// Evaluation-mode loss over the training split after the last step.
    pub final_loss: f64,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOG_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let secs = r.seconds.map(|s| format!("{s:.3}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", r.epoch, r.loss, r.sigma, r.delta, r.lr, secs);
        }
        out
    }
}

fn make_batch(samples: &[&Sample]) -> Result<Batch> {
    let feats: Vec<Tensor> = samples.iter().map(|s| s.features.clone()).collect();
    let targets: Vec<Vec<usize>> = samples.iter().map(|s| s.tokens.clone()).collect();
    Batch::new(Tensor::stack(&feats)?, &targets)
}

/// Evaluation-mode, label-smoothed loss averaged over all target tokens.
pub fn split_loss(model: &DescriberModel, split: &[Sample], batch_size: usize, epsilon: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    let mut rngs = StepRngs::new(&RngStreams::default(), &[]);
    for chunk in split.chunks(batch_size.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let batch = make_batch(&refs)?;
        let n = batch.targets.iter().filter(|&&t| t != crate::model::PAD).count();
        let loss = model.forward_loss(&batch, 0, &Curriculum::OFF, epsilon, &mut rngs, false)?;
        total += loss * n as f64;
        count += n;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

pub struct TrainOutcome {
    pub model: DescriberModel,
    pub log: TrainingLog,
    pub data: Dataset,
}

pub fn train(config: &ExperimentConfig) -> Result<TrainOutcome> {
    train_with_progress(config, &mut |_| {})
}

/// Runs the full recipe. `progress` sees each epoch row as it completes.
pub fn train_with_progress(config: &ExperimentConfig, progress: &mut dyn FnMut(&EpochRow)) -> Result<TrainOutcome> {
    config.validate()?;
    let data = datasynth::generate(&config.synth)?;
    let streams = RngStreams::new(config.seed);
    let mut model = DescriberModel::init(config.model.clone(), &streams)?;
    let curriculum = config.curriculum();
    let eps = config.epsilon_smoothing;
    let spe = config.steps_per_epoch();
    let initial_loss = split_loss(&model, &data.train, config.batch_size, eps)?;

    let mut adam = AdamState::new(model.params());
    let mut rows = Vec::with_capacity(config.epochs as usize);
    let mut global_step = 0u64;
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut streams.stream(Purpose::Shuffle, &[epoch as u64]));
        let (sigma, delta) = curriculum.levels(epoch);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for (step, idx) in order.chunks(config.batch_size).enumerate() {
            let samples: Vec<&Sample> = idx.iter().map(|&i| &data.train[i]).collect();
            let batch = make_batch(&samples)?;
            let mut rngs = StepRngs::new(&streams, &[epoch as u64, step as u64]);
            let (loss, grads) = model.loss_and_grads(&batch, epoch, &curriculum, eps, &mut rngs, true)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::Numeric {
                    epoch: epoch as usize,
                    step,
                });
            }
            lr = lr_at(config, global_step, spe);
            let hp = AdamHyper {
                lr,
                beta1: config.beta1,
                beta2: config.beta2,
                weight_decay: config.weight_decay,
                eps: config.adam_eps,
            };
            adam_step(model.params_mut(), &grads, &mut adam, &hp)?;
            model.round_params_to_f32();
            loss_sum += loss;
            global_step += 1;
        }
        let row = EpochRow {
            epoch,
            loss: loss_sum / spe as f64,
            sigma,
            delta,
            lr,
            seconds: config.log_wall_time.then(|| started.elapsed().as_secs_f64()),
        };
        progress(&row);
        rows.push(row);
    }
    let final_loss = if config.epochs == 0 {
        initial_loss
    } else {
        split_loss(&model, &data.train, config.batch_size, eps)?
    };
    Ok(TrainOutcome {
        model,
        log: TrainingLog {
            rows,
            initial_loss,
            final_loss,
        },
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSource {
    /// Greedy decoding from the model.
    Model,
    /// Ground truth as its own candidate; checks the scoring pipeline.
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    /// `(video_id, decoded words)` in split order.
    pub predictions: Vec<(String, Vec<String>)>,
    /// Fraction of samples whose decoded words equal the reference exactly.
    pub exact_match: f64,
}

pub fn evaluate(
    model: &DescriberModel,
    vocab: &Vocabulary,
    split: &[Sample],
    source: CandidateSource,
) -> Result<Evaluation> {
    if split.is_empty() {
        return Err(Error::Input("cannot evaluate an empty split".into()));
    }
    if vocab.len() > model.config().vocab_size {
        return Err(Error::Config(format!(
            "split vocabulary has {} ids but the model only {}",
            vocab.len(),
            model.config().vocab_size
        )));
    }
    let max_len = model.config().max_tgt_len;
    let mut corpus = Vec::with_capacity(split.len());
    let mut predictions = Vec::with_capacity(split.len());
    let mut exact = 0usize;
    for s in split {
        let reference = tokenize(&s.caption);
        let words = match source {
            CandidateSource::GroundTruth => reference.clone(),
            CandidateSource::Model => vocab.decode(&model.greedy_decode(&s.features, max_len)?),
        };
        if words == reference {
            exact += 1;
        }
        corpus.push(CaptionSet::new(s.id.clone(), words.clone(), vec![reference])?);
        predictions.push((s.id.clone(), words));
    }
    Ok(Evaluation {
        report: corpus_report(&corpus)?,
        predictions,
        exact_match: exact as f64 / split.len() as f64,
    })
}

/// Loads a checkpoint written for `model_config` and evaluates it.
pub fn evaluate_checkpoint(
    path: &Path,
    model_config: &ModelConfig,
    vocab: &Vocabulary,
    split: &[Sample],
) -> Result<Evaluation> {
    let ckpt = read_checkpoint(path)?;
    let model = DescriberModel::from_checkpoint(model_config.clone(), &ckpt)?;
    evaluate(&model, vocab, split, CandidateSource::Model)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub log: PathBuf,
    pub checkpoint: PathBuf,
    pub report: PathBuf,
}

impl RunPaths {
    pub fn new(runs_root: &Path, name: &str) -> Self {
        let dir = runs_root.join(name);
        Self {
            config: dir.join("config.json"),
            log: dir.join("log.csv"),
            checkpoint: dir.join("model.ckpt"),
            report: dir.join("report.json"),
            dir,
        }
    }
}

pub struct RunResult {
    pub outcome: TrainOutcome,
    pub evaluation: Evaluation,
    pub paths: RunPaths,
}

/// Trains, evaluates on the validation split and writes
/// `<runs_root>/<name>/{config.json, log.csv, model.ckpt, report.json}`.
pub fn run_to_dir(
    config: &ExperimentConfig,
    runs_root: &Path,
    progress: &mut dyn FnMut(&EpochRow),
) -> Result<RunResult> {
    config.validate()?;
    let paths = RunPaths::new(runs_root, &config.name);
    std::fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
    std::fs::write(&paths.config, config.to_json() + "\n").map_err(|e| Error::io(&paths.config, e))?;
    let outcome = train_with_progress(config, progress)?;
    std::fs::write(&paths.log, outcome.log.to_csv()).map_err(|e| Error::io(&paths.log, e))?;
    write_checkpoint(&paths.checkpoint, &outcome.model.to_checkpoint())?;
    let evaluation = evaluate(
        &outcome.model,
        &outcome.data.vocab,
        &outcome.data.val,
        CandidateSource::Model,
    )?;
    evaluation.report.write_json(&paths.report)?;
    Ok(RunResult {
        outcome,
        evaluation,
        paths,
    })
}

/// Labelled rows of corpus-mean scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub label_columns: Vec<String>,
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub labels: Vec<String>,
    pub scores: MetricRow,
    pub exact_match: f64,
}

const SCORE_COLUMNS: [&str; 5] = ["bleu4", "rouge_l", "cider_d", "div2", "re4"];

fn score_values(r: &MetricRow) -> [f64; 5] {
    [r.bleu4, r.rouge_l, r.cider_d, r.div2, r.re4]
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut header: Vec<&str> = self.label_columns.iter().map(String::as_str).collect();
        header.extend(SCORE_COLUMNS);
        let mut out = header.join(",");
        out.push('\n');
        for r in &self.rows {
            let mut cells = r.labels.clone();
            cells.extend(score_values(&r.scores).iter().map(|v| v.to_string()));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Fixed-width text, scores to four decimals.
    pub fn to_text(&self) -> String {
        let mut header: Vec<String> = self.label_columns.clone();
        header.extend(SCORE_COLUMNS.iter().map(|s| s.to_string()));
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = r.labels.clone();
                cells.extend(score_values(&r.scores).iter().map(|v| format!("{v:.4}")));
                cells
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                std::iter::once(&header[c])
                    .chain(body.iter().map(|r| &r[c]))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&body) {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| format!("{cell:<w$}"))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Runs `cells` on up to `jobs` threads and returns results in input order.
fn run_cells<T: Send>(
    cells: &[ExperimentConfig],
    jobs: usize,
    runs_root: Option<&Path>,
    f: impl Fn(&ExperimentConfig, &RunResult) -> T + Sync,
) -> Result<Vec<T>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    let scratch = tempdir_for_cells(runs_root)?;
    let root = runs_root.map(Path::to_path_buf).unwrap_or_else(|| scratch.clone());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let r = run_to_dir(&cells[i], &root, &mut |_| {}).map(|run| f(&cells[i], &run));
                results.lock().expect("no poisoned cell")[i] = Some(r);
            });
        }
    });
    if runs_root.is_none() {
        let _ = std::fs::remove_dir_all(&scratch);
    }
    results
        .into_inner()
        .expect("no poisoned cell")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

fn tempdir_for_cells(runs_root: Option<&Path>) -> Result<PathBuf> {
    if runs_root.is_some() {
        return Ok(PathBuf::new());
    }
    let dir = std::env::temp_dir().join(format!("curdesc-cells-{}-{}", std::process::id(), unique_suffix()));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn unique_suffix() -> usize {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    COUNTER.fetch_add(1, Ordering::SeqCst)
}

fn ablation_row(labels: Vec<String>, run: &RunResult) -> AblationRow {
    AblationRow {
        labels,
        scores: run.evaluation.report.mean.clone(),
        exact_match: run.evaluation.exact_match,
    }
}

/// One scheduled-noise run plus one run per fixed sigma, everything else
/// shared. Rows: `approach, sigma` then the five scores.
pub fn ablate_noise(
    config: &ExperimentConfig,
    sigmas: &[f64],
    jobs: usize,
    runs_root: Option<&Path>,
) -> Result<AblationTable> {
    if sigmas.is_empty() {
        return Err(Error::Input("ablate_noise needs at least one fixed sigma".into()));
    }
    let scheduled = match config.noise {
        NoiseMode::Scheduled(s) => s,
        _ => NoiseSchedule::default(),
    };
    let mut cells = vec![ExperimentConfig {
        name: format!("{}-noise-scheduled", config.name),
        noise: NoiseMode::Scheduled(scheduled),
        ..config.clone()
    }];
    for &sigma in sigmas {
        cells.push(ExperimentConfig {
            name: format!("{}-noise-fixed-{sigma}", config.name),
            noise: NoiseMode::Fixed { sigma },
            ..config.clone()
        });
    }
    for c in &cells {
        c.validate()?;
    }
    let rows = run_cells(&cells, jobs, runs_root, |cell, run| {
        let labels = match cell.noise {
            NoiseMode::Fixed { sigma } => vec!["fixed noise".to_string(), sigma.to_string()],
            _ => vec!["scheduled noise".to_string(), "scheduled".to_string()],
        };
        ablation_row(labels, run)
    })?;
    Ok(AblationTable {
        label_columns: vec!["approach".into(), "sigma".into()],
        rows,
    })
}

/// The `(noise, dropout, mish)` toggles in table order.
pub const GRID_ORDER: [(bool, bool, bool); 8] = [
    (false, false, false),
    (true, false, false),
    (false, true, false),
    (false, false, true),
    (true, false, true),
    (false, true, true),
    (true, true, false),
    (true, true, true),
];

/// Config for one grid cell: "on" keeps `config`'s schedule (or the default
/// schedule if `config` has that component off); "off" disables it. The
/// activation is Mish or `baseline`.
pub fn grid_cell(
    config: &ExperimentConfig,
    noise: bool,
    dropout: bool,
    mish: bool,
    baseline: ActivationKind,
) -> ExperimentConfig {
    let mark = |b: bool| if b { "1" } else { "0" };
    let mut c = config.clone();
    c.name = format!("{}-grid-n{}d{}m{}", config.name, mark(noise), mark(dropout), mark(mish));
    c.noise = match (noise, config.noise) {
        (false, _) => NoiseMode::Off,
        (true, NoiseMode::Off) => NoiseMode::Scheduled(NoiseSchedule::default()),
        (true, other) => other,
    };
    c.dropout = match (dropout, config.dropout) {
        (false, _) => DropoutMode::Off,
        (true, DropoutMode::Off) => DropoutMode::Scheduled(DropoutSchedule::default()),
        (true, other) => other,
    };
    c.model.activation = if mish { ActivationKind::Mish } else { baseline };
    c
}

/// All eight on/off combinations of noise, dropout and Mish.
pub fn ablate_grid(
    config: &ExperimentConfig,
    baseline: ActivationKind,
    jobs: usize,
    runs_root: Option<&Path>,
) -> Result<AblationTable> {
    let cells: Vec<ExperimentConfig> = GRID_ORDER
        .iter()
        .map(|&(n, d, m)| grid_cell(config, n, d, m, baseline))
        .collect();
    for c in &cells {
        c.validate()?;
    }
    let tick = |b: bool| if b { "✓" } else { "✗" }.to_string();
    let rows = run_cells(&cells, jobs, runs_root, |cell, run| {
        let labels = vec![
            tick(!matches!(cell.noise, NoiseMode::Off)),
            tick(!matches!(cell.dropout, DropoutMode::Off)),
            tick(cell.model.activation == ActivationKind::Mish),
        ];
        ablation_row(labels, run)
    })?;
    Ok(AblationTable {
        label_columns: vec!["noise".into(), "dropout".into(), "mish".into()],
        rows,
    })
}
