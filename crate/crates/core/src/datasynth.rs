//! Synthetic "video description" data.
//!
//! A video is a script of `(action, object)` events. Each event becomes one
//! feature vector, the sum of a fixed random action code and object code
//! (unit variance per element, so encoder noise sigma lives on the feature
//! scale) plus a little Gaussian jitter, and one clause
//! "a person <action> the <object> ." of the caption.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{tokenize, CaptionSet};
use crate::model::{EOS, RESERVED_TOKENS};
use crate::rng::{Purpose, RngStreams, DEFAULT_SEED};
use crate::tensor::Tensor;

const ACTION_WORDS: [&str; 16] = [
    "opens", "closes", "lifts", "pushes", "pulls", "drops", "throws", "kicks", "washes", "paints", "carries", "folds",
    "cuts", "fills", "shakes", "turns",
];
const OBJECT_WORDS: [&str; 16] = [
    "door", "box", "ball", "chair", "bottle", "bag", "cup", "book", "lamp", "plate", "rope", "towel", "basket",
    "drawer", "bucket", "jar",
];
const FILLER_WORDS: [&str; 3] = ["a", "person", "the"];

/// Words per event clause, after punctuation is stripped.
pub const CLAUSE_TOKENS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_actions: usize,
    pub n_objects: usize,
    pub events_per_video: usize,
    pub feat_dim: usize,
    /// Standard deviation of the jitter added to every feature; unrelated
    /// to the training-time noise curriculum.
    pub noise_floor: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_actions: 8,
            n_objects: 8,
            events_per_video: 3,
            feat_dim: 16,
            noise_floor: 0.05,
            n_train: 512,
            n_val: 128,
            seed: DEFAULT_SEED,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("n_actions", self.n_actions),
            ("n_objects", self.n_objects),
            ("events_per_video", self.events_per_video),
            ("feat_dim", self.feat_dim),
            ("n_train", self.n_train),
            ("n_val", self.n_val),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            problems.push(format!("noise_floor must be finite and >= 0, got {}", self.noise_floor));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(self.n_actions, self.n_objects)
    }

    /// Target length in tokens, EOS included.
    pub fn caption_tokens(&self) -> usize {
        self.events_per_video * CLAUSE_TOKENS + 1
    }

    /// Number of distinct scripts, saturating at `usize::MAX`.
    pub fn script_space(&self) -> usize {
        let pairs = self.n_actions.saturating_mul(self.n_objects);
        (0..self.events_per_video).fold(1usize, |acc, _| acc.saturating_mul(pairs))
    }

    /// Errors unless every token id and both sequence lengths fit the model.
    pub fn check_fits(&self, model: &crate::model::ModelConfig) -> Result<()> {
        let mut problems = Vec::new();
        let v = self.vocabulary().len();
        if v > model.vocab_size {
            problems.push(format!(
                "synthetic vocabulary needs {v} ids but model vocab_size is {}",
                model.vocab_size
            ));
        }
        if self.feat_dim != model.feat_dim {
            problems.push(format!(
                "feat_dim {} differs from model feat_dim {}",
                self.feat_dim, model.feat_dim
            ));
        }
        if self.events_per_video > model.max_src_len {
            problems.push(format!(
                "{} events exceed model max_src_len {}",
                self.events_per_video, model.max_src_len
            ));
        }
        if self.caption_tokens() > model.max_tgt_len {
            problems.push(format!(
                "captions of {} tokens exceed model max_tgt_len {}",
                self.caption_tokens(),
                model.max_tgt_len
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Token ids: BOS/EOS/PAD, then "a", "person", "the", the action words and
/// the object words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    n_actions: usize,
}

impl Vocabulary {
    pub fn new(n_actions: usize, n_objects: usize) -> Self {
        let mut words: Vec<String> = ["<bos>", "<eos>", "<pad>"].iter().map(|s| s.to_string()).collect();
        words.extend(FILLER_WORDS.iter().map(|s| s.to_string()));
        words.extend((0..n_actions).map(action_word));
        words.extend((0..n_objects).map(object_word));
        Self { words, n_actions }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.words.iter().position(|w| w == word)
    }

    fn action_id(&self, a: usize) -> usize {
        RESERVED_TOKENS + FILLER_WORDS.len() + a
    }

    fn object_id(&self, o: usize) -> usize {
        RESERVED_TOKENS + FILLER_WORDS.len() + self.n_actions + o
    }

    /// Ids of a caption string, punctuation dropped; unknown words error.
    pub fn encode(&self, caption: &str) -> Result<Vec<usize>> {
        tokenize(caption)
            .iter()
            .map(|w| {
                self.id(w)
                    .filter(|&i| i >= RESERVED_TOKENS)
                    .ok_or_else(|| Error::Input(format!("word '{w}' is not in the vocabulary")))
            })
            .collect()
    }

    /// Words for `ids`; reserved and out-of-range ids are skipped.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter(|&&i| i >= RESERVED_TOKENS)
            .filter_map(|&i| self.words.get(i).cloned())
            .collect()
    }
}

fn action_word(i: usize) -> String {
    ACTION_WORDS
        .get(i)
        .map_or_else(|| format!("action{i}"), |w| w.to_string())
}

fn object_word(i: usize) -> String {
    OBJECT_WORDS
        .get(i)
        .map_or_else(|| format!("object{i}"), |w| w.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `[events_per_video, feat_dim]`
    pub features: Tensor,
    pub caption: String,
    /// Caption ids followed by EOS.
    pub tokens: Vec<usize>,
    pub script: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

pub fn caption_for(script: &[(usize, usize)]) -> String {
    let mut s = String::new();
    for (i, &(a, o)) in script.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "a person {} the {} .", action_word(a), object_word(o));
    }
    s
}

fn script_tokens(vocab: &Vocabulary, script: &[(usize, usize)]) -> Vec<usize> {
    let a = vocab.id("a").expect("filler");
    let person = vocab.id("person").expect("filler");
    let the = vocab.id("the").expect("filler");
    let mut out = Vec::with_capacity(script.len() * CLAUSE_TOKENS + 1);
    for &(act, obj) in script {
        out.extend_from_slice(&[a, person, vocab.action_id(act), the, vocab.object_id(obj)]);
    }
    out.push(EOS);
    out
}

/// Builds both splits from `config.seed`.
///
/// When the script space holds at least `n_train + n_val` scripts, every
/// sample gets a distinct script, so the splits are disjoint. Otherwise
/// scripts are drawn independently.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let streams = RngStreams::new(config.seed);
    let vocab = config.vocabulary();
    let f = config.feat_dim;

    // Each half carries variance 1/2, so the sum has unit variance per element.
    let mut code_rng = streams.stream(Purpose::Data, &[0]);
    let mut code = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                (0..f)
                    .map(|_| std::f64::consts::FRAC_1_SQRT_2 * code_rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect()
    };
    let action_codes = code(config.n_actions);
    let object_codes = code(config.n_objects);

    let total = config.n_train + config.n_val;
    let unique = config.script_space() >= total;
    let mut script_rng = streams.stream(Purpose::Data, &[1]);
    let mut seen = BTreeSet::new();
    let mut scripts = Vec::with_capacity(total);
    while scripts.len() < total {
        let script: Vec<(usize, usize)> = (0..config.events_per_video)
            .map(|_| {
                (
                    script_rng.gen_range(0..config.n_actions),
                    script_rng.gen_range(0..config.n_objects),
                )
            })
            .collect();
        if unique && !seen.insert(script.clone()) {
            continue;
        }
        scripts.push(script);
    }

    let mut jitter_rng = streams.stream(Purpose::Data, &[2]);
    let mut samples: Vec<Sample> = scripts
        .into_iter()
        .enumerate()
        .map(|(i, script)| {
            let mut data = Vec::with_capacity(script.len() * f);
            for &(a, o) in &script {
                for (&ca, &co) in action_codes[a].iter().zip(&object_codes[o]) {
                    let z: f64 = jitter_rng.sample(StandardNormal);
                    data.push(ca + co + config.noise_floor * z);
                }
            }
            let index = if i < config.n_train { i } else { i - config.n_train };
            Sample {
                id: sample_id(index),
                features: Tensor::new(vec![script.len(), f], data).expect("shape matches"),
                caption: caption_for(&script),
                tokens: script_tokens(&vocab, &script),
                script,
            }
        })
        .collect();
    let val = samples.split_off(config.n_train);
    Ok(Dataset {
        vocab,
        train: samples,
        val,
    })
}

/// `synth-0000`, `synth-0001`, ... numbered within a split.
pub fn sample_id(index: usize) -> String {
    format!("synth-{index:04}")
}

/// Reference-only caption sets for `split`. With `ground_truth_candidates`
/// each candidate is its own reference; otherwise candidates start empty.
pub fn to_caption_corpus(split: &[Sample], ground_truth_candidates: bool) -> Result<Vec<CaptionSet>> {
    if split.is_empty() {
        return Err(Error::Input("split is empty".into()));
    }
    split
        .iter()
        .map(|s| {
            let reference = tokenize(&s.caption);
            let candidate = if ground_truth_candidates {
                reference.clone()
            } else {
                Vec::new()
            };
            CaptionSet::new(s.id.clone(), candidate, vec![reference])
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    features: Vec<Vec<f64>>,
    caption: String,
}

/// One JSON object per line: `{"id", "features", "caption"}`.
pub fn to_jsonl(split: &[Sample]) -> String {
    let mut out = String::new();
    for s in split {
        let (rows, _) = s.features.dims2().expect("features are 2-d");
        let rec = Record {
            id: s.id.clone(),
            features: (0..rows).map(|r| s.features.row(r).to_vec()).collect(),
            caption: s.caption.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, split: &[Sample]) -> Result<()> {
    std::fs::write(path, to_jsonl(split)).map_err(|e| Error::io(path, e))
}

/// Reads a split written by [`write_jsonl`], re-deriving token ids and
/// scripts from the captions.
pub fn read_jsonl(path: &Path, vocab: &Vocabulary) -> Result<Vec<Sample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |msg: String| Error::Input(format!("{}:{}: {msg}", path.display(), lineno + 1));
        let rec: Record = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        let rows = rec.features.len();
        let cols = rec.features.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || rec.features.iter().any(|r| r.len() != cols) {
            return Err(at("features must be a non-empty rectangular array".into()));
        }
        let features = Tensor::new(vec![rows, cols], rec.features.concat()).map_err(|e| at(e.to_string()))?;
        let mut tokens = vocab.encode(&rec.caption).map_err(|e| at(e.to_string()))?;
        let script = parse_script(vocab, &tokens).ok_or_else(|| at("caption does not follow the template".into()))?;
        tokens.push(EOS);
        out.push(Sample {
            id: rec.id,
            features,
            caption: rec.caption,
            tokens,
            script,
        });
    }
    Ok(out)
}

fn parse_script(vocab: &Vocabulary, ids: &[usize]) -> Option<Vec<(usize, usize)>> {
    if ids.is_empty() || ids.len() % CLAUSE_TOKENS != 0 {
        return None;
    }
    let first_action = vocab.action_id(0);
    let first_object = vocab.object_id(0);
    ids.chunks_exact(CLAUSE_TOKENS)
        .map(|c| {
            let ok = vocab.word(c[0]) == Some("a")
                && vocab.word(c[1]) == Some("person")
                && vocab.word(c[3]) == Some("the")
                && (first_action..first_object).contains(&c[2])
                && c[4] >= first_object;
            ok.then(|| (c[2] - first_action, c[4] - first_object))
        })
        .collect()
}
