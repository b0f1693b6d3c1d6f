//! Caption scores: BLEU@4, ROUGE-L, CIDEr-D, Div-n and RE-4.
//!
//! Each video is scored on its own and the corpus row is the plain mean of
//! the per-video rows. N-gram tables are ordered maps so every sum runs in
//! the same order and reports are bit-for-bit reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerator added to a zero n-gram match count when smoothing BLEU.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const ROUGE_BETA: f64 = 1.2;
pub const CIDER_SIGMA: f64 = 6.0;
const CIDER_N: usize = 4;
const CIDER_SCALE: f64 = 10.0;

/// Lowercases, deletes Unicode punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    static PUNCT: OnceLock<Regex> = OnceLock::new();
    let re = PUNCT.get_or_init(|| Regex::new(r"\p{P}").expect("valid regex"));
    let lowered = text.to_lowercase();
    re.replace_all(&lowered, "")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// One video's candidate paragraph and its references, already tokenized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionSet {
    pub video_id: String,
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl CaptionSet {
    pub fn new(video_id: impl Into<String>, candidate: Vec<String>, references: Vec<Vec<String>>) -> Result<Self> {
        let video_id = video_id.into();
        if references.is_empty() {
            return Err(Error::Input(format!("video {video_id} has no reference")));
        }
        Ok(Self {
            video_id,
            candidate,
            references,
        })
    }

    /// Tokenizes raw strings with [`tokenize`].
    pub fn from_text(video_id: impl Into<String>, candidate: &str, references: &[&str]) -> Result<Self> {
        Self::new(
            video_id,
            tokenize(candidate),
            references.iter().map(|r| tokenize(r)).collect(),
        )
    }
}

type Counts<'a> = BTreeMap<&'a [String], usize>;

fn ngram_counts(tokens: &[String], n: usize) -> Counts<'_> {
    let mut out = BTreeMap::new();
    if n > 0 && tokens.len() >= n {
        for g in tokens.windows(n) {
            *out.entry(g).or_insert(0) += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BleuSmoothing {
    /// Orders with no matches get [`BLEU_EPSILON`] in the numerator.
    #[default]
    Epsilon,
    /// Any order with no matches zeroes the score.
    None,
}

/// Sentence-level BLEU@4 with the default epsilon smoothing.
pub fn bleu4(candidate: &[String], references: &[Vec<String>]) -> f64 {
    bleu4_with(candidate, references, BleuSmoothing::Epsilon)
}

/// Geometric mean of clipped 1..4-gram precisions times the brevity penalty.
///
/// The effective reference length is the reference length closest to the
/// candidate's (the shorter one on ties). A candidate with no unigram match
/// scores 0 under either smoothing.
pub fn bleu4_with(candidate: &[String], references: &[Vec<String>], smoothing: BleuSmoothing) -> f64 {
    let c = candidate.len();
    if c == 0 || references.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: Counts<'_> = BTreeMap::new();
        for r in references {
            for (g, k) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(k);
            }
        }
        let matched: usize = cand
            .iter()
            .map(|(g, &k)| k.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let total = c.saturating_sub(n - 1);
        if matched == 0 {
            if n == 1 || smoothing == BleuSmoothing::None {
                return 0.0;
            }
            log_sum += (BLEU_EPSILON / total.max(1) as f64).ln();
        } else {
            log_sum += (matched as f64 / total as f64).ln();
        }
    }
    let r = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(0);
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * (log_sum / 4.0).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure with `beta = 1.2`, maximised over references.
pub fn rouge_l(candidate: &[String], references: &[Vec<String>]) -> f64 {
    let b2 = ROUGE_BETA * ROUGE_BETA;
    references
        .iter()
        .map(|r| {
            if candidate.is_empty() || r.is_empty() {
                return 0.0;
            }
            let l = lcs_len(candidate, r) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let p = l / candidate.len() as f64;
            let rec = l / r.len() as f64;
            (1.0 + b2) * p * rec / (rec + b2 * p)
        })
        .fold(0.0, f64::max)
}

/// Distinct n-grams over total words; 0 when fewer than `n` words.
pub fn div_n(tokens: &[String], n: usize) -> f64 {
    if n == 0 || tokens.len() < n {
        return 0.0;
    }
    ngram_counts(tokens, n).len() as f64 / tokens.len() as f64
}

pub fn div1(tokens: &[String]) -> f64 {
    div_n(tokens, 1)
}

pub fn div2(tokens: &[String]) -> f64 {
    div_n(tokens, 2)
}

/// Share of sliding 4-grams that repeat an earlier one:
/// `Σ max(count − 1, 0) / Σ count`.
pub fn re4(tokens: &[String]) -> f64 {
    let counts = ngram_counts(tokens, 4);
    let total: usize = counts.values().sum();
    if total == 0 {
        return 0.0;
    }
    let repeats: usize = counts.values().map(|&k| k - 1).sum();
    repeats as f64 / total as f64
}

struct CiderVec {
    vec: [BTreeMap<Vec<String>, f64>; CIDER_N],
    norm: [f64; CIDER_N],
    raw: [BTreeMap<Vec<String>, f64>; CIDER_N],
    raw_norm: [f64; CIDER_N],
    len: usize,
}

fn cider_vec(tokens: &[String], df: &BTreeMap<Vec<String>, usize>, log_n: f64) -> CiderVec {
    let mut v = CiderVec {
        vec: Default::default(),
        norm: [0.0; CIDER_N],
        raw: Default::default(),
        raw_norm: [0.0; CIDER_N],
        len: tokens.len(),
    };
    for n in 1..=CIDER_N {
        for (g, k) in ngram_counts(tokens, n) {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            let w = k as f64 * (log_n - d.ln());
            v.vec[n - 1].insert(g.to_vec(), w);
            v.norm[n - 1] += w * w;
            v.raw[n - 1].insert(g.to_vec(), k as f64);
            v.raw_norm[n - 1] += (k * k) as f64;
        }
        v.norm[n - 1] = v.norm[n - 1].sqrt();
        v.raw_norm[n - 1] = v.raw_norm[n - 1].sqrt();
    }
    v
}

fn clipped_cos(h: &BTreeMap<Vec<String>, f64>, r: &BTreeMap<Vec<String>, f64>, nh: f64, nr: f64) -> f64 {
    if nh == 0.0 || nr == 0.0 {
        return 0.0;
    }
    let dot: f64 = h
        .iter()
        .map(|(g, &hv)| r.get(g).map_or(0.0, |&rv| hv.min(rv) * rv))
        .sum();
    dot / (nh * nr)
}

/// CIDEr-D for every video of `corpus`, in corpus order.
///
/// Document frequencies count the videos whose reference set contains an
/// n-gram. When for some order both the candidate's and a reference's
/// tf-idf vectors vanish (every n-gram of that order occurs in every video,
/// as in a one-video corpus) that order falls back to raw term counts, so an
/// exact match still scores 10. Orders longer than both captions add
/// nothing, so an exact match shorter than four tokens scores below 10.
pub fn cider_d(corpus: &[CaptionSet]) -> Vec<f64> {
    let mut df: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for cs in corpus {
        let mut seen = BTreeSet::new();
        for r in &cs.references {
            for n in 1..=CIDER_N {
                seen.extend(ngram_counts(r, n).into_keys());
            }
        }
        for g in seen {
            *df.entry(g.to_vec()).or_insert(0) += 1;
        }
    }
    let log_n = (corpus.len().max(1) as f64).ln();
    let two_var = 2.0 * CIDER_SIGMA * CIDER_SIGMA;
    corpus
        .iter()
        .map(|cs| {
            if cs.references.is_empty() {
                return 0.0;
            }
            let h = cider_vec(&cs.candidate, &df, log_n);
            let mut total = 0.0;
            for r in &cs.references {
                let rv = cider_vec(r, &df, log_n);
                let delta = h.len as f64 - rv.len as f64;
                let penalty = (-(delta * delta) / two_var).exp();
                let mut sum_n = 0.0;
                for n in 0..CIDER_N {
                    let sim = if h.norm[n] == 0.0 && rv.norm[n] == 0.0 {
                        clipped_cos(&h.raw[n], &rv.raw[n], h.raw_norm[n], rv.raw_norm[n])
                    } else {
                        clipped_cos(&h.vec[n], &rv.vec[n], h.norm[n], rv.norm[n])
                    };
                    sum_n += sim * penalty;
                }
                total += sum_n / CIDER_N as f64;
            }
            CIDER_SCALE * total / cs.references.len() as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub video_id: String,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider_d: f64,
    pub div2: f64,
    pub re4: f64,
    /// Distinct-unigram ratio; reported in JSON only.
    pub div1: f64,
}

impl MetricRow {
    fn values(&self) -> [f64; 6] {
        [self.bleu4, self.rouge_l, self.cider_d, self.div2, self.re4, self.div1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub videos: Vec<MetricRow>,
    /// Arithmetic mean of `videos`, with `video_id` "mean".
    pub mean: MetricRow,
}

pub const REPORT_CSV_HEADER: &str = "video_id,bleu4,rouge_l,cider_d,div2,re4";

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for r in self.videos.iter().chain(std::iter::once(&self.mean)) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&r.video_id),
                r.bleu4,
                r.rouge_l,
                r.cider_d,
                r.div2,
                r.re4
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn corpus_report(corpus: &[CaptionSet]) -> Result<MetricReport> {
    corpus_report_with(corpus, BleuSmoothing::Epsilon)
}

/// Scores every video and appends the mean row. Div-2 and RE-4 look at the
/// candidate only.
pub fn corpus_report_with(corpus: &[CaptionSet], smoothing: BleuSmoothing) -> Result<MetricReport> {
    if corpus.is_empty() {
        return Err(Error::Input("cannot score an empty corpus".into()));
    }
    let cider = cider_d(corpus);
    let videos: Vec<MetricRow> = corpus
        .iter()
        .zip(cider)
        .map(|(cs, cider_d)| MetricRow {
            video_id: cs.video_id.clone(),
            bleu4: bleu4_with(&cs.candidate, &cs.references, smoothing),
            rouge_l: rouge_l(&cs.candidate, &cs.references),
            cider_d,
            div2: div2(&cs.candidate),
            re4: re4(&cs.candidate),
            div1: div1(&cs.candidate),
        })
        .collect();
    let mut sums = [0.0; 6];
    for r in &videos {
        for (s, v) in sums.iter_mut().zip(r.values()) {
            *s += v;
        }
    }
    let k = videos.len() as f64;
    let mean = MetricRow {
        video_id: "mean".into(),
        bleu4: sums[0] / k,
        rouge_l: sums[1] / k,
        cider_d: sums[2] / k,
        div2: sums[3] / k,
        re4: sums[4] / k,
        div1: sums[5] / k,
    };
    Ok(MetricReport { videos, mean })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptionEntry {
    candidate: String,
    references: Vec<String>,
}

/// Parses `{"<video_id>": {"candidate": "...", "references": ["...", ...]}}`.
/// Videos come back sorted by id.
pub fn parse_caption_json(text: &str) -> Result<Vec<CaptionSet>> {
    let map: BTreeMap<String, CaptionEntry> =
        serde_json::from_str(text).map_err(|e| Error::Input(format!("caption file: {e}")))?;
    map.into_iter()
        .map(|(id, e)| {
            let refs: Vec<&str> = e.references.iter().map(String::as_str).collect();
            CaptionSet::from_text(id, &e.candidate, &refs)
        })
        .collect()
}

pub fn read_caption_file(path: &Path) -> Result<Vec<CaptionSet>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_caption_json(&text).map_err(|e| match e {
        Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}
