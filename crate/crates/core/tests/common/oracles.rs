//! Brute-force metric implementations, written for clarity rather than speed
//! and sharing no code with the library.

use std::collections::{HashMap, HashSet};

pub fn grams(t: &[String], n: usize) -> Vec<String> {
    if t.len() < n {
        return vec![];
    }
    (0..=t.len() - n).map(|i| t[i..i + n].join("\u{1}")).collect()
}

pub fn count(g: &[String]) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for x in g {
        *m.entry(x.clone()).or_default() += 1;
    }
    m
}

pub fn bleu_oracle(c: &[String], refs: &[Vec<String>]) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let mut p = 1.0f64;
    for n in 1..=4 {
        let cc = count(&grams(c, n));
        let mut matched = 0;
        for (g, k) in &cc {
            let best = refs
                .iter()
                .map(|r| count(&grams(r, n)).get(g).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            matched += (*k).min(best);
        }
        let total = c.len().saturating_sub(n - 1);
        if matched == 0 {
            if n == 1 {
                return 0.0;
            }
            p *= 1e-9 / total.max(1) as f64;
        } else {
            p *= matched as f64 / total as f64;
        }
    }
    let mut best_r = usize::MAX;
    for r in refs {
        let d = r.len().abs_diff(c.len());
        let bd = best_r.abs_diff(c.len());
        if d < bd || (d == bd && r.len() < best_r) {
            best_r = r.len();
        }
    }
    let bp = if c.len() < best_r {
        (1.0 - best_r as f64 / c.len() as f64).exp()
    } else {
        1.0
    };
    bp * p.powf(0.25)
}

pub fn is_subsequence(s: &[&String], t: &[String]) -> bool {
    let mut it = t.iter();
    s.iter().all(|x| it.any(|y| y == *x))
}

/// Longest common subsequence by enumerating every subsequence of `a`.
pub fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if sub.len() > best && is_subsequence(&sub, b) {
            best = sub.len();
        }
    }
    best
}

pub fn rouge_oracle(c: &[String], refs: &[Vec<String>]) -> f64 {
    let mut best = 0.0f64;
    for r in refs {
        let l = lcs_oracle(c, r) as f64;
        if l == 0.0 {
            continue;
        }
        let (p, rc) = (l / c.len() as f64, l / r.len() as f64);
        best = best.max(2.44 * p * rc / (rc + 1.44 * p));
    }
    best
}

pub fn cider_oracle(corpus: &[(Vec<String>, Vec<Vec<String>>)]) -> Vec<f64> {
    let n_docs = corpus.len() as f64;
    let mut df: HashMap<String, f64> = HashMap::new();
    for (_, refs) in corpus {
        let mut seen = HashSet::new();
        for r in refs {
            for n in 1..=4 {
                for g in grams(r, n) {
                    seen.insert(format!("{n}:{g}"));
                }
            }
        }
        for g in seen {
            *df.entry(g).or_default() += 1.0;
        }
    }
    let weights = |t: &[String], n: usize, raw: bool| -> HashMap<String, f64> {
        count(&grams(t, n))
            .into_iter()
            .map(|(g, k)| {
                let d = df.get(&format!("{n}:{g}")).copied().unwrap_or(0.0).max(1.0);
                let w = if raw { k as f64 } else { k as f64 * (n_docs / d).ln() };
                (g, w)
            })
            .collect()
    };
    let norm = |v: &HashMap<String, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    corpus
        .iter()
        .map(|(c, refs)| {
            let mut score = 0.0;
            for r in refs {
                let pen = (-((c.len() as f64 - r.len() as f64).powi(2)) / 72.0).exp();
                for n in 1..=4 {
                    let (mut h, mut v) = (weights(c, n, false), weights(r, n, false));
                    if norm(&h) == 0.0 && norm(&v) == 0.0 {
                        h = weights(c, n, true);
                        v = weights(r, n, true);
                    }
                    let (nh, nv) = (norm(&h), norm(&v));
                    if nh > 0.0 && nv > 0.0 {
                        let dot: f64 = h.iter().filter_map(|(g, x)| v.get(g).map(|y| x.min(*y) * y)).sum();
                        score += pen * dot / (nh * nv) / 4.0;
                    }
                }
            }
            10.0 * score / refs.len() as f64
        })
        .collect()
}

pub fn distinct_bigrams_oracle(t: &[String]) -> f64 {
    if t.len() < 2 {
        return 0.0;
    }
    let set: HashSet<(&String, &String)> = t.windows(2).map(|w| (&w[0], &w[1])).collect();
    set.len() as f64 / t.len() as f64
}

pub fn re4_oracle(t: &[String]) -> f64 {
    if t.len() < 4 {
        return 0.0;
    }
    let g: Vec<&[String]> = t.windows(4).collect();
    // a 4-gram is a repeat if an identical one occurred earlier
    let repeats = (0..g.len()).filter(|&i| g[..i].contains(&g[i])).count();
    repeats as f64 / g.len() as f64
}
