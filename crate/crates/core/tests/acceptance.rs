//! Acceptance suite. Runs every criterion in order, one at a time (timings
//! matter on small machines), prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::oracles::{bleu_oracle, cider_oracle, distinct_bigrams_oracle, re4_oracle, rouge_oracle};
use common::{model_grad_check, random_batch, GRAD_STEP, GRAD_TOL};
use curdesc_core::activation::{mish, mish_prime};
use curdesc_core::datasynth::{self, SynthConfig};
use curdesc_core::experiment::{self, ablate_grid, ablate_noise, run_to_dir, CandidateSource, GRID_ORDER};
use curdesc_core::metrics::{self, bleu4, cider_d, div2, re4, rouge_l, tokenize, CaptionSet};
use curdesc_core::schedules::{schedule_table, DropoutSchedule, NoiseSchedule};
use curdesc_core::tensor::{grad_check, relative_error, GradCheckReport};
use curdesc_core::{
    ActivationKind, Curriculum, DescriberModel, DropoutMode, ExperimentConfig, ModelConfig, Purpose, RngStreams, Tape,
    Tensor, Var,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    warning: Option<String>,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
            warning: None,
        }
    }
}

/// Collects failed sub-checks so one criterion reports all of them.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    count: usize,
}

impl Checks {
    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.count += 1;
        if !ok {
            self.failed.push(what());
        }
    }

    fn finish(self, elapsed: Duration, budget: Duration, summary: &str) -> Outcome {
        let in_time = elapsed <= budget;
        let mut detail = format!(
            "{summary}; {} checks, {:.2?} (budget {:.0?})",
            self.count, elapsed, budget
        );
        if !in_time {
            detail.push_str("; over time budget");
        }
        if !self.failed.is_empty() {
            let shown: Vec<_> = self.failed.iter().take(5).cloned().collect();
            detail.push_str(&format!("; {} failed: {}", self.failed.len(), shown.join(" | ")));
        }
        Outcome::check(self.failed.is_empty() && in_time, detail)
    }
}

// ---- 1 ---------------------------------------------------------------------

fn schedule_exactness() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let noise = schedule_table(&NoiseSchedule::new(0.3, 25).unwrap(), 50);
    let dropout = schedule_table(&DropoutSchedule::new(0.25, 25).unwrap(), 50);
    c.expect(noise.len() == 51 && dropout.len() == 51, || "table length".into());
    for e in 0..=50u32 {
        let ratio = f64::from(e) / 25.0;
        let sigma = (0.3 * ratio).min(0.3);
        let delta = (0.25 * ratio.sqrt()).min(0.25);
        let (ne, nv) = noise[e as usize];
        let (de, dv) = dropout[e as usize];
        c.expect(ne == e && (nv - sigma).abs() <= f64::EPSILON, || {
            format!("sigma({e})={nv} want {sigma}")
        });
        c.expect(de == e && (dv - delta).abs() <= f64::EPSILON, || {
            format!("delta({e})={dv} want {delta}")
        });
    }
    for (e, s, d) in [(0usize, 0.0, 0.0), (25, 0.3, 0.25), (50, 0.3, 0.25)] {
        c.expect(noise[e].1 == s && dropout[e].1 == d, || format!("endpoint {e}"));
    }
    c.finish(
        t.elapsed(),
        Duration::from_secs(1),
        "linear noise and square-root dropout ramps at epochs 0..=50",
    )
}

// ---- 2 ---------------------------------------------------------------------

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    while b - a > 1e-12 {
        if f(x1) < f(x2) {
            b = x2;
            x2 = x1;
            x1 = b - r * (b - a);
        } else {
            a = x1;
            x1 = x2;
            x2 = a + r * (b - a);
        }
    }
    (a + b) / 2.0
}

fn mish_correctness() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    c.expect(mish(0.0) == 0.0, || format!("mish(0)={}", mish(0.0)));
    c.expect((mish(1.0) - 0.865098).abs() <= 1e-6, || {
        format!("mish(1)={}", mish(1.0))
    });
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..=100 {
        let x = -6.0 + 12.0 * f64::from(i) / 100.0;
        let numeric = (mish(x + h) - mish(x - h)) / (2.0 * h);
        let err = relative_error(mish_prime(x), numeric);
        worst = worst.max(err);
        c.expect(err <= 1e-6, || format!("mish'({x}) rel err {err}"));
    }
    let xmin = golden_section_min(mish, -3.0, 0.0);
    let ymin = mish(xmin);
    c.expect((xmin + 1.19245).abs() <= 1e-3 && (ymin + 0.30884).abs() <= 1e-3, || {
        format!("minimum at ({xmin}, {ymin})")
    });
    c.finish(
        t.elapsed(),
        Duration::from_secs(1),
        &format!("derivative worst rel err {worst:.2e}, minimum ({xmin:.5}, {ymin:.5})"),
    )
}

// ---- 3 ---------------------------------------------------------------------

type Primitive = fn(&mut Tape, Var, &Tensor) -> curdesc_core::Result<Var>;

/// Reduces any tensor to a scalar with fixed random weights, so every
/// output coordinate reaches the loss with a distinct coefficient.
fn weighted_sum(t: &mut Tape, y: Var, seed: u64) -> curdesc_core::Result<Var> {
    let shape = t.value(y).shape().to_vec();
    let w = Tensor::randn(&shape, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    let w = t.constant(w);
    let p = t.mul(y, w)?;
    Ok(t.sum(p))
}

fn primitives() -> Vec<(&'static str, Vec<usize>, Primitive)> {
    fn other(shape: &[usize]) -> Tensor {
        Tensor::randn(shape, 1.0, &mut ChaCha8Rng::seed_from_u64(99))
    }
    vec![
        ("add", vec![3, 4], |t, x, _| {
            let b = t.param(other(&[3, 4]));
            t.add(x, b)
        }),
        ("add_row", vec![3, 4], |t, x, _| {
            let b = t.param(other(&[4]));
            t.add_row(x, b)
        }),
        ("add_row(bias)", vec![4], |t, x, _| {
            let a = t.param(other(&[3, 4]));
            t.add_row(a, x)
        }),
        ("add_const", vec![3, 4], |t, x, _| t.add_const(x, &other(&[3, 4]))),
        ("mul", vec![3, 4], |t, x, _| t.mul(x, x)),
        ("scale", vec![3, 4], |t, x, _| Ok(t.scale(x, -1.7))),
        ("matmul(lhs)", vec![3, 4], |t, x, _| {
            let b = t.param(other(&[4, 5]));
            t.matmul(x, b)
        }),
        ("matmul(rhs)", vec![4, 5], |t, x, _| {
            let a = t.param(other(&[3, 4]));
            t.matmul(a, x)
        }),
        ("transpose", vec![3, 4], |t, x, _| t.transpose(x)),
        ("reshape", vec![3, 4], |t, x, _| t.reshape(x, &[2, 6])),
        ("mish", vec![3, 4], |t, x, _| Ok(t.activation(x, ActivationKind::Mish))),
        ("relu", vec![3, 4], |t, x, _| Ok(t.activation(x, ActivationKind::Relu))),
        ("gelu", vec![3, 4], |t, x, _| Ok(t.activation(x, ActivationKind::Gelu))),
        ("softmax", vec![3, 4], |t, x, _| t.softmax(x)),
        ("layer_norm(x)", vec![3, 4], |t, x, _| {
            let g = t.param(other(&[4]));
            let b = t.param(other(&[4]));
            t.layer_norm(x, g, b, 1e-5)
        }),
        ("layer_norm(gain)", vec![4], |t, g, _| {
            let x = t.param(other(&[3, 4]));
            let b = t.param(Tensor::zeros(&[4]));
            t.layer_norm(x, g, b, 1e-5)
        }),
        ("layer_norm(bias)", vec![4], |t, b, _| {
            let x = t.param(other(&[3, 4]));
            let g = t.param(Tensor::ones(&[4]));
            t.layer_norm(x, g, b, 1e-5)
        }),
        ("slice_rows", vec![5, 3], |t, x, _| t.slice_rows(x, 1, 3)),
        ("slice_cols", vec![3, 5], |t, x, _| t.slice_cols(x, 2, 2)),
        ("concat_rows", vec![2, 3], |t, x, _| {
            let b = t.param(other(&[1, 3]));
            t.concat_rows(&[x, b, x])
        }),
        ("concat_cols", vec![3, 2], |t, x, _| {
            let b = t.param(other(&[3, 1]));
            t.concat_cols(&[b, x, x])
        }),
        ("embed", vec![6, 3], |t, x, _| t.embed(x, &[4, 0, 4, 2])),
        ("sum", vec![3, 4], |t, x, _| {
            let s = t.sum(x);
            t.mul(s, s)
        }),
        ("cross_entropy_smoothed", vec![4, 6], |t, x, _| {
            t.cross_entropy_smoothed(x, &[1, 2, 5, 2], 0.1, 2)
        }),
        ("gaussian_noise", vec![3, 4], |t, x, _| {
            let mut rng = RngStreams::new(5).stream(Purpose::Noise, &[]);
            t.gaussian_noise(x, 0.3, &mut rng)
        }),
        ("dropout", vec![3, 4], |t, x, _| {
            let mut rng = RngStreams::new(5).stream(Purpose::Dropout, &[]);
            t.dropout(x, 0.25, true, &mut rng)
        }),
    ]
}

fn differentiation_core() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let seeds = 20u64;
    let mut worst = 0.0f64;
    let mut coords = 0usize;
    for (name, shape, op) in primitives() {
        for seed in 0..seeds {
            let point = Tensor::randn(&shape, 1.0, &mut ChaCha8Rng::seed_from_u64(1000 + seed));
            let report = grad_check(
                |tape, x| {
                    let y = op(tape, x, &point)?;
                    weighted_sum(tape, y, seed)
                },
                &point,
                GRAD_STEP,
                GRAD_TOL,
            )
            .unwrap();
            worst = worst.max(report.max_rel_err);
            coords += report.checked;
            c.expect(report.passed(), || {
                format!("{name} seed {seed}: {:?}", report.failures.first())
            });
        }
    }

    let config = ModelConfig::default();
    let mut model_report = GradCheckReport::new(GRAD_TOL);
    for seed in 0..seeds {
        let streams = RngStreams::new(500 + seed);
        let model = DescriberModel::init(config.clone(), &streams).unwrap();
        let batch = random_batch(&config, 2, 3, 4, seed);
        let r = model_grad_check(
            &model,
            &batch,
            0,
            &Curriculum::OFF,
            false,
            &streams,
            Some(4),
            seed,
            GRAD_STEP,
        );
        c.expect(r.passed(), || {
            format!("desk model seed {seed}: {:?}", r.failures.first())
        });
        model_report.merge(r);
    }
    worst = worst.max(model_report.max_rel_err);
    coords += model_report.checked;
    c.finish(
        t.elapsed(),
        Duration::from_secs(120),
        &format!(
            "{} primitives and the desk model over {seeds} seeds, {coords} coordinates, worst rel err {worst:.2e}",
            primitives().len()
        ),
    )
}

// ---- 4 ---------------------------------------------------------------------

fn stochastic_layers() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let n = 1_000_000;
    let streams = RngStreams::new(4);

    let mut tape = Tape::new();
    let x = tape.constant(Tensor::ones(&[n]));
    let y = tape
        .dropout(x, 0.25, true, &mut streams.stream(Purpose::Dropout, &[]))
        .unwrap();
    let out = tape.value(y).data();
    let zeroed = out.iter().filter(|&&v| v == 0.0).count() as f64 / n as f64;
    let mean = out.iter().sum::<f64>() / n as f64;
    c.expect((zeroed - 0.25).abs() <= 0.002, || format!("zeroed fraction {zeroed}"));
    c.expect((mean - 1.0).abs() <= 0.005, || format!("dropout mean {mean}"));

    let z = tape.constant(Tensor::zeros(&[n]));
    let g = tape
        .gaussian_noise(z, 0.3, &mut streams.stream(Purpose::Noise, &[]))
        .unwrap();
    let noise = tape.value(g).data();
    let nm = noise.iter().sum::<f64>() / n as f64;
    let sd = (noise.iter().map(|v| (v - nm) * (v - nm)).sum::<f64>() / n as f64).sqrt();
    c.expect(nm.abs() <= 3.0 * 0.3 / 1000.0, || format!("noise mean {nm}"));
    c.expect((sd - 0.3).abs() <= 0.003, || format!("noise std {sd}"));

    let a = tape.constant(Tensor::randn(&[100], 1.0, &mut ChaCha8Rng::seed_from_u64(3)));
    let same_noise = tape
        .gaussian_noise(a, 0.0, &mut streams.stream(Purpose::Noise, &[1]))
        .unwrap();
    let same_drop = tape
        .dropout(a, 0.0, true, &mut streams.stream(Purpose::Dropout, &[1]))
        .unwrap();
    let bits = |v: Var, tape: &Tape| tape.value(v).data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    c.expect(bits(same_noise, &tape) == bits(a, &tape), || {
        "sigma=0 not identity".into()
    });
    c.expect(bits(same_drop, &tape) == bits(a, &tape), || {
        "delta=0 not identity".into()
    });
    c.finish(
        t.elapsed(),
        Duration::from_secs(10),
        &format!("zeroed {zeroed:.4}, dropout mean {mean:.4}, noise mean {nm:.2e}, noise std {sd:.4}"),
    )
}

// ---- 5 ---------------------------------------------------------------------

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn metric_oracles() -> Outcome {
    let t = Instant::now();
    let mut c = Checks::default();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);

    let bleu = bleu4(&tokenize("the cat sat on the mat"), &[tokenize("the cat sat on a mat")]);
    let bleu_hand = (5.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0f64).powf(0.25);
    c.expect(close(bleu, bleu_hand), || format!("bleu fixture {bleu} vs {bleu_hand}"));
    let (p, r, b2) = (2.0 / 3.0, 1.0, 1.44);
    let rouge_hand = (1.0 + b2) * p * r / (r + b2 * p);
    let rouge = rouge_l(&words("a b c"), &[words("a c")]);
    c.expect(close(rouge, rouge_hand), || {
        format!("rouge fixture {rouge} vs {rouge_hand}")
    });
    c.expect(close(div2(&words("a a b")), 2.0 / 3.0), || "div2 fixture".into());
    c.expect(close(re4(&words("a b c d a b c d a b c d")), 5.0 / 9.0), || {
        "re4 fixture".into()
    });

    let two = vec![
        CaptionSet::from_text(
            "v1",
            "a man is cooking food",
            &["a man is cooking", "a person cooks food"],
        )
        .unwrap(),
        CaptionSet::from_text("v2", "a dog runs in the park", &["a dog is running in a park"]).unwrap(),
    ];
    let plain = |corpus: &[CaptionSet]| -> Vec<_> {
        corpus
            .iter()
            .map(|c| (c.candidate.clone(), c.references.clone()))
            .collect()
    };
    let got = cider_d(&two);
    let brute = cider_oracle(&plain(&two));
    c.expect(close(got[0], brute[0]) && close(got[1], brute[1]), || {
        format!("two-video cider {got:?} vs {brute:?}")
    });

    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let corpus = metrics::read_caption_file(&fixtures.join("captions5.json")).unwrap();
    let golden: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(fixtures.join("captions5_golden.json")).unwrap()).unwrap();
    let report = metrics::corpus_report(&corpus).unwrap();
    for (row, g) in report.videos.iter().zip(&golden) {
        for (name, v) in [
            ("bleu4", row.bleu4),
            ("rouge_l", row.rouge_l),
            ("cider_d", row.cider_d),
            ("div2", row.div2),
            ("re4", row.re4),
        ] {
            let want = g[name].as_f64().unwrap();
            c.expect(close(v, want), || {
                format!("golden {} {name}: {v} vs {want}", row.video_id)
            });
        }
    }

    let identity: Vec<CaptionSet> = [
        "a person opens the door",
        "a dog chases a red ball",
        "two kids play chess",
    ]
    .iter()
    .enumerate()
    .map(|(i, s)| CaptionSet::from_text(format!("v{i}"), s, &[s]).unwrap())
    .collect();
    let id = metrics::corpus_report(&identity).unwrap().mean;
    c.expect(id.bleu4 == 1.0 && id.rouge_l == 1.0 && close(id.cider_d, 10.0), || {
        format!("identity {id:?}")
    });

    let vocab = ["a", "the", "man", "dog", "runs", "eats", "red", "ball", "park"];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let caption = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let len = rng.gen_range(0..=10);
        (0..len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
            .collect()
    };
    let mut sets = 0;
    let mut round = 0;
    while sets < 10_000 {
        let videos = rng.gen_range(1..=8);
        let corpus: Vec<CaptionSet> = (0..videos)
            .map(|i| {
                let refs = (0..rng.gen_range(1..=3)).map(|_| caption(&mut rng)).collect();
                CaptionSet::new(format!("v{i}"), caption(&mut rng), refs).unwrap()
            })
            .collect();
        sets += videos;
        let report = metrics::corpus_report(&corpus).unwrap();
        for row in &report.videos {
            let ok = (0.0..=1.0).contains(&row.bleu4)
                && (0.0..=1.0).contains(&row.rouge_l)
                && (0.0..=10.0 + 1e-12).contains(&row.cider_d)
                && (0.0..=1.0).contains(&row.div2)
                && (0.0..=1.0).contains(&row.re4);
            c.expect(ok, || format!("range violation {row:?}"));
        }
        if round % 20 == 0 {
            let brute = cider_oracle(&plain(&corpus));
            for ((cs, row), b) in corpus.iter().zip(&report.videos).zip(&brute) {
                c.expect((row.cider_d - b).abs() < 1e-9, || {
                    format!("fuzz cider {} vs {b}", row.cider_d)
                });
                let bl = bleu_oracle(&cs.candidate, &cs.references);
                c.expect(close(row.bleu4, bl), || format!("fuzz bleu {} vs {bl}", row.bleu4));
                let rl = rouge_oracle(&cs.candidate, &cs.references);
                c.expect(close(row.rouge_l, rl), || format!("fuzz rouge {} vs {rl}", row.rouge_l));
                c.expect(close(row.div2, distinct_bigrams_oracle(&cs.candidate)), || {
                    "fuzz div2".into()
                });
                c.expect(close(row.re4, re4_oracle(&cs.candidate)), || "fuzz re4".into());
            }
        }
        round += 1;
    }
    c.finish(
        t.elapsed(),
        Duration::from_secs(30),
        &format!("fixtures, golden report and {sets} fuzzed caption sets"),
    )
}

// ---- 6 ---------------------------------------------------------------------

fn learnability() -> Outcome {
    let config = ExperimentConfig::default();
    let t = Instant::now();
    let outcome = experiment::train(&config).unwrap();
    let train_time = t.elapsed();
    let ev = experiment::evaluate(
        &outcome.model,
        &outcome.data.vocab,
        &outcome.data.train,
        CandidateSource::Model,
    )
    .unwrap();
    let total = t.elapsed();
    let ratio = outcome.log.final_loss / outcome.log.initial_loss;
    let pass = total < Duration::from_secs(300) && ratio < 0.2 && ev.exact_match >= 0.95;
    Outcome::check(
        pass,
        format!(
            "{} samples, {} epochs: train {:.1?} (+eval {:.1?}), loss {:.4} -> {:.4} (ratio {:.4}, need < 0.2), \
             train exact match {:.1}% (need >= 95%)",
            config.synth.n_train,
            config.epochs,
            train_time,
            total - train_time,
            outcome.log.initial_loss,
            outcome.log.final_loss,
            ratio,
            100.0 * ev.exact_match
        ),
    )
}

// ---- 7 ---------------------------------------------------------------------

fn ablation_direction() -> Outcome {
    // The noise-only comparison trains the base model: no dropout curriculum
    // and the baseline activation, so only the noise treatment differs.
    let mut base = ExperimentConfig {
        name: "accept-noise".into(),
        dropout: DropoutMode::Off,
        ..ExperimentConfig::default()
    };
    base.model.activation = ActivationKind::Gelu;
    let sigmas = [0.1, 0.2, 0.3, 0.4, 0.5];
    let seeds = [2019u64, 2020, 2021];
    let t = Instant::now();
    let mut sums = vec![0.0; sigmas.len() + 1];
    for &seed in &seeds {
        let table = ablate_noise(&base.clone().with_seed(seed), &sigmas, 1, None).unwrap();
        let row: Vec<String> = table.rows.iter().map(|r| format!("{:.3}", r.scores.cider_d)).collect();
        println!(
            "  seed {seed}: cider_d scheduled, fixed {sigmas:?} = {}",
            row.join(", ")
        );
        for (s, r) in sums.iter_mut().zip(&table.rows) {
            *s += r.scores.cider_d;
        }
    }
    let elapsed = t.elapsed();
    let means: Vec<f64> = sums.iter().map(|s| s / seeds.len() as f64).collect();
    let scheduled = means[0];
    let best_fixed = means[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let beaten = means[1..].iter().all(|&m| scheduled >= m);
    let tie = !beaten && scheduled >= best_fixed - 0.5;
    let in_time = elapsed < Duration::from_secs(30 * 60);
    let fixed: Vec<String> = sigmas
        .iter()
        .zip(&means[1..])
        .map(|(s, m)| format!("{s}: {m:.3}"))
        .collect();
    Outcome {
        pass: (beaten || tie) && in_time,
        detail: format!(
            "mean val CIDEr-D over {} seeds: scheduled {scheduled:.3}, fixed {{{}}}; {:.1?}",
            seeds.len(),
            fixed.join(", "),
            elapsed
        ),
        warning: tie.then(|| {
            format!(
                "scheduled trails the best fixed sigma by {:.3}, within the 0.5 tie band",
                best_fixed - scheduled
            )
        }),
    }
}

// ---- 8 ---------------------------------------------------------------------

fn non_reproducibility() -> Outcome {
    println!(
        "  Absolute benchmark scores of full-scale models trained on real video datasets are not reproduced here. \
         The ablation grid reproduces only the table structure and the toggle semantics at desk scale."
    );
    let config = ExperimentConfig {
        name: "accept-grid".into(),
        epochs: 1,
        warmup_epochs: 1,
        synth: SynthConfig {
            n_train: 16,
            n_val: 4,
            ..SynthConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let table = ablate_grid(&config, ActivationKind::Gelu, 1, None).unwrap();
    let marks: Vec<String> = table.rows.iter().map(|r| r.labels.concat()).collect();
    let expected: Vec<String> = GRID_ORDER
        .iter()
        .map(|&(n, d, m)| [n, d, m].iter().map(|&b| if b { "✓" } else { "✗" }).collect())
        .collect();
    let order = ["✗✗✗", "✓✗✗", "✗✓✗", "✗✗✓", "✓✗✓", "✗✓✓", "✓✓✗", "✓✓✓"];
    Outcome::check(
        marks == expected && marks == order && table.rows.len() == 8,
        format!("statement printed; grid rows {}", marks.join(" ")),
    )
}

// ---- 9 ---------------------------------------------------------------------

fn determinism() -> Outcome {
    let config = ExperimentConfig {
        name: "accept-determinism".into(),
        epochs: 3,
        warmup_epochs: 1,
        synth: SynthConfig {
            n_train: 64,
            n_val: 16,
            ..SynthConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let t = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_to_dir(&config, a.path(), &mut |_| {}).unwrap();
    let rb = run_to_dir(&config, b.path(), &mut |_| {}).unwrap();
    let mut c = Checks::default();
    for (x, y) in [
        (&ra.paths.config, &rb.paths.config),
        (&ra.paths.log, &rb.paths.log),
        (&ra.paths.checkpoint, &rb.paths.checkpoint),
        (&ra.paths.report, &rb.paths.report),
    ] {
        let same = std::fs::read(x).unwrap() == std::fs::read(y).unwrap();
        c.expect(same, || format!("{} differs", x.file_name().unwrap().to_string_lossy()));
    }
    let data = |seed| {
        datasynth::to_jsonl(
            &datasynth::generate(&SynthConfig {
                seed,
                ..SynthConfig::default()
            })
            .unwrap()
            .train,
        )
    };
    c.expect(data(5) == data(5), || "dataset differs".into());
    c.finish(
        t.elapsed(),
        Duration::from_secs(120),
        "config.json, log.csv, model.ckpt, report.json and data compared byte for byte",
    )
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    type Criterion = (u32, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        (1, "schedule exactness", schedule_exactness),
        (2, "mish correctness", mish_correctness),
        (3, "differentiation core", differentiation_core),
        (4, "stochastic layers", stochastic_layers),
        (5, "metric oracles", metric_oracles),
        (6, "end-to-end learnability", learnability),
        (7, "noise ablation direction", ablation_direction),
        (8, "non-reproducibility statement", non_reproducibility),
        (9, "determinism", determinism),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        // `cargo test --test acceptance -- 6 7` runs a subset
        if !args.is_empty() && !args.iter().any(|a| a == &n.to_string()) {
            continue;
        }
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("acceptance {n} {verdict} {name}: {}", outcome.detail);
        if let Some(w) = outcome.warning {
            println!("acceptance {n} WARNING {w}");
        }
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
