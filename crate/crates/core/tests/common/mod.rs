//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod oracles;

use curdesc_core::tensor::GradCheckReport;
use curdesc_core::{Batch, Curriculum, DescriberModel, ModelConfig, RngStreams, StepRngs, Tensor};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_STEP: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-4;

/// Random batch with ragged targets, so PAD masking is exercised.
pub fn random_batch(config: &ModelConfig, batch: usize, src_len: usize, tgt_len: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = Tensor::randn(&[batch, src_len, config.feat_dim], 1.0, &mut rng);
    let targets: Vec<Vec<usize>> = (0..batch)
        .map(|b| {
            // first sample always has the full length
            let len = if b == 0 { tgt_len } else { rng.gen_range(1..=tgt_len) };
            (0..len).map(|_| rng.gen_range(3..config.vocab_size)).collect()
        })
        .collect();
    Batch::new(features, &targets).unwrap()
}

/// Central differences of `forward_loss` against `loss_and_grads` for a
/// whole model. Every forward pass gets freshly built step streams from the
/// same coordinates, so noise and dropout masks are identical throughout.
///
/// `per_tensor = None` checks every coordinate, otherwise that many
/// coordinates per parameter tensor, sampled with `pick_seed`.
#[allow(clippy::too_many_arguments)]
pub fn model_grad_check(
    model: &DescriberModel,
    batch: &Batch,
    epoch: u32,
    curriculum: &Curriculum,
    training: bool,
    streams: &RngStreams,
    per_tensor: Option<usize>,
    pick_seed: u64,
    step: f64,
) -> GradCheckReport {
    let coord = [u64::from(epoch), 0];
    let eps = 0.1;
    let (_, grads) = model
        .loss_and_grads(
            batch,
            epoch,
            curriculum,
            eps,
            &mut StepRngs::new(streams, &coord),
            training,
        )
        .unwrap();
    let mut work = model.clone();
    let mut pick = ChaCha8Rng::seed_from_u64(pick_seed);
    let mut report = GradCheckReport::new(GRAD_TOL);
    let mut flat = 0;
    for (p, grad) in grads.iter().enumerate() {
        let n = grad.numel();
        let idx: Vec<usize> = match per_tensor {
            Some(k) if k < n => sample(&mut pick, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        for i in idx {
            let orig = work.params()[p].data()[i];
            let mut at = |v: f64| {
                work.params_mut()[p].data_mut()[i] = v;
                work.forward_loss(
                    batch,
                    epoch,
                    curriculum,
                    eps,
                    &mut StepRngs::new(streams, &coord),
                    training,
                )
                .unwrap()
            };
            let numeric = (at(orig + step) - at(orig - step)) / (2.0 * step);
            work.params_mut()[p].data_mut()[i] = orig;
            report.record(flat + i, grad.data()[i], numeric);
        }
        flat += n;
    }
    report
}

pub fn toy_config() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_heads: 2,
        n_layers: 2,
        vocab_size: 12,
        max_src_len: 4,
        max_tgt_len: 6,
        feat_dim: 5,
        ..ModelConfig::default()
    }
}
