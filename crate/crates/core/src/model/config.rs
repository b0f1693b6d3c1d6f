use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};

/// Reserved token ids shared by every vocabulary.
pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const PAD: usize = 2;
pub const RESERVED_TOKENS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub vocab_size: usize,
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    /// Width of one input feature vector.
    pub feat_dim: usize,
    pub activation: ActivationKind,
    /// Feedforward hidden width is `feedforward_mult * d_model`.
    pub feedforward_mult: usize,
}

impl Default for ModelConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            vocab_size: 64,
            max_src_len: 8,
            max_tgt_len: 32,
            feat_dim: 16,
            activation: ActivationKind::Mish,
            feedforward_mult: 4,
        }
    }
}

impl ModelConfig {
    /// Full-size reference geometry: hidden 768, 12 heads, 3 layers.
    pub fn reference_scale(vocab_size: usize, feat_dim: usize) -> Self {
        Self {
            d_model: 768,
            n_heads: 12,
            n_layers: 3,
            vocab_size,
            max_src_len: 128,
            max_tgt_len: 128,
            feat_dim,
            ..Self::default()
        }
    }

    pub fn ff_hidden(&self) -> usize {
        self.feedforward_mult * self.d_model
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Collects every violated constraint into one error.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let positive = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("max_src_len", self.max_src_len),
            ("max_tgt_len", self.max_tgt_len),
            ("feat_dim", self.feat_dim),
            ("feedforward_mult", self.feedforward_mult),
        ];
        for (name, v) in positive {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if self.n_heads > 0 && self.d_model % self.n_heads != 0 {
            problems.push(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.vocab_size <= RESERVED_TOKENS {
            problems.push(format!(
                "vocab_size {} leaves no room beyond the reserved BOS/EOS/PAD ids",
                self.vocab_size
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Number of scalar parameters, in closed form.
    ///
    /// With `F = feat_dim`, `d = d_model`, `h = ff_hidden`, `V = vocab_size`,
    /// `S = max_src_len`, `T = max_tgt_len`, `L = n_layers`:
    ///
    /// ```text
    /// encoder = F·d + d + S·d + L·(4(d² + d) + 4d + 2dh + h + d) + 2d
    /// decoder = V·d + T·d + L·(8(d² + d) + 6d + 2dh + h + d) + 2d
    /// output  = d·V + V
    /// ```
    pub fn param_count(&self) -> usize {
        let (f, d, h, v) = (self.feat_dim, self.d_model, self.ff_hidden(), self.vocab_size);
        let (s, t, l) = (self.max_src_len, self.max_tgt_len, self.n_layers);
        let ffn = 2 * d * h + h + d;
        let encoder = f * d + d + s * d + l * (4 * (d * d + d) + 4 * d + ffn) + 2 * d;
        let decoder = v * d + t * d + l * (8 * (d * d + d) + 6 * d + ffn) + 2 * d;
        encoder + decoder + d * v + v
    }
}
