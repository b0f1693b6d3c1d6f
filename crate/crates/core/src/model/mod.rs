//! Toy transformer encoder-decoder that maps feature sequences to tokens.
//!
//! Pre-LN blocks with learned positional embeddings. Curriculum noise is
//! added to the encoder input features only. Dropout sits at the three usual
//! places (attention weights, feedforward hidden units, residual branches)
//! and every site uses the same rate.

mod config;

pub use config::{ModelConfig, BOS, EOS, PAD, RESERVED_TOKENS};

use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStreams, StreamRng};
use crate::schedules::{DropoutMode, NoiseMode};
use crate::tensor::{Checkpoint, Tape, Tensor, Var};

const INIT_STD: f64 = 0.02;
const LN_EPS: f64 = 1e-5;
const MASKED: f64 = -1e9;

#[derive(Debug, Clone, Copy)]
enum Init {
    Normal,
    Zeros,
    Ones,
}

#[derive(Debug, Clone)]
struct Attn {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
}

#[derive(Debug, Clone)]
struct Ffn {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct EncLayer {
    ln1: Norm,
    attn: Attn,
    ln2: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone)]
struct DecLayer {
    ln1: Norm,
    self_attn: Attn,
    ln2: Norm,
    cross: Attn,
    ln3: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone)]
struct Layout {
    in_w: usize,
    in_b: usize,
    src_pos: usize,
    enc: Vec<EncLayer>,
    enc_ln: Norm,
    tok: usize,
    tgt_pos: usize,
    dec: Vec<DecLayer>,
    dec_ln: Norm,
    out_w: usize,
    out_b: usize,
}

#[derive(Default)]
struct LayoutBuilder {
    specs: Vec<(String, Vec<usize>, Init)>,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> usize {
        self.specs.push((name, shape.to_vec(), init));
        self.specs.len() - 1
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> (usize, usize) {
        let w = self.add(format!("{prefix}.w"), &[fan_in, fan_out], Init::Normal);
        let b = self.add(format!("{prefix}.b"), &[fan_out], Init::Zeros);
        (w, b)
    }

    fn norm(&mut self, prefix: &str, d: usize) -> Norm {
        Norm {
            g: self.add(format!("{prefix}.g"), &[d], Init::Ones),
            b: self.add(format!("{prefix}.b"), &[d], Init::Zeros),
        }
    }

    fn attn(&mut self, prefix: &str, d: usize) -> Attn {
        let (wq, bq) = self.linear(&format!("{prefix}.q"), d, d);
        let (wk, bk) = self.linear(&format!("{prefix}.k"), d, d);
        let (wv, bv) = self.linear(&format!("{prefix}.v"), d, d);
        let (wo, bo) = self.linear(&format!("{prefix}.o"), d, d);
        Attn {
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
        }
    }

    fn ffn(&mut self, prefix: &str, d: usize, h: usize) -> Ffn {
        let (w1, b1) = self.linear(&format!("{prefix}.ff1"), d, h);
        let (w2, b2) = self.linear(&format!("{prefix}.ff2"), h, d);
        Ffn { w1, b1, w2, b2 }
    }
}

fn build_layout(cfg: &ModelConfig) -> (Layout, Vec<(String, Vec<usize>, Init)>) {
    let d = cfg.d_model;
    let h = cfg.ff_hidden();
    let mut lb = LayoutBuilder::default();
    let (in_w, in_b) = lb.linear("enc.in", cfg.feat_dim, d);
    let src_pos = lb.add("enc.pos".into(), &[cfg.max_src_len, d], Init::Normal);
    let enc = (0..cfg.n_layers)
        .map(|l| EncLayer {
            ln1: lb.norm(&format!("enc.{l}.ln1"), d),
            attn: lb.attn(&format!("enc.{l}.attn"), d),
            ln2: lb.norm(&format!("enc.{l}.ln2"), d),
            ffn: lb.ffn(&format!("enc.{l}"), d, h),
        })
        .collect();
    let enc_ln = lb.norm("enc.ln", d);
    let tok = lb.add("dec.tok".into(), &[cfg.vocab_size, d], Init::Normal);
    let tgt_pos = lb.add("dec.pos".into(), &[cfg.max_tgt_len, d], Init::Normal);
    let dec = (0..cfg.n_layers)
        .map(|l| DecLayer {
            ln1: lb.norm(&format!("dec.{l}.ln1"), d),
            self_attn: lb.attn(&format!("dec.{l}.self"), d),
            ln2: lb.norm(&format!("dec.{l}.ln2"), d),
            cross: lb.attn(&format!("dec.{l}.cross"), d),
            ln3: lb.norm(&format!("dec.{l}.ln3"), d),
            ffn: lb.ffn(&format!("dec.{l}"), d, h),
        })
        .collect();
    let dec_ln = lb.norm("dec.ln", d);
    let (out_w, out_b) = lb.linear("out", d, cfg.vocab_size);
    let layout = Layout {
        in_w,
        in_b,
        src_pos,
        enc,
        enc_ln,
        tok,
        tgt_pos,
        dec,
        dec_ln,
        out_w,
        out_b,
    };
    (layout, lb.specs)
}

/// A padded mini-batch for teacher-forced training.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `[batch, src_len, feat_dim]`
    pub features: Tensor,
    /// `[batch * tgt_len]`, row-major, padded with [`PAD`].
    pub targets: Vec<usize>,
    pub tgt_len: usize,
}

impl Batch {
    /// `targets[i]` is sample `i`'s output sequence, normally ending in
    /// [`EOS`]; shorter sequences are padded.
    pub fn new(features: Tensor, targets: &[Vec<usize>]) -> Result<Self> {
        if features.rank() != 3 {
            return Err(Error::Input(format!(
                "batch features must be [batch, src_len, feat_dim], got {:?}",
                features.shape()
            )));
        }
        if features.shape()[0] != targets.len() {
            return Err(Error::Input(format!(
                "{} feature sequences but {} target sequences",
                features.shape()[0],
                targets.len()
            )));
        }
        let tgt_len = targets.iter().map(Vec::len).max().unwrap_or(0);
        let mut padded = Vec::with_capacity(targets.len() * tgt_len);
        for t in targets {
            padded.extend_from_slice(t);
            padded.extend(std::iter::repeat(PAD).take(tgt_len - t.len()));
        }
        Ok(Self {
            features,
            targets: padded,
            tgt_len,
        })
    }

    pub fn size(&self) -> usize {
        self.features.shape()[0]
    }

    /// Teacher-forcing inputs: each target row shifted right behind [`BOS`].
    pub fn decoder_inputs(&self) -> Vec<usize> {
        let t = self.tgt_len;
        let mut out = Vec::with_capacity(self.targets.len());
        for row in self.targets.chunks_exact(t.max(1)).take(self.size()) {
            out.push(BOS);
            out.extend_from_slice(&row[..t - 1]);
        }
        out
    }
}

/// The noise and dropout settings in force for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curriculum {
    pub noise: NoiseMode,
    pub dropout: DropoutMode,
}

impl Curriculum {
    pub const OFF: Curriculum = Curriculum {
        noise: NoiseMode::Off,
        dropout: DropoutMode::Off,
    };

    /// `(sigma, delta)` at `epoch`.
    pub fn levels(&self, epoch: u32) -> (f64, f64) {
        (self.noise.sigma_at(epoch), self.dropout.delta_at(epoch))
    }
}

/// The two random streams one forward pass may consume.
#[derive(Debug, Clone)]
pub struct StepRngs {
    pub noise: StreamRng,
    pub dropout: StreamRng,
}

impl StepRngs {
    pub fn new(streams: &RngStreams, coord: &[u64]) -> Self {
        Self {
            noise: streams.stream(Purpose::Noise, coord),
            dropout: streams.stream(Purpose::Dropout, coord),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriberModel {
    config: ModelConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
}

struct Ctx<'a> {
    tape: Tape,
    p: Vec<Var>,
    delta: f64,
    training: bool,
    drop_rng: &'a mut StreamRng,
}

impl Ctx<'_> {
    fn dropout(&mut self, x: Var) -> Result<Var> {
        self.tape.dropout(x, self.delta, self.training, self.drop_rng)
    }

    fn linear(&mut self, x: Var, w: usize, b: usize) -> Result<Var> {
        let y = self.tape.matmul(x, self.p[w])?;
        self.tape.add_row(y, self.p[b])
    }

    fn norm(&mut self, x: Var, n: &Norm) -> Result<Var> {
        self.tape.layer_norm(x, self.p[n.g], self.p[n.b], LN_EPS)
    }

    fn ffn(&mut self, x: Var, f: &Ffn, kind: crate::ActivationKind) -> Result<Var> {
        let h = self.linear(x, f.w1, f.b1)?;
        let h = self.tape.activation(h, kind);
        let h = self.dropout(h)?;
        self.linear(h, f.w2, f.b2)
    }

    /// Multi-head attention over `batch` independent sequences stacked by
    /// rows: queries `[batch*tq × d]`, keys/values `[batch*tk × d]`.
    #[allow(clippy::too_many_arguments)]
    fn attention(
        &mut self,
        a: &Attn,
        q_in: Var,
        kv_in: Var,
        batch: usize,
        tq: usize,
        tk: usize,
        heads: usize,
        masks: Option<&[Tensor]>,
    ) -> Result<Var> {
        let q = self.linear(q_in, a.wq, a.bq)?;
        let k = self.linear(kv_in, a.wk, a.bk)?;
        let v = self.linear(kv_in, a.wv, a.bv)?;
        let d = self.tape.value(q).shape()[1];
        let dk = d / heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let mut samples = Vec::with_capacity(batch);
        for i in 0..batch {
            let qi = self.tape.slice_rows(q, i * tq, tq)?;
            let ki = self.tape.slice_rows(k, i * tk, tk)?;
            let vi = self.tape.slice_rows(v, i * tk, tk)?;
            let mut outs = Vec::with_capacity(heads);
            for h in 0..heads {
                let qh = self.tape.slice_cols(qi, h * dk, dk)?;
                let kh = self.tape.slice_cols(ki, h * dk, dk)?;
                let vh = self.tape.slice_cols(vi, h * dk, dk)?;
                let kt = self.tape.transpose(kh)?;
                let s = self.tape.matmul(qh, kt)?;
                let mut s = self.tape.scale(s, scale);
                if let Some(m) = masks {
                    s = self.tape.add_const(s, &m[i])?;
                }
                let w = self.tape.softmax(s)?;
                let w = self.dropout(w)?;
                outs.push(self.tape.matmul(w, vh)?);
            }
            samples.push(self.tape.concat_cols(&outs)?);
        }
        let o = self.tape.concat_rows(&samples)?;
        self.linear(o, a.wo, a.bo)
    }
}

/// Causal mask that also hides PAD keys. A query row always keeps its own
/// position so no row is fully masked.
fn decoder_mask(tokens: &[usize]) -> Tensor {
    let t = tokens.len();
    let mut m = Tensor::zeros(&[t, t]);
    let data = m.data_mut();
    for i in 0..t {
        for j in 0..t {
            if j > i || (tokens[j] == PAD && j != i) {
                data[i * t + j] = MASKED;
            }
        }
    }
    m
}

fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl DescriberModel {
    /// Fresh parameters: projections and embeddings `N(0, 0.02²)`, biases
    /// zero, layer-norm gains one. Values are rounded onto the `f32` grid.
    pub fn init(config: ModelConfig, streams: &RngStreams) -> Result<Self> {
        config.validate()?;
        let (_, specs) = build_layout(&config);
        let mut rng = streams.stream(Purpose::Init, &[]);
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for (name, shape, init) in specs {
            let mut t = match init {
                Init::Normal => Tensor::randn(&shape, INIT_STD, &mut rng),
                Init::Zeros => Tensor::zeros(&shape),
                Init::Ones => Tensor::ones(&shape),
            };
            t.round_to_f32();
            names.push(name);
            params.push(t);
        }
        Ok(Self { config, names, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.names.iter().cloned().zip(self.params.iter().cloned()).collect(),
        }
    }

    /// Rebuilds a model, checking that every parameter the config implies
    /// is present with the right shape.
    pub fn from_checkpoint(config: ModelConfig, ckpt: &Checkpoint) -> Result<Self> {
        config.validate()?;
        let (_, specs) = build_layout(&config);
        if ckpt.params.len() != specs.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, config expects {}",
                ckpt.params.len(),
                specs.len()
            )));
        }
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for ((name, shape, _), (cname, t)) in specs.into_iter().zip(&ckpt.params) {
            if &name != cname || t.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "checkpoint tensor {cname} {:?} does not match expected {name} {:?}",
                    t.shape(),
                    shape
                )));
            }
            names.push(name);
            params.push(t.clone());
        }
        Ok(Self { config, names, params })
    }

    fn layout(&self) -> Layout {
        build_layout(&self.config).0
    }

    fn ctx<'a>(&self, with_grad: bool, delta: f64, training: bool, drop_rng: &'a mut StreamRng) -> Ctx<'a> {
        let mut tape = Tape::new();
        let p = self
            .params
            .iter()
            .map(|t| {
                if with_grad {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect();
        Ctx {
            tape,
            p,
            delta,
            training,
            drop_rng,
        }
    }

    fn encode_in(
        &self,
        cx: &mut Ctx<'_>,
        lay: &Layout,
        features: &Tensor,
        sigma: f64,
        noise_rng: &mut StreamRng,
    ) -> Result<Var> {
        let cfg = &self.config;
        let &[b, s, f] = features.shape() else {
            return Err(Error::Input(format!(
                "features must be [batch, src_len, feat_dim], got {:?}",
                features.shape()
            )));
        };
        if s == 0 || s > cfg.max_src_len {
            return Err(Error::Input(format!(
                "source length {s} outside 1..={}",
                cfg.max_src_len
            )));
        }
        if f != cfg.feat_dim {
            return Err(Error::Input(format!(
                "feature width {f} does not match model feat_dim {}",
                cfg.feat_dim
            )));
        }
        let x = cx.tape.constant(features.reshape(&[b * s, f])?);
        let sigma = if cx.training { sigma } else { 0.0 };
        let x = cx.tape.gaussian_noise(x, sigma, noise_rng)?;
        let h = cx.linear(x, lay.in_w, lay.in_b)?;
        let positions: Vec<usize> = (0..b).flat_map(|_| 0..s).collect();
        let pos = cx.tape.embed(cx.p[lay.src_pos], &positions)?;
        let mut h = cx.tape.add(h, pos)?;
        for layer in &lay.enc {
            let a = cx.norm(h, &layer.ln1)?;
            let a = cx.attention(&layer.attn, a, a, b, s, s, cfg.n_heads, None)?;
            let a = cx.dropout(a)?;
            h = cx.tape.add(h, a)?;
            let a = cx.norm(h, &layer.ln2)?;
            let a = cx.ffn(a, &layer.ffn, cfg.activation)?;
            let a = cx.dropout(a)?;
            h = cx.tape.add(h, a)?;
        }
        cx.norm(h, &lay.enc_ln)
    }

    /// Decoder over `batch` rows of `t` input tokens; returns logits
    /// `[batch*t × vocab]`.
    fn decode_in(
        &self,
        cx: &mut Ctx<'_>,
        lay: &Layout,
        enc: Var,
        batch: usize,
        src_len: usize,
        tokens: &[usize],
    ) -> Result<Var> {
        let cfg = &self.config;
        let t = tokens.len() / batch.max(1);
        if t == 0 || t > cfg.max_tgt_len {
            return Err(Error::Input(format!(
                "target length {t} outside 1..={}",
                cfg.max_tgt_len
            )));
        }
        let x = cx.tape.embed(cx.p[lay.tok], tokens)?;
        let positions: Vec<usize> = (0..batch).flat_map(|_| 0..t).collect();
        let pos = cx.tape.embed(cx.p[lay.tgt_pos], &positions)?;
        let mut h = cx.tape.add(x, pos)?;
        let masks: Vec<Tensor> = tokens.chunks_exact(t).map(decoder_mask).collect();
        for layer in &lay.dec {
            let a = cx.norm(h, &layer.ln1)?;
            let a = cx.attention(&layer.self_attn, a, a, batch, t, t, cfg.n_heads, Some(&masks))?;
            let a = cx.dropout(a)?;
            h = cx.tape.add(h, a)?;
            let a = cx.norm(h, &layer.ln2)?;
            let a = cx.attention(&layer.cross, a, enc, batch, t, src_len, cfg.n_heads, None)?;
            let a = cx.dropout(a)?;
            h = cx.tape.add(h, a)?;
            let a = cx.norm(h, &layer.ln3)?;
            let a = cx.ffn(a, &layer.ffn, cfg.activation)?;
            let a = cx.dropout(a)?;
            h = cx.tape.add(h, a)?;
        }
        let h = cx.norm(h, &lay.dec_ln)?;
        cx.linear(h, lay.out_w, lay.out_b)
    }

    #[allow(clippy::too_many_arguments)]
    fn run_loss(
        &self,
        batch: &Batch,
        epoch: u32,
        curriculum: &Curriculum,
        epsilon: f64,
        rngs: &mut StepRngs,
        training: bool,
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<Tensor>>)> {
        let (sigma, delta) = if training { curriculum.levels(epoch) } else { (0.0, 0.0) };
        let lay = self.layout();
        let mut cx = self.ctx(with_grad, delta, training, &mut rngs.dropout);
        let enc = self.encode_in(&mut cx, &lay, &batch.features, sigma, &mut rngs.noise)?;
        let inputs = batch.decoder_inputs();
        let logits = self.decode_in(&mut cx, &lay, enc, batch.size(), batch.features.shape()[1], &inputs)?;
        let loss = cx.tape.cross_entropy_smoothed(logits, &batch.targets, epsilon, PAD)?;
        let value = cx.tape.value(loss).item()?;
        if !with_grad {
            return Ok((value, None));
        }
        let mut grads = cx.tape.backward(loss)?;
        let g =
            cx.p.iter()
                .map(|&v| grads.take(v).expect("parameter gradient"))
                .collect();
        Ok((value, Some(g)))
    }

    /// Teacher-forced, label-smoothed loss of `batch`.
    ///
    /// In training mode the features receive noise at `sigma(epoch)` and all
    /// dropout sites use `delta(epoch)`; in evaluation mode neither is active
    /// and the result does not depend on `curriculum`.
    pub fn forward_loss(
        &self,
        batch: &Batch,
        epoch: u32,
        curriculum: &Curriculum,
        epsilon: f64,
        rngs: &mut StepRngs,
        training: bool,
    ) -> Result<f64> {
        self.run_loss(batch, epoch, curriculum, epsilon, rngs, training, false)
            .map(|(l, _)| l)
    }

    /// [`Self::forward_loss`] plus gradients for every parameter, in
    /// [`Self::params`] order.
    pub fn loss_and_grads(
        &self,
        batch: &Batch,
        epoch: u32,
        curriculum: &Curriculum,
        epsilon: f64,
        rngs: &mut StepRngs,
        training: bool,
    ) -> Result<(f64, Vec<Tensor>)> {
        let (l, g) = self.run_loss(batch, epoch, curriculum, epsilon, rngs, training, true)?;
        Ok((l, g.expect("gradients requested")))
    }

    /// Encoder states `[src_len × d_model]` for one `[src_len × feat_dim]`
    /// sequence. Noise at `sigma` is applied only when `training`; dropout is
    /// never applied here.
    pub fn encode(&self, features: &Tensor, sigma: f64, rng: &mut StreamRng, training: bool) -> Result<Tensor> {
        let (s, f) = features.dims2()?;
        let features = features.reshape(&[1, s, f])?;
        let lay = self.layout();
        let mut unused = RngStreams::default().stream(Purpose::Dropout, &[]);
        let mut cx = self.ctx(false, 0.0, training, &mut unused);
        let enc = self.encode_in(&mut cx, &lay, &features, sigma, rng)?;
        Ok(cx.tape.value(enc).clone())
    }

    /// Next-token logits `[vocab_size]` after `prefix`.
    ///
    /// The logits are read at the last non-PAD position of the prefix, and
    /// PAD positions are masked as attention keys, so trailing padding does
    /// not change the result.
    pub fn decode_step(&self, encoded: &Tensor, prefix: &[usize]) -> Result<Tensor> {
        let (s, d) = encoded.dims2()?;
        if d != self.config.d_model {
            return Err(Error::Input(format!(
                "encoded width {d} does not match d_model {}",
                self.config.d_model
            )));
        }
        let last = prefix
            .iter()
            .rposition(|&t| t != PAD)
            .ok_or_else(|| Error::Input("decode prefix holds no real token".into()))?;
        let lay = self.layout();
        let mut unused = RngStreams::default().stream(Purpose::Dropout, &[]);
        let mut cx = self.ctx(false, 0.0, false, &mut unused);
        let enc = cx.tape.constant(encoded.clone());
        let logits = self.decode_in(&mut cx, &lay, enc, 1, s, prefix)?;
        let v = self.config.vocab_size;
        let row = cx.tape.value(logits).row(last).to_vec();
        Tensor::new(vec![v], row)
    }

    /// Greedy decoding from [`BOS`]: argmax each step (ties go to the lowest
    /// id), stopping at [`EOS`] or after `max_len` tokens. Neither BOS nor
    /// the final EOS is included in the output.
    pub fn greedy_decode(&self, features: &Tensor, max_len: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        if max_len == 0 {
            return Ok(out);
        }
        let mut unused = RngStreams::default().stream(Purpose::Noise, &[]);
        let encoded = self.encode(features, 0.0, &mut unused, false)?;
        let mut prefix = vec![BOS];
        let steps = max_len.min(self.config.max_tgt_len);
        for _ in 0..steps {
            let logits = self.decode_step(&encoded, &prefix)?;
            let next = argmax_lowest(logits.data());
            if next == EOS {
                break;
            }
            out.push(next);
            prefix.push(next);
        }
        Ok(out)
    }

    /// Rounds all parameters onto the `f32` grid so they survive a
    /// checkpoint round trip bit for bit.
    pub fn round_params_to_f32(&mut self) {
        for p in &mut self.params {
            p.round_to_f32();
        }
    }
}
