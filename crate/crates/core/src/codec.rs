//! Trainable codec around the quantum transcoding layer.
//!
//! ```text
//! [x; eps] -> tanh MLP -> y~ -> y = y~/|y~| -> L = pack(y) -> rho = L L^H
//!   -> E_eps(rho) -> v_i = tr(E_eps(rho) O_i) -> y^ = W_p [v; eps] + b_p
//!   -> [y^; eps] -> tanh MLP -> (x^, logits)
//! ```
//!
//! Gradients are hand-derived vector-Jacobian products. For the quantum
//! layer, with G = (1 - eps) sum_i g_i O_i and M = G L, the gradient of the
//! real and imaginary part of L_jk is 2 Re M_jk and 2 Im M_jk. An observable
//! O = A/|A| receives the matrix gradient g_i (E_eps(rho) - v_i O) / |A|.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::channel::{depolarize, NoiseParam};
use crate::dataset::{Image, Sample};
use crate::encode::{encode, slot_layout, LatentVector, Slot};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport};
use crate::qcore::{ComplexMatrix, HermitianParams};
use crate::readout::{expectations_of, normalize_observable};

/// Latent norms below this are rejected rather than renormalized.
pub const MIN_LATENT_NORM: f64 = 1e-12;

/// Layer sizes of the codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecDims {
    pub height: usize,
    pub width: usize,
    pub hidden: usize,
    pub latent: usize,
    pub n: usize,
    pub observables: usize,
    pub classes: usize,
}

impl CodecDims {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels() == 0 || self.hidden == 0 || self.latent == 0 || self.observables == 0 || self.classes == 0 {
            return Err(Error::InvalidArgument(format!("degenerate codec dims {self:?}")));
        }
        if self.n == 0 || self.n * self.n < self.latent {
            return Err(Error::DimensionTooSmall { len: self.latent, n: self.n });
        }
        Ok(())
    }
}

/// All trainable parameters. Matrices are row-major (out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct CodecParams {
    pub dims: CodecDims,
    pub enc_w1: Vec<f64>,
    pub enc_b1: Vec<f64>,
    pub enc_w2: Vec<f64>,
    pub enc_b2: Vec<f64>,
    pub observables: Vec<f64>,
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
    pub dec_w1: Vec<f64>,
    pub dec_b1: Vec<f64>,
    pub rec_w: Vec<f64>,
    pub rec_b: Vec<f64>,
    pub cls_w: Vec<f64>,
    pub cls_b: Vec<f64>,
}

/// Block names in declaration (and checkpoint) order.
pub const BLOCK_NAMES: [&str; 13] = [
    "enc_w1", "enc_b1", "enc_w2", "enc_b2", "observables", "proj_w", "proj_b", "dec_w1", "dec_b1", "rec_w", "rec_b",
    "cls_w", "cls_b",
];

impl CodecParams {
    pub fn zeros(dims: CodecDims) -> Self {
        let p = dims.pixels();
        let h = dims.hidden;
        let nl = dims.latent;
        let k = dims.observables;
        let nn = dims.n * dims.n;
        Self {
            dims,
            enc_w1: vec![0.0; h * (p + 1)],
            enc_b1: vec![0.0; h],
            enc_w2: vec![0.0; nl * h],
            enc_b2: vec![0.0; nl],
            observables: vec![0.0; k * nn],
            proj_w: vec![0.0; nl * (k + 1)],
            proj_b: vec![0.0; nl],
            dec_w1: vec![0.0; h * (nl + 1)],
            dec_b1: vec![0.0; h],
            rec_w: vec![0.0; p * h],
            rec_b: vec![0.0; p],
            cls_w: vec![0.0; dims.classes * h],
            cls_b: vec![0.0; dims.classes],
        }
    }

    /// Gaussian weights with variance 1/fan_in, zero biases, observables with
    /// i.i.d. standard normal Hermitian parameters.
    pub fn init(dims: CodecDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(dims);
        let fill = |w: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng| {
            let dist = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive std");
            w.iter_mut().for_each(|x| *x = dist.sample(rng));
        };
        let p = dims.pixels();
        fill(&mut params.enc_w1, p + 1, &mut rng);
        fill(&mut params.enc_w2, dims.hidden, &mut rng);
        fill(&mut params.observables, 1, &mut rng);
        fill(&mut params.proj_w, dims.observables + 1, &mut rng);
        fill(&mut params.dec_w1, dims.latent + 1, &mut rng);
        fill(&mut params.rec_w, dims.hidden, &mut rng);
        fill(&mut params.cls_w, dims.hidden, &mut rng);
        Ok(params)
    }

    pub fn blocks(&self) -> [&[f64]; 13] {
        [
            &self.enc_w1,
            &self.enc_b1,
            &self.enc_w2,
            &self.enc_b2,
            &self.observables,
            &self.proj_w,
            &self.proj_b,
            &self.dec_w1,
            &self.dec_b1,
            &self.rec_w,
            &self.rec_b,
            &self.cls_w,
            &self.cls_b,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 13] {
        [
            &mut self.enc_w1,
            &mut self.enc_b1,
            &mut self.enc_w2,
            &mut self.enc_b2,
            &mut self.observables,
            &mut self.proj_w,
            &mut self.proj_b,
            &mut self.dec_w1,
            &mut self.dec_b1,
            &mut self.rec_w,
            &mut self.rec_b,
            &mut self.cls_w,
            &mut self.cls_b,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    fn add_assign(&mut self, other: &Self) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
    }

    fn scale(&mut self, s: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Raw Hermitian parameters of observable `i`.
    pub fn observable_params(&self, i: usize) -> &[f64] {
        let nn = self.dims.n * self.dims.n;
        &self.observables[i * nn..(i + 1) * nn]
    }
}

/// Normalized observables and their raw norms, shared by a batch.
struct Prepared {
    ops: Vec<ComplexMatrix>,
    norms: Vec<f64>,
}

fn prepare(params: &CodecParams) -> Result<Prepared> {
    let n = params.dims.n;
    let mut ops = Vec::with_capacity(params.dims.observables);
    let mut norms = Vec::with_capacity(params.dims.observables);
    for i in 0..params.dims.observables {
        let raw = HermitianParams::new(n, params.observable_params(i).to_vec())?;
        let op = normalize_observable(&raw)?;
        norms.push(raw.to_matrix().frobenius_norm());
        ops.push(op);
    }
    Ok(Prepared { ops, norms })
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    eps: f64,
    input: Vec<f64>,
    enc_h: Vec<f64>,
    latent_norm: f64,
    latent: Vec<f64>,
    factor: ComplexMatrix,
    noisy: ComplexMatrix,
    features: Vec<f64>,
    dec_in: Vec<f64>,
    dec_h: Vec<f64>,
}

impl Tape {
    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Decoder input minus the appended noise level.
    pub fn projected(&self) -> &[f64] {
        &self.dec_in[..self.dec_in.len() - 1]
    }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub reconstruction: Vec<f64>,
    pub logits: Vec<f64>,
    pub tape: Tape,
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(o, bias)| w[o * cols..(o + 1) * cols].iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bias)
        .collect()
}

/// Accumulates grad_w += g x^T, grad_b += g and returns W^T g.
fn affine_backward(w: &[f64], x: &[f64], g: &[f64], grad_w: &mut [f64], grad_b: &mut [f64]) -> Vec<f64> {
    let cols = x.len();
    let mut gx = vec![0.0; cols];
    for (o, &go) in g.iter().enumerate() {
        grad_b[o] += go;
        if go == 0.0 {
            continue;
        }
        let row = &w[o * cols..(o + 1) * cols];
        let grow = &mut grad_w[o * cols..(o + 1) * cols];
        for c in 0..cols {
            grow[c] += go * x[c];
            gx[c] += row[c] * go;
        }
    }
    gx
}

fn forward_prepared(pixels: &[f64], eps: NoiseParam, params: &CodecParams, prep: &Prepared) -> Result<ForwardPass> {
    let dims = params.dims;
    if pixels.len() != dims.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "{} pixels for a codec expecting {}",
            pixels.len(),
            dims.pixels()
        )));
    }
    let e = eps.value();
    let mut input = pixels.to_vec();
    input.push(e);
    let enc_h: Vec<f64> = affine(&params.enc_w1, &params.enc_b1, &input).into_iter().map(f64::tanh).collect();
    let raw_latent = affine(&params.enc_w2, &params.enc_b2, &enc_h);
    let scale = raw_latent.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let latent_norm = if scale > 0.0 && scale.is_finite() {
        scale * raw_latent.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt()
    } else {
        scale
    };
    if !(latent_norm >= MIN_LATENT_NORM) || !latent_norm.is_finite() {
        return Err(Error::VanishingNorm(latent_norm));
    }
    let y = LatentVector::new(raw_latent.iter().map(|v| v / latent_norm).collect())?;
    let rho = encode(&y, dims.n)?;
    let noisy = depolarize(&rho, eps);
    let features = expectations_of(noisy.matrix(), &prep.ops)?;

    let mut proj_in = features.clone();
    proj_in.push(e);
    let mut dec_in = affine(&params.proj_w, &params.proj_b, &proj_in);
    dec_in.push(e);
    let dec_h: Vec<f64> = affine(&params.dec_w1, &params.dec_b1, &dec_in).into_iter().map(f64::tanh).collect();
    let reconstruction = affine(&params.rec_w, &params.rec_b, &dec_h);
    let logits = affine(&params.cls_w, &params.cls_b, &dec_h);

    let factor = crate::encode::pack(&y, dims.n)?.matrix().clone();
    Ok(ForwardPass {
        reconstruction,
        logits,
        tape: Tape {
            eps: e,
            input,
            enc_h,
            latent_norm,
            latent: y.values().to_vec(),
            factor,
            noisy: noisy.into_matrix(),
            features,
            dec_in,
            dec_h,
        },
    })
}

/// Runs the full pipeline on one image.
pub fn forward(pixels: &[f64], eps: NoiseParam, params: &CodecParams) -> Result<ForwardPass> {
    forward_prepared(pixels, eps, params, &prepare(params)?)
}

/// Loss weights for the multi-task objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub mse: f64,
    pub ce: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { mse: 1.0, ce: 1.0 }
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Per-pixel MSE.
pub fn mse_loss(reconstruction: &[f64], target: &[f64]) -> f64 {
    reconstruction.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / target.len() as f64
}

/// -log softmax(logits)[label], computed with log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    -log_softmax(logits)[label]
}

/// w_mse * per-pixel MSE + w_ce * cross-entropy.
pub fn loss(reconstruction: &[f64], logits: &[f64], sample: &Sample, weights: LossWeights) -> f64 {
    let mut total = 0.0;
    if weights.mse != 0.0 {
        total += weights.mse * mse_loss(reconstruction, &sample.image.pixels);
    }
    if weights.ce != 0.0 {
        total += weights.ce * cross_entropy(logits, sample.label);
    }
    total
}

/// Gradient of [`loss`] for one forward pass, as a parameter-shaped struct.
pub fn backward(
    pass: &ForwardPass,
    sample: &Sample,
    weights: LossWeights,
    params: &CodecParams,
) -> Result<CodecParams> {
    backward_prepared(pass, sample, weights, params, &prepare(params)?)
}

fn backward_prepared(
    pass: &ForwardPass,
    sample: &Sample,
    weights: LossWeights,
    params: &CodecParams,
    prep: &Prepared,
) -> Result<CodecParams> {
    let dims = params.dims;
    let t = &pass.tape;
    let mut grad = CodecParams::zeros(dims);

    let p = dims.pixels() as f64;
    let g_rec: Vec<f64> = pass
        .reconstruction
        .iter()
        .zip(&sample.image.pixels)
        .map(|(a, b)| weights.mse * 2.0 * (a - b) / p)
        .collect();
    let g_logits: Vec<f64> = if weights.ce != 0.0 {
        log_softmax(&pass.logits)
            .iter()
            .enumerate()
            .map(|(c, lp)| weights.ce * (lp.exp() - if c == sample.label { 1.0 } else { 0.0 }))
            .collect()
    } else {
        vec![0.0; dims.classes]
    };

    let mut g_h = affine_backward(&params.rec_w, &t.dec_h, &g_rec, &mut grad.rec_w, &mut grad.rec_b);
    let g_h_cls = affine_backward(&params.cls_w, &t.dec_h, &g_logits, &mut grad.cls_w, &mut grad.cls_b);
    g_h.iter_mut().zip(&g_h_cls).for_each(|(a, b)| *a += b);
    let g_a: Vec<f64> = g_h.iter().zip(&t.dec_h).map(|(g, h)| g * (1.0 - h * h)).collect();
    let g_dec_in = affine_backward(&params.dec_w1, &t.dec_in, &g_a, &mut grad.dec_w1, &mut grad.dec_b1);
    let g_proj = &g_dec_in[..dims.latent];

    let mut proj_in = t.features.clone();
    proj_in.push(t.eps);
    let g_proj_in = affine_backward(&params.proj_w, &proj_in, g_proj, &mut grad.proj_w, &mut grad.proj_b);
    let g_v = &g_proj_in[..dims.observables];

    // Observables: d v_i = Re tr(Gamma_i dA_i), Gamma_i = (sigma - v_i O_i) / |A_i|.
    let n = dims.n;
    let nn = n * n;
    for (i, (&gv, op)) in g_v.iter().zip(&prep.ops).enumerate() {
        if gv == 0.0 {
            continue;
        }
        let gamma = t
            .noisy
            .sub(&op.scale_real(t.features[i]))?
            .scale_real(gv / prep.norms[i]);
        let pulled = HermitianParams::pullback(n, &gamma);
        grad.observables[i * nn..(i + 1) * nn].iter_mut().zip(pulled).for_each(|(a, b)| *a += b);
    }

    // Quantum layer back to the packed factor.
    let keep = 1.0 - t.eps;
    if keep != 0.0 {
        let mut g_state = ComplexMatrix::zeros(n, n);
        for (&gv, op) in g_v.iter().zip(&prep.ops) {
            for (dst, src) in g_state.entries_mut().iter_mut().zip(op.entries()) {
                *dst += src * (gv * keep);
            }
        }
        let m = g_state.matmul(&t.factor)?;
        let g_y: Vec<f64> = slot_layout(n)
            .into_iter()
            .take(dims.latent)
            .map(|slot| match slot {
                Slot::Diag(k) => 2.0 * m[(k, k)].re,
                Slot::Re(j, k) => 2.0 * m[(j, k)].re,
                Slot::Im(j, k) => 2.0 * m[(j, k)].im,
            })
            .collect();
        // Sphere projection Jacobian (I - y y^T) / |y~|.
        let radial: f64 = g_y.iter().zip(&t.latent).map(|(a, b)| a * b).sum();
        let g_raw: Vec<f64> =
            g_y.iter().zip(&t.latent).map(|(g, y)| (g - radial * y) / t.latent_norm).collect();
        let g_h = affine_backward(&params.enc_w2, &t.enc_h, &g_raw, &mut grad.enc_w2, &mut grad.enc_b2);
        let g_a: Vec<f64> = g_h.iter().zip(&t.enc_h).map(|(g, h)| g * (1.0 - h * h)).collect();
        affine_backward(&params.enc_w1, &t.input, &g_a, &mut grad.enc_w1, &mut grad.enc_b1);
    }
    Ok(grad)
}

/// Mean loss over `batch` and its gradient. Per-sample work runs in parallel;
/// gradients are summed in batch order.
pub fn batch_gradient(
    batch: &[&Sample],
    eps: NoiseParam,
    params: &CodecParams,
    weights: LossWeights,
) -> Result<(f64, CodecParams)> {
    let prep = prepare(params)?;
    let per_sample: Vec<Result<(f64, CodecParams)>> = batch
        .par_iter()
        .map(|s| {
            let pass = forward_prepared(&s.image.pixels, eps, params, &prep)?;
            let l = loss(&pass.reconstruction, &pass.logits, s, weights);
            let g = backward_prepared(&pass, s, weights, params, &prep)?;
            Ok((l, g))
        })
        .collect();
    let mut total = 0.0;
    let mut grad = CodecParams::zeros(params.dims);
    for item in per_sample {
        let (l, g) = item?;
        total += l;
        grad.add_assign(&g);
    }
    let inv = 1.0 / batch.len() as f64;
    grad.scale(inv);
    Ok((total * inv, grad))
}

/// How the channel noise is chosen for each training batch.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSchedule {
    Fixed(f64),
    /// Uniform draw from the grid per batch.
    Grid(Vec<f64>),
}

impl NoiseSchedule {
    /// {0, 0.1, ..., 0.9}.
    pub fn default_grid() -> Self {
        NoiseSchedule::Grid((0..10).map(|i| i as f64 / 10.0).collect())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<NoiseParam> {
        match self {
            NoiseSchedule::Fixed(e) => NoiseParam::new(*e),
            NoiseSchedule::Grid(grid) => {
                let e = grid.choose(rng).ok_or_else(|| Error::InvalidArgument("empty noise grid".into()))?;
                NoiseParam::new(*e)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub noise: NoiseSchedule,
    pub n: usize,
    pub observables: usize,
    pub latent: usize,
    pub hidden: usize,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 200,
            batch_size: 16,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            noise: NoiseSchedule::default_grid(),
            n: 8,
            observables: 10,
            latent: 64,
            hidden: 32,
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || self.batch_size == 0 || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("learning rate, batch size and weight decay must be valid".into()));
        }
        if let NoiseSchedule::Grid(g) = &self.noise {
            if g.is_empty() {
                return Err(Error::InvalidArgument("empty noise grid".into()));
            }
        }
        Ok(())
    }
}

/// AdamW state with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: i32,
    m: CodecParams,
    v: CodecParams,
}

impl AdamW {
    pub fn new(cfg: &TrainConfig, dims: CodecDims) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            weight_decay: cfg.weight_decay,
            step: 0,
            m: CodecParams::zeros(dims),
            v: CodecParams::zeros(dims),
        }
    }

    /// Observable parameters are scale-free, so they are not decayed.
    pub fn update(&mut self, params: &mut CodecParams, grad: &CodecParams) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (lr, b1, b2, eps, wd) = (self.lr, self.beta1, self.beta2, self.eps, self.weight_decay);
        let blocks = params.blocks_mut().into_iter().zip(grad.blocks()).zip(self.m.blocks_mut()).zip(self.v.blocks_mut());
        for (idx, (((p, g), m), v)) in blocks.enumerate() {
            let decay = if BLOCK_NAMES[idx] == "observables" { 0.0 } else { wd };
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + decay * p[i]);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: CodecParams,
    pub log: Vec<EpochLog>,
}

pub fn dims_for(samples: &[Sample], cfg: &TrainConfig) -> Result<CodecDims> {
    let first = samples.first().ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?;
    let classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(1);
    let dims = CodecDims {
        height: first.image.height,
        width: first.image.width,
        hidden: cfg.hidden,
        latent: cfg.latent,
        n: cfg.n,
        observables: cfg.observables,
        classes,
    };
    dims.validate()?;
    Ok(dims)
}

/// Trains from a fresh initialization seeded by `cfg.seed`.
pub fn train(dataset: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let dims = dims_for(dataset, cfg)?;
    let params = CodecParams::init(dims, cfg.seed)?;
    train_from(params, dataset, cfg)
}

/// Continues training from `params`.
pub fn train_from(mut params: CodecParams, dataset: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if dataset.iter().any(|s| s.image.len() != params.dims.pixels() || s.label >= params.dims.classes) {
        return Err(Error::DimensionMismatch("sample does not match codec dims".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let mut opt = AdamW::new(cfg, params.dims);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let eps = cfg.noise.draw(&mut rng)?;
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &dataset[i]).collect();
            let (l, grad) = match batch_gradient(&batch, eps, &params, cfg.weights) {
                Ok(v) => v,
                Err(Error::VanishingNorm(_)) => return Err(Error::Diverged { epoch }),
                Err(e) => return Err(e),
            };
            if !l.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            total += l * batch.len() as f64;
            opt.update(&mut params, &grad);
            if !params.is_finite() {
                return Err(Error::Diverged { epoch });
            }
        }
        log.push(EpochLog { epoch, loss: total / dataset.len() as f64 });
    }
    Ok(TrainOutcome { params, log })
}

/// Reconstruction (clamped to [0, 1]) and logits for one image.
pub fn reconstruct(image: &Image, eps: NoiseParam, params: &CodecParams) -> Result<(Image, Vec<f64>)> {
    let pass = forward(&image.pixels, eps, params)?;
    let pixels = pass.reconstruction.iter().map(|p| p.clamp(0.0, 1.0)).collect();
    Ok((Image::new(image.height, image.width, pixels)?, pass.logits))
}

/// Mean per-image PSNR, mean SSIM, top-1 accuracy and mean MSE at noise `eps`.
pub fn evaluate(params: &CodecParams, dataset: &[Sample], eps: NoiseParam) -> Result<MetricReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let prep = prepare(params)?;
    let rows: Vec<Result<(f64, f64, f64, Vec<f64>)>> = dataset
        .par_iter()
        .map(|s| {
            let pass = forward_prepared(&s.image.pixels, eps, params, &prep)?;
            let recon: Vec<f64> = pass.reconstruction.iter().map(|p| p.clamp(0.0, 1.0)).collect();
            let mse = metrics::mse(&recon, &s.image.pixels)?;
            let psnr = metrics::psnr_from_mse(mse, 1.0);
            let ssim = metrics::ssim(&recon, &s.image.pixels, 1.0)?;
            Ok((psnr, ssim, mse, pass.logits))
        })
        .collect();
    let mut psnr = 0.0;
    let mut ssim = 0.0;
    let mut mse = 0.0;
    let mut logits = Vec::with_capacity(dataset.len());
    for row in rows {
        let (p, s, m, l) = row?;
        psnr += p;
        ssim += s;
        mse += m;
        logits.push(l);
    }
    let count = dataset.len() as f64;
    let labels: Vec<usize> = dataset.iter().map(|s| s.label).collect();
    Ok(MetricReport {
        psnr_db: psnr / count,
        ssim: ssim / count,
        top1: metrics::top1(&logits, &labels)?,
        mse: mse / count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> CodecDims {
        CodecDims { height: 3, width: 3, hidden: 5, latent: 7, n: 3, observables: 4, classes: 3 }
    }

    fn sample(seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Sample {
            image: Image::new(3, 3, (0..9).map(|_| rng.gen()).collect()).unwrap(),
            label: rng.gen_range(0..3),
        }
    }

    fn total_loss(params: &CodecParams, s: &Sample, eps: NoiseParam, w: LossWeights) -> f64 {
        let pass = forward(&s.image.pixels, eps, params).unwrap();
        loss(&pass.reconstruction, &pass.logits, s, w)
    }

    #[test]
    fn loss_examples() {
        let img = Image::new(8, 8, vec![0.5; 64]).unwrap();
        let s = Sample { image: img.clone(), label: 1 };
        let w = LossWeights { mse: 1.0, ce: 0.0 };
        assert_eq!(loss(&img.pixels, &[0.0; 3], &s, w), 0.0);
        let shifted: Vec<f64> = img.pixels.iter().map(|p| p + 0.1).collect();
        assert!((loss(&shifted, &[0.0; 3], &s, w) - 0.01).abs() < 1e-15);
        let ce_only = LossWeights { mse: 0.0, ce: 1.0 };
        assert!(loss(&img.pixels, &[0.0, 30.0, 0.0], &s, ce_only) < 1e-9);
        assert!((cross_entropy(&[0.0, 0.0, 0.0, 0.0], 2) - 4f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&[1000.0, -1000.0], 0).is_finite());
    }

    #[test]
    fn forward_normalizes_latent() {
        let params = CodecParams::init(dims(), 1).unwrap();
        let pass = forward(&sample(2).image.pixels, NoiseParam::new(0.3).unwrap(), &params).unwrap();
        let norm: f64 = pass.tape.latent().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_decoder_outputs_bias_image() {
        let mut params = CodecParams::init(dims(), 3).unwrap();
        params.rec_w.iter_mut().for_each(|w| *w = 0.0);
        params.rec_b = (0..9).map(|i| i as f64 / 10.0).collect();
        for seed in 0..3 {
            let pass = forward(&sample(seed).image.pixels, NoiseParam::new(0.2).unwrap(), &params).unwrap();
            assert_eq!(pass.reconstruction, params.rec_b);
        }
    }

    #[test]
    fn full_noise_makes_output_input_independent() {
        let params = CodecParams::init(dims(), 4).unwrap();
        let eps = NoiseParam::new(1.0).unwrap();
        let a = forward(&sample(5).image.pixels, eps, &params).unwrap();
        let b = forward(&sample(6).image.pixels, eps, &params).unwrap();
        assert_eq!(a.reconstruction, b.reconstruction);
        assert_eq!(a.logits, b.logits);

        let grad = backward(&a, &sample(5), LossWeights::default(), &params).unwrap();
        let enc: f64 = [&grad.enc_w1, &grad.enc_b1, &grad.enc_w2, &grad.enc_b2]
            .iter()
            .flat_map(|b| b.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        assert!(enc <= 1e-10);
    }

    #[test]
    fn vanishing_latent_is_an_error() {
        let mut params = CodecParams::init(dims(), 7).unwrap();
        params.enc_w2.iter_mut().for_each(|w| *w = 0.0);
        let err = forward(&sample(8).image.pixels, NoiseParam::NOISELESS, &params).unwrap_err();
        assert!(matches!(err, Error::VanishingNorm(_)));
    }

    #[test]
    fn dimension_misconfiguration() {
        let params = CodecParams::init(dims(), 9).unwrap();
        assert!(forward(&[0.5; 4], NoiseParam::NOISELESS, &params).is_err());
        let bad = CodecDims { latent: 10, ..dims() };
        assert!(CodecParams::init(bad, 0).is_err());
    }

    fn central_difference(
        params: &CodecParams,
        block: usize,
        idx: usize,
        s: &Sample,
        eps: NoiseParam,
        w: LossWeights,
    ) -> f64 {
        let h = 1e-5;
        let mut plus = params.clone();
        plus.blocks_mut()[block][idx] += h;
        let mut minus = params.clone();
        minus.blocks_mut()[block][idx] -= h;
        (total_loss(&plus, s, eps, w) - total_loss(&minus, s, eps, w)) / (2.0 * h)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let w = LossWeights::default();
        for seed in 0..3 {
            let params = CodecParams::init(dims(), 100 + seed).unwrap();
            let s = sample(200 + seed);
            let eps = NoiseParam::new(0.35).unwrap();
            let pass = forward(&s.image.pixels, eps, &params).unwrap();
            let grad = backward(&pass, &s, w, &params).unwrap();
            for (b, g) in grad.blocks().iter().enumerate() {
                for (i, &analytic) in g.iter().enumerate() {
                    let numeric = central_difference(&params, b, i, &s, eps, w);
                    let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2);
                    assert!(err <= 1e-5, "{} [{i}]: analytic {analytic} numeric {numeric}", BLOCK_NAMES[b]);
                }
            }
        }
    }

    #[test]
    fn bias_gradients_at_zero_weights() {
        let mut params = CodecParams::zeros(dims());
        params.enc_b2 = vec![0.3, -0.2, 0.5, 0.1, 0.0, 0.4, -0.6];
        params.observables = CodecParams::init(dims(), 10).unwrap().observables;
        let s = sample(11);
        let eps = NoiseParam::new(0.1).unwrap();
        let w = LossWeights::default();
        let pass = forward(&s.image.pixels, eps, &params).unwrap();
        let grad = backward(&pass, &s, w, &params).unwrap();
        for block in [1usize, 3, 6, 8, 10, 12] {
            for i in 0..grad.blocks()[block].len() {
                let numeric = central_difference(&params, block, i, &s, eps, w);
                let analytic = grad.blocks()[block][i];
                assert!(
                    (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(numeric.abs()).max(1e-3),
                    "{} [{i}]",
                    BLOCK_NAMES[block]
                );
            }
        }
    }

    #[test]
    fn observable_radial_gradient_vanishes() {
        let params = CodecParams::init(dims(), 12).unwrap();
        let s = sample(13);
        let pass = forward(&s.image.pixels, NoiseParam::new(0.4).unwrap(), &params).unwrap();
        let grad = backward(&pass, &s, LossWeights::default(), &params).unwrap();
        let nn = 9;
        for i in 0..4 {
            let radial: f64 = grad.observables[i * nn..(i + 1) * nn]
                .iter()
                .zip(params.observable_params(i))
                .map(|(g, a)| g * a)
                .sum();
            assert!(radial.abs() <= 1e-9, "observable {i}: {radial}");
        }
    }

    fn toy_set(count: usize, seed: u64) -> Vec<Sample> {
        (0..count).map(|i| sample(seed + i as u64)).collect()
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let data = toy_set(8, 300);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 4,
            n: 3,
            latent: 7,
            observables: 4,
            hidden: 5,
            ..TrainConfig::default()
        };
        let out = train(&data, &cfg).unwrap();
        let init = CodecParams::init(out.params.dims, cfg.seed).unwrap();
        assert_eq!(out.params, init);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let data = toy_set(32, 400);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            epochs: 40,
            batch_size: 8,
            n: 3,
            latent: 7,
            observables: 4,
            hidden: 5,
            seed: 5,
            ..TrainConfig::default()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        let median = |xs: &[EpochLog]| {
            let mut v: Vec<f64> = xs.iter().map(|e| e.loss).collect();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        assert!(median(&a.log[36..]) < median(&a.log[..4]));
    }

    #[test]
    fn divergence_reports_epoch() {
        let data = toy_set(4, 500);
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 5,
            batch_size: 4,
            n: 3,
            latent: 7,
            observables: 4,
            hidden: 5,
            ..TrainConfig::default()
        };
        let got = train(&data, &cfg);
        assert!(matches!(got, Err(Error::Diverged { .. })), "{:?}", got.map(|o| o.log));
    }
}
