//! Masked GCN autoencoder (generator) and GCN-readout discriminator.
//!
//! Every GCN layer computes `act(Â (H W) + b)`. Parameters live in two
//! [`GradSlot`] lists so each side can be stepped by its own optimizer.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compute::{
    activation, activation_backward, matmul, matmul_into, readout_pool, readout_pool_backward, Activation, GradSlot,
    PoolCache, ReadoutMode, SparseOp, Tensor, Transpose,
};
use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_f: usize,
    pub d_h: usize,
    /// Hidden width of the discriminator's GCN layers.
    pub d_disc: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub disc_layers: usize,
    pub readout: ReadoutMode,
    pub mask_ratio: f64,
    pub remask_decoder: bool,
    pub prelu_slope: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config { key: key.into(), msg });
        for (key, v) in [("model.d_f", self.d_f), ("model.d_h", self.d_h), ("model.d_disc", self.d_disc)] {
            if v == 0 {
                return bad(key, "must be at least 1".into());
            }
        }
        for (key, v) in [
            ("model.enc_layers", self.enc_layers),
            ("model.dec_layers", self.dec_layers),
            ("model.disc_layers", self.disc_layers),
        ] {
            if v == 0 {
                return bad(key, "must be at least 1".into());
            }
        }
        if !(0.0..1.0).contains(&self.mask_ratio) {
            return bad("model.mask_ratio", format!("{} is outside [0, 1)", self.mask_ratio));
        }
        if !self.prelu_slope.is_finite() {
            return bad("model.prelu_slope", "must be finite".into());
        }
        Ok(())
    }

    fn prelu(&self) -> Activation {
        Activation::PRelu(self.prelu_slope)
    }

    fn enc_acts(&self) -> Vec<Activation> {
        vec![self.prelu(); self.enc_layers]
    }

    /// Hidden decoder layers use PReLU; the output layer is linear.
    fn dec_acts(&self) -> Vec<Activation> {
        let mut acts = vec![self.prelu(); self.dec_layers];
        acts[self.dec_layers - 1] = Activation::Identity;
        acts
    }

    fn disc_acts(&self) -> Vec<Activation> {
        vec![self.prelu(); self.disc_layers]
    }
}

/// Generator and discriminator parameters.
///
/// Generator slots: `enc.{l}.w`, `enc.{l}.b`, `dec.{l}.w`, `dec.{l}.b`,
/// `mask_token`. Discriminator slots: `disc.{l}.w`, `disc.{l}.b`,
/// `disc.head.w`, `disc.head.b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub cfg: ModelConfig,
    pub gen: Vec<GradSlot>,
    pub disc: Vec<GradSlot>,
}

impl ModelParams {
    fn dec_first(&self) -> usize {
        2 * self.cfg.enc_layers
    }

    fn token_index(&self) -> usize {
        2 * (self.cfg.enc_layers + self.cfg.dec_layers)
    }

    fn head_index(&self) -> usize {
        2 * self.cfg.disc_layers
    }

    pub fn mask_token(&self) -> &Tensor {
        &self.gen[self.token_index()].value
    }

    pub fn slot(&self, name: &str) -> Option<&GradSlot> {
        self.gen.iter().chain(&self.disc).find(|s| s.name == name)
    }

    pub fn slot_mut(&mut self, name: &str) -> Option<&mut GradSlot> {
        self.gen.iter_mut().chain(self.disc.iter_mut()).find(|s| s.name == name)
    }

    pub fn zero_grads(&mut self) {
        self.gen.iter_mut().chain(self.disc.iter_mut()).for_each(GradSlot::zero_grad);
    }

    pub fn is_finite(&self) -> bool {
        self.gen.iter().chain(&self.disc).all(|s| s.value.is_finite())
    }
}

fn xavier(rows: usize, cols: usize, rng: &mut StreamRng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized buffer")
}

fn push_layer(slots: &mut Vec<GradSlot>, prefix: &str, d_in: usize, d_out: usize, rng: &mut StreamRng) {
    slots.push(GradSlot::new(format!("{prefix}.w"), xavier(d_in, d_out, rng)));
    slots.push(GradSlot::new(format!("{prefix}.b"), Tensor::zeros(1, d_out)));
}

/// Xavier-uniform weights, zero biases, zero mask token. The generator and
/// discriminator draw from separate child streams of `stream`.
pub fn init_params(cfg: &ModelConfig, stream: RngStream) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = stream.derive("init.gen").rng();
    let mut gen = Vec::new();
    for l in 0..cfg.enc_layers {
        let d_in = if l == 0 { cfg.d_f } else { cfg.d_h };
        push_layer(&mut gen, &format!("enc.{l}"), d_in, cfg.d_h, &mut rng);
    }
    for l in 0..cfg.dec_layers {
        let d_out = if l + 1 == cfg.dec_layers { cfg.d_f } else { cfg.d_h };
        push_layer(&mut gen, &format!("dec.{l}"), cfg.d_h, d_out, &mut rng);
    }
    gen.push(GradSlot::new("mask_token", Tensor::zeros(1, cfg.d_f)));

    let mut rng = stream.derive("init.disc").rng();
    let mut disc = Vec::new();
    for l in 0..cfg.disc_layers {
        let d_in = if l == 0 { cfg.d_f } else { cfg.d_disc };
        push_layer(&mut disc, &format!("disc.{l}"), d_in, cfg.d_disc, &mut rng);
    }
    disc.push(GradSlot::new("disc.head.w", xavier(cfg.d_disc, 1, &mut rng)));
    disc.push(GradSlot::new("disc.head.b", Tensor::zeros(1, 1)));
    Ok(ModelParams {
        cfg: cfg.clone(),
        gen,
        disc,
    })
}

/// Number of masked rows for `n` nodes: `floor(ratio * n)`.
pub fn mask_count(n: usize, ratio: f64) -> usize {
    // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
    (((ratio * n as f64) + 1e-9).floor() as usize).min(n)
}

/// Sorted, uniformly drawn row indices to mask.
pub fn choose_mask(n: usize, ratio: f64, rng: &mut StreamRng) -> Vec<usize> {
    let k = mask_count(n, ratio);
    if k == 0 {
        return Vec::new();
    }
    let mut idx = index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Replaces `floor(ratio * N)` random rows of `x` with `mask_token`.
pub fn mask_nodes(x: &Tensor, ratio: f64, mask_token: &Tensor, rng: &mut StreamRng) -> Result<(Tensor, Vec<usize>)> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Invalid(format!("mask ratio {ratio} outside [0, 1)")));
    }
    if mask_token.shape() != (1, x.cols()) {
        return Err(Error::shape(
            "mask_nodes",
            format!("token {:?} for {} feature columns", mask_token.shape(), x.cols()),
        ));
    }
    let idx = choose_mask(x.rows(), ratio, rng);
    let mut out = x.clone();
    for &i in &idx {
        out.row_mut(i).copy_from_slice(mask_token.row(0));
    }
    Ok((out, idx))
}

/// Intermediate values of a GCN stack, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct StackCache {
    inputs: Vec<Tensor>,
    pres: Vec<Tensor>,
    pub output: Tensor,
}

/// Rows `masked` of the first layer's input are treated as `token`, while
/// the stored input has them zeroed. This keeps sparse feature matrices
/// sparse: `X̃ W = X_z W + 1_M (token W)`.
struct TokenInput<'a> {
    masked: &'a [usize],
    token: &'a Tensor,
}

fn stack_forward(
    slots: &[GradSlot],
    first: usize,
    acts: &[Activation],
    a_hat: &SparseOp,
    x: Tensor,
    token: Option<TokenInput<'_>>,
) -> Result<StackCache> {
    let mut inputs = Vec::with_capacity(acts.len());
    let mut pres = Vec::with_capacity(acts.len());
    let mut h = x;
    for (l, &act) in acts.iter().enumerate() {
        let w = &slots[first + 2 * l].value;
        let b = &slots[first + 2 * l + 1].value;
        let mut t = matmul(&h, w)?;
        if let (0, Some(tok)) = (l, &token) {
            if !tok.masked.is_empty() {
                let tw = matmul(tok.token, w)?;
                for &i in tok.masked {
                    for (o, v) in t.row_mut(i).iter_mut().zip(tw.row(0)) {
                        *o += v;
                    }
                }
            }
        }
        let mut pre = a_hat.spmm(&t)?;
        pre.add_row_broadcast(b)?;
        let out = activation(&pre, act);
        inputs.push(h);
        pres.push(pre);
        h = out;
    }
    Ok(StackCache {
        inputs,
        pres,
        output: h,
    })
}

#[allow(clippy::too_many_arguments)]
fn stack_backward(
    slots: &mut [GradSlot],
    update: bool,
    first: usize,
    acts: &[Activation],
    a_hat: &SparseOp,
    cache: &StackCache,
    upstream: Tensor,
    need_input: bool,
    token: Option<(&[usize], usize)>,
) -> Result<Option<Tensor>> {
    let layers = acts.len();
    let mut g = upstream;
    for l in (0..layers).rev() {
        let out = if l + 1 < layers { &cache.inputs[l + 1] } else { &cache.output };
        let g_pre = activation_backward(&cache.pres[l], out, &g, acts[l]);
        let wi = first + 2 * l;
        let propagate = l > 0 || need_input;
        if !update && !propagate {
            break;
        }
        // Â is symmetric, so its transpose product is another spmm.
        let g_t = a_hat.spmm(&g_pre)?;
        if update {
            slots[wi + 1].grad.axpy(1.0, &g_pre.col_sums())?;
            matmul_into(&cache.inputs[l], Transpose::Yes, &g_t, Transpose::No, &mut slots[wi].grad, true)?;
            if let (0, Some((masked, ti))) = (l, token) {
                if !masked.is_empty() {
                    let mut s = Tensor::zeros(1, g_t.cols());
                    for &i in masked {
                        for (o, v) in s.data_mut().iter_mut().zip(g_t.row(i)) {
                            *o += v;
                        }
                    }
                    let tok = slots[ti].value.clone();
                    matmul_into(&tok, Transpose::Yes, &s, Transpose::No, &mut slots[wi].grad, true)?;
                    let w = slots[wi].value.clone();
                    matmul_into(&s, Transpose::No, &w, Transpose::Yes, &mut slots[ti].grad, true)?;
                }
            }
        }
        if !propagate {
            break;
        }
        let w = &slots[wi].value;
        let mut gi = Tensor::zeros(g_t.rows(), w.rows());
        matmul_into(&g_t, Transpose::No, w, Transpose::Yes, &mut gi, false)?;
        g = gi;
    }
    Ok(need_input.then_some(g))
}

fn check_input(params: &ModelParams, a_hat: &SparseOp, x: &Tensor, d: usize, what: &'static str) -> Result<()> {
    let _ = params;
    if x.rows() != a_hat.dim() || x.cols() != d {
        return Err(Error::shape(
            what,
            format!("input {:?} for {} nodes and width {d}", x.shape(), a_hat.dim()),
        ));
    }
    Ok(())
}

/// Encoder output for an already-masked feature matrix.
pub fn encode(params: &ModelParams, a_hat: &SparseOp, x: &Tensor) -> Result<Tensor> {
    check_input(params, a_hat, x, params.cfg.d_f, "encode")?;
    Ok(stack_forward(&params.gen, 0, &params.cfg.enc_acts(), a_hat, x.clone(), None)?.output)
}

/// Decoder output; rows in `masked` are zeroed first when `remask` is set.
pub fn decode(params: &ModelParams, a_hat: &SparseOp, h: &Tensor, masked: &[usize], remask: bool) -> Result<Tensor> {
    check_input(params, a_hat, h, params.cfg.d_h, "decode")?;
    let mut h = h.clone();
    if remask {
        for &i in masked {
            h.row_mut(i).fill(0.0);
        }
    }
    let first = params.dec_first();
    Ok(stack_forward(&params.gen, first, &params.cfg.dec_acts(), a_hat, h, None)?.output)
}

/// Probability that each subgraph carries original features.
pub fn discriminate(params: &ModelParams, a_hat: &SparseOp, x: &Tensor, boundaries: &[usize]) -> Result<Tensor> {
    Ok(disc_forward(params, a_hat, x, boundaries)?.prob)
}

/// Unmasked encoding pooled per subgraph.
pub fn embed(params: &ModelParams, a_hat: &SparseOp, x: &Tensor, boundaries: &[usize], mode: ReadoutMode) -> Result<Tensor> {
    let h = encode(params, a_hat, x)?;
    Ok(readout_pool(&h, boundaries, mode)?.0)
}

/// Cached generator pass with the mask applied.
#[derive(Clone, Debug)]
pub struct GenForward {
    pub mask: Vec<usize>,
    enc: StackCache,
    dec: StackCache,
}

impl GenForward {
    pub fn hidden(&self) -> &Tensor {
        &self.enc.output
    }

    pub fn reconstruction(&self) -> &Tensor {
        &self.dec.output
    }
}

pub fn generator_forward(params: &ModelParams, a_hat: &SparseOp, x: &Tensor, mask: &[usize]) -> Result<GenForward> {
    check_input(params, a_hat, x, params.cfg.d_f, "generator")?;
    let mut xz = x.clone();
    for &i in mask {
        if i >= x.rows() {
            return Err(Error::NodeOutOfRange {
                index: i,
                num_nodes: x.rows(),
            });
        }
        xz.row_mut(i).fill(0.0);
    }
    let token = TokenInput {
        masked: mask,
        token: params.mask_token(),
    };
    let enc = stack_forward(&params.gen, 0, &params.cfg.enc_acts(), a_hat, xz, Some(token))?;
    let mut h = enc.output.clone();
    if params.cfg.remask_decoder {
        for &i in mask {
            h.row_mut(i).fill(0.0);
        }
    }
    let dec = stack_forward(&params.gen, params.dec_first(), &params.cfg.dec_acts(), a_hat, h, None)?;
    Ok(GenForward {
        mask: mask.to_vec(),
        enc,
        dec,
    })
}

/// Accumulates generator gradients given the gradient at the reconstruction.
pub fn generator_backward(params: &mut ModelParams, a_hat: &SparseOp, fwd: &GenForward, g_recon: Tensor) -> Result<()> {
    let dec_acts = params.cfg.dec_acts();
    let enc_acts = params.cfg.enc_acts();
    let dec_first = params.dec_first();
    let ti = params.token_index();
    let mut g_h = stack_backward(&mut params.gen, true, dec_first, &dec_acts, a_hat, &fwd.dec, g_recon, true, None)?
        .expect("input gradient requested");
    if params.cfg.remask_decoder {
        for &i in &fwd.mask {
            g_h.row_mut(i).fill(0.0);
        }
    }
    stack_backward(
        &mut params.gen,
        true,
        0,
        &enc_acts,
        a_hat,
        &fwd.enc,
        g_h,
        false,
        Some((&fwd.mask, ti)),
    )?;
    Ok(())
}

/// Cached discriminator pass.
#[derive(Clone, Debug)]
pub struct DiscForward {
    stack: StackCache,
    pool: PoolCache,
    z: Tensor,
    pub prob: Tensor,
}

pub fn disc_forward(params: &ModelParams, a_hat: &SparseOp, x: &Tensor, boundaries: &[usize]) -> Result<DiscForward> {
    check_input(params, a_hat, x, params.cfg.d_f, "discriminate")?;
    let stack = stack_forward(&params.disc, 0, &params.cfg.disc_acts(), a_hat, x.clone(), None)?;
    let (z, pool) = readout_pool(&stack.output, boundaries, params.cfg.readout)?;
    let hi = params.head_index();
    let mut logits = matmul(&z, &params.disc[hi].value)?;
    logits.add_row_broadcast(&params.disc[hi + 1].value)?;
    let prob = activation(&logits, Activation::Sigmoid);
    Ok(DiscForward { stack, pool, z, prob })
}

/// Backward through the discriminator from `g_prob`. With `update` off the
/// parameters receive no gradient (frozen); with `need_input` set the
/// gradient at the input features is returned.
pub fn disc_backward(
    params: &mut ModelParams,
    a_hat: &SparseOp,
    fwd: &DiscForward,
    g_prob: &Tensor,
    update: bool,
    need_input: bool,
) -> Result<Option<Tensor>> {
    let mut g_logit = g_prob.clone();
    for (g, p) in g_logit.data_mut().iter_mut().zip(fwd.prob.data()) {
        *g *= p * (1.0 - p);
    }
    let hi = params.head_index();
    if update {
        params.disc[hi + 1].grad.axpy(1.0, &g_logit.col_sums())?;
        matmul_into(&fwd.z, Transpose::Yes, &g_logit, Transpose::No, &mut params.disc[hi].grad, true)?;
    }
    if !update && !need_input {
        return Ok(None);
    }
    let mut g_z = Tensor::zeros(fwd.z.rows(), fwd.z.cols());
    matmul_into(&g_logit, Transpose::No, &params.disc[hi].value, Transpose::Yes, &mut g_z, false)?;
    let g_h = readout_pool_backward(&fwd.pool, &g_z)?;
    let acts = params.cfg.disc_acts();
    stack_backward(&mut params.disc, update, 0, &acts, a_hat, &fwd.stack, g_h, need_input, None)
}
