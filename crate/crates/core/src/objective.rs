//! Reconstruction and adversarial losses, each returning its analytic gradient.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compute::Tensor;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceScope {
    MaskedOnly,
    AllNodes,
}

impl SceScope {
    pub fn as_str(self) -> &'static str {
        match self {
            SceScope::MaskedOnly => "masked_only",
            SceScope::AllNodes => "all_nodes",
        }
    }
}

impl FromStr for SceScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "masked_only" => Ok(SceScope::MaskedOnly),
            "all_nodes" => Ok(SceScope::AllNodes),
            other => Err(Error::Invalid(format!("unknown sce scope `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub sce_scope: SceScope,
    /// When off, the generator is trained by the adversarial term alone.
    pub reconstruction: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: 0.1,
            sce_scope: SceScope::MaskedOnly,
            reconstruction: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(Error::Config {
                key: "loss.gamma".into(),
                msg: format!("{} must be a finite value >= 1", self.gamma),
            });
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config {
                key: "loss.alpha".into(),
                msg: format!("{} must be a finite value >= 0", self.alpha),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SceOutput {
    pub loss: f64,
    /// Gradient with respect to the reconstruction, same shape as it.
    pub grad: Tensor,
    /// In-scope rows where either side had zero norm.
    pub zero_norm_rows: usize,
}

/// Scaled cosine error: mean over `scope` of `(1 - cos(x_i, x̄_i))^γ`.
///
/// A row where either vector has zero norm contributes 1 with no gradient.
/// An empty scope yields a zero loss.
pub fn sce_loss(x: &Tensor, recon: &Tensor, scope: &[usize], gamma: f64) -> Result<SceOutput> {
    if !x.same_shape(recon) {
        return Err(Error::shape(
            "sce_loss",
            format!("target {:?} vs reconstruction {:?}", x.shape(), recon.shape()),
        ));
    }
    if gamma < 1.0 {
        return Err(Error::Invalid(format!("sce exponent {gamma} below 1")));
    }
    let mut grad = Tensor::zeros(x.rows(), x.cols());
    if scope.is_empty() {
        return Ok(SceOutput {
            loss: 0.0,
            grad,
            zero_norm_rows: 0,
        });
    }
    let inv = 1.0 / scope.len() as f64;
    let mut total = 0.0;
    let mut zero_norm_rows = 0;
    for &i in scope {
        if i >= x.rows() {
            return Err(Error::NodeOutOfRange {
                index: i,
                num_nodes: x.rows(),
            });
        }
        let a = x.row(i);
        let b = recon.row(i);
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            zero_norm_rows += 1;
            total += 1.0;
            continue;
        }
        let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
        let c = (dot / (na * nb)).clamp(-1.0, 1.0);
        let base = 1.0 - c;
        total += base.powf(gamma);
        // d term / d c, scaled by the mean.
        let dterm = if gamma == 1.0 { -1.0 } else { -gamma * base.powf(gamma - 1.0) };
        let coef = dterm * inv;
        let g = grad.row_mut(i);
        for ((o, p), q) in g.iter_mut().zip(a).zip(b) {
            *o = coef * (p / (na * nb) - c * q / (nb * nb));
        }
    }
    Ok(SceOutput {
        loss: total * inv,
        grad,
        zero_norm_rows,
    })
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn check_probs(p: &Tensor, what: &'static str) -> Result<()> {
    if p.cols() != 1 {
        return Err(Error::shape(what, format!("expected a column, got {:?}", p.shape())));
    }
    p.check_finite(what)
}

#[derive(Clone, Debug)]
pub struct DiscLossOutput {
    pub loss: f64,
    pub grad_real: Tensor,
    pub grad_fake: Tensor,
}

/// Binary cross-entropy with originals labeled 1 and reconstructions 0,
/// averaged over the batch.
pub fn disc_loss(p_real: &Tensor, p_fake: &Tensor) -> Result<DiscLossOutput> {
    check_probs(p_real, "disc_loss")?;
    check_probs(p_fake, "disc_loss")?;
    if p_real.rows() != p_fake.rows() || p_real.rows() == 0 {
        return Err(Error::shape(
            "disc_loss",
            format!("{} real vs {} fake probabilities", p_real.rows(), p_fake.rows()),
        ));
    }
    let inv = 1.0 / p_real.rows() as f64;
    let mut loss = 0.0;
    let mut grad_real = Tensor::zeros(p_real.rows(), 1);
    let mut grad_fake = Tensor::zeros(p_fake.rows(), 1);
    for i in 0..p_real.rows() {
        let r = clamp_prob(p_real.data()[i]);
        let f = clamp_prob(p_fake.data()[i]);
        loss -= r.ln() + (1.0 - f).ln();
        grad_real.data_mut()[i] = -inv / r;
        grad_fake.data_mut()[i] = inv / (1.0 - f);
    }
    Ok(DiscLossOutput {
        loss: loss * inv,
        grad_real,
        grad_fake,
    })
}

/// Non-saturating generator term `-mean(ln p_fake)`, with its gradient.
pub fn gen_adv_loss(p_fake: &Tensor) -> Result<(f64, Tensor)> {
    check_probs(p_fake, "gen_adv_loss")?;
    if p_fake.rows() == 0 {
        return Err(Error::shape("gen_adv_loss", "empty batch"));
    }
    let inv = 1.0 / p_fake.rows() as f64;
    let mut grad = Tensor::zeros(p_fake.rows(), 1);
    let mut loss = 0.0;
    for (g, &p) in grad.data_mut().iter_mut().zip(p_fake.data()) {
        let f = clamp_prob(p);
        loss -= f.ln();
        *g = -inv / f;
    }
    Ok((loss * inv, grad))
}

pub fn gen_total_loss(rec: f64, adv: f64, alpha: f64) -> f64 {
    rec + alpha * adv
}
