use rand::seq::index::sample;

use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Coordinates checked per call; larger parameter sets are subsampled.
    pub max_coords: usize,
    /// Denominator floor, so coordinates whose true gradient is ~0 are
    /// judged on absolute error instead of blowing up.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coords: 200,
            floor: 1e-6,
            seed: 0,
        }
    }
}

/// Compares `analytic` gradients against central finite differences of `f`.
///
/// `params` are perturbed one coordinate at a time and restored. Returns the
/// worst relative error `|a - n| / max(|a|, |n|, floor)` over the sampled
/// coordinates.
pub fn grad_check<F>(params: &mut [Tensor], analytic: &[Tensor], mut f: F, cfg: &GradCheckConfig) -> Result<f64>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if params.len() != analytic.len() || params.iter().zip(analytic).any(|(p, g)| !p.same_shape(g)) {
        return Err(Error::shape("grad_check", "analytic gradients do not match parameters"));
    }
    let total: usize = params.iter().map(|p| p.len()).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let mut coords: Vec<usize> = if total <= cfg.max_coords {
        (0..total).collect()
    } else {
        let mut rng = RngStream::new(cfg.seed).derive("grad_check").rng();
        sample(&mut rng, total, cfg.max_coords).into_vec()
    };
    coords.sort_unstable();

    let mut worst: f64 = 0.0;
    for flat in coords {
        let (pi, off) = locate(params, flat);
        let orig = params[pi].data()[off];
        params[pi].data_mut()[off] = orig + cfg.step;
        let plus = f(params)?;
        params[pi].data_mut()[off] = orig - cfg.step;
        let minus = f(params)?;
        params[pi].data_mut()[off] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                what: "loss".into(),
                location: format!("grad_check parameter {pi} coordinate {off}"),
            });
        }
        let numeric = (plus - minus) / (2.0 * cfg.step);
        let a = analytic[pi].data()[off];
        let denom = a.abs().max(numeric.abs()).max(cfg.floor);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

fn locate(params: &[Tensor], mut flat: usize) -> (usize, usize) {
    for (i, p) in params.iter().enumerate() {
        if flat < p.len() {
            return (i, flat);
        }
        flat -= p.len();
    }
    unreachable!("coordinate beyond parameter set")
}
