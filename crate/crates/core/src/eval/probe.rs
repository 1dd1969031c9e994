//! Multinomial logistic-regression probe on frozen embeddings.

use rand::Rng;

use super::metrics::{accuracy, auc};
use crate::compute::{adam_step, matmul, row_softmax, AdamConfig, GradSlot, Tensor};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

/// Validation criterion used to keep the best epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Accuracy,
    /// Area under the ROC curve of the class-1 probability (binary only).
    Auc,
}

#[derive(Clone, Debug)]
pub struct Probe {
    mean: Vec<f64>,
    scale: Vec<f64>,
    w: Tensor,
    b: Tensor,
}

impl Probe {
    /// Probe with standardization fitted on `train_x` and weights drawn
    /// uniformly from ±1/sqrt(d); no training.
    pub fn random(train_x: &Tensor, classes: usize, rng: &mut StreamRng) -> Self {
        let (mean, scale) = standardizer(train_x);
        let d = train_x.cols();
        let bound = 1.0 / (d.max(1) as f64).sqrt();
        let w = Tensor::from_vec(d, classes, (0..d * classes).map(|_| rng.gen_range(-bound..bound)).collect())
            .expect("sized buffer");
        Self {
            mean,
            scale,
            w,
            b: Tensor::zeros(1, classes),
        }
    }

    fn standardize(&self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.w.rows() {
            return Err(Error::shape("probe", format!("{} features, probe expects {}", x.cols(), self.w.rows())));
        }
        let mut logits = matmul(&self.standardize(x), &self.w)?;
        logits.add_row_broadcast(&self.b)?;
        Ok(row_softmax(&logits))
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.probabilities(x)?))
    }

    /// Probability of class 1, for binary probes.
    pub fn positive_scores(&self, x: &Tensor) -> Result<Vec<f64>> {
        let p = self.probabilities(x)?;
        Ok((0..p.rows()).map(|r| p.get(r, 1)).collect())
    }
}

fn argmax_rows(p: &Tensor) -> Vec<usize> {
    (0..p.rows())
        .map(|r| {
            let row = p.row(r);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn standardizer(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows().max(1) as f64;
    let mean: Vec<f64> = x.col_sums().data().iter().map(|s| s / n).collect();
    let mut var = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for ((v, m), acc) in x.row(r).iter().zip(&mean).zip(var.iter_mut()) {
            *acc += (v - m) * (v - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn score(probe: &Probe, x: &Tensor, y: &[usize], sel: Selection) -> Result<f64> {
    match sel {
        Selection::Accuracy => accuracy(&probe.predict(x)?, y),
        Selection::Auc => {
            let labels: Vec<bool> = y.iter().map(|&c| c == 1).collect();
            auc(&probe.positive_scores(x)?, &labels)
        }
    }
}

/// Full-batch softmax regression with Adam and L2 decay. When validation
/// data is given, the weights of the best-scoring epoch are kept (earliest
/// on ties); otherwise the final weights.
pub fn train_probe(
    train_x: &Tensor,
    train_y: &[usize],
    val: Option<(&Tensor, &[usize])>,
    classes: usize,
    cfg: &ProbeConfig,
    sel: Selection,
) -> Result<Probe> {
    if train_x.rows() != train_y.len() || train_y.is_empty() {
        return Err(Error::Invalid(format!(
            "probe needs one label per row, got {} rows and {} labels",
            train_x.rows(),
            train_y.len()
        )));
    }
    if let Some(&c) = train_y.iter().find(|&&c| c >= classes) {
        return Err(Error::Invalid(format!("label {c} outside {classes} classes")));
    }
    let (mean, scale) = standardizer(train_x);
    let mut probe = Probe {
        mean,
        scale,
        w: Tensor::zeros(train_x.cols(), classes),
        b: Tensor::zeros(1, classes),
    };
    let xs = probe.standardize(train_x);
    let mut slots = [GradSlot::new("w", probe.w.clone()), GradSlot::new("b", probe.b.clone())];
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let inv = 1.0 / train_y.len() as f64;
    let mut best: Option<(f64, Tensor, Tensor)> = None;
    for _ in 0..cfg.epochs {
        let mut logits = matmul(&xs, &slots[0].value)?;
        logits.add_row_broadcast(&slots[1].value)?;
        let mut g = row_softmax(&logits);
        for (r, &c) in train_y.iter().enumerate() {
            let v = g.get(r, c);
            g.set(r, c, v - 1.0);
        }
        g.scale(inv);
        let mut gw = crate::compute::matmul_backward(&xs, &slots[0].value, &g)?.1;
        gw.axpy(cfg.weight_decay, &slots[0].value)?;
        slots[0].grad = gw;
        slots[1].grad = g.col_sums();
        adam_step(&mut slots, &adam);
        if let Some((vx, vy)) = val {
            probe.w = slots[0].value.clone();
            probe.b = slots[1].value.clone();
            let s = score(&probe, vx, vy, sel)?;
            if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
                best = Some((s, probe.w.clone(), probe.b.clone()));
            }
        }
    }
    match best {
        Some((_, w, b)) => {
            probe.w = w;
            probe.b = b;
        }
        None => {
            probe.w = slots[0].value.clone();
            probe.b = slots[1].value.clone();
        }
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn cfg() -> ProbeConfig {
        ProbeConfig {
            epochs: 200,
            lr: 0.05,
            weight_decay: 0.0,
        }
    }

    #[test]
    fn separable_points_are_learned() {
        let x = Tensor::from_rows(&[[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0], [-5.0, 4.0], [-5.0, 4.1]]).unwrap();
        let y = [0, 0, 1, 1, 2, 2];
        let p = train_probe(&x, &y, Some((&x, &y)), 3, &cfg(), Selection::Accuracy).unwrap();
        assert_eq!(p.predict(&x).unwrap(), y.to_vec());
        let p = train_probe(&x, &y, None, 3, &cfg(), Selection::Accuracy).unwrap();
        assert_eq!(p.predict(&x).unwrap(), y.to_vec());
    }

    #[test]
    fn constant_columns_do_not_break_standardization() {
        let x = Tensor::from_rows(&[[1.0, 3.0], [1.0, -3.0]]).unwrap();
        let p = train_probe(&x, &[0, 1], None, 2, &cfg(), Selection::Accuracy).unwrap();
        assert!(p.probabilities(&x).unwrap().is_finite());
        assert_eq!(p.predict(&x).unwrap(), vec![0, 1]);
    }

    #[test]
    fn random_probe_is_seeded() {
        let x = Tensor::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let a = Probe::random(&x, 2, &mut RngStream::new(1).rng()).positive_scores(&x).unwrap();
        let b = Probe::random(&x, 2, &mut RngStream::new(1).rng()).positive_scores(&x).unwrap();
        assert_eq!(a, b);
        assert!(train_probe(&x, &[0, 2], None, 2, &cfg(), Selection::Accuracy).is_err());
    }
}
