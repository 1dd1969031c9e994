use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Zero fraction above which a left operand takes the skip-zero kernel.
/// Bag-of-words node features sit around 99% zeros.
const SPARSE_LEFT_THRESHOLD: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

impl Transpose {
    fn dims(self, t: &Tensor) -> (usize, usize) {
        match self {
            Transpose::No => (t.rows(), t.cols()),
            Transpose::Yes => (t.cols(), t.rows()),
        }
    }

    /// (row stride, col stride) of the logical operand.
    fn strides(self, t: &Tensor) -> (isize, isize) {
        match self {
            Transpose::No => (t.cols() as isize, 1),
            Transpose::Yes => (1, t.cols() as isize),
        }
    }
}

/// `c = op(a) * op(b)`, or `c += ...` when `accumulate` is set.
pub fn matmul_into(
    a: &Tensor,
    ta: Transpose,
    b: &Tensor,
    tb: Transpose,
    c: &mut Tensor,
    accumulate: bool,
) -> Result<()> {
    let (m, k) = ta.dims(a);
    let (k2, n) = tb.dims(b);
    if k != k2 || c.shape() != (m, n) {
        return Err(Error::shape(
            "matmul",
            format!(
                "op(a) {m}x{k}, op(b) {k2}x{n}, out {}x{}",
                c.rows(),
                c.cols()
            ),
        ));
    }
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        if !accumulate {
            c.fill(0.0);
        }
        return Ok(());
    }
    if tb == Transpose::No && a.zero_fraction() >= SPARSE_LEFT_THRESHOLD {
        if !accumulate {
            c.fill(0.0);
        }
        sparse_left(a, ta, b, c);
        return Ok(());
    }
    let (rsa, csa) = ta.strides(a);
    let (rsb, csb) = tb.strides(b);
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: dimensions and strides were checked above against the three
    // buffers, and `c` does not alias `a` or `b` (it is borrowed mutably).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data().as_ptr(),
            rsa,
            csa,
            b.data().as_ptr(),
            rsb,
            csb,
            beta,
            c.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(())
}

fn sparse_left(a: &Tensor, ta: Transpose, b: &Tensor, c: &mut Tensor) {
    match ta {
        Transpose::No => {
            for i in 0..a.rows() {
                for (kk, &v) in a.row(i).iter().enumerate() {
                    if v != 0.0 {
                        let brow = b.row(kk);
                        for (o, x) in c.row_mut(i).iter_mut().zip(brow) {
                            *o += v * x;
                        }
                    }
                }
            }
        }
        Transpose::Yes => {
            for r in 0..a.rows() {
                let brow = b.row(r);
                for (i, &v) in a.row(r).iter().enumerate() {
                    if v != 0.0 {
                        for (o, x) in c.row_mut(i).iter_mut().zip(brow) {
                            *o += v * x;
                        }
                    }
                }
            }
        }
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut c = Tensor::zeros(a.rows(), b.cols());
    matmul_into(a, Transpose::No, b, Transpose::No, &mut c, false)?;
    Ok(c)
}

/// Gradients of `a * b`: `(upstream * b^T, a^T * upstream)`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, upstream: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut ga = Tensor::zeros(a.rows(), a.cols());
    let mut gb = Tensor::zeros(b.rows(), b.cols());
    matmul_into(upstream, Transpose::No, b, Transpose::Yes, &mut ga, false)?;
    matmul_into(a, Transpose::Yes, upstream, Transpose::No, &mut gb, false)?;
    Ok((ga, gb))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    PRelu(f64),
    Sigmoid,
    Identity,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    let mut out = x.clone();
    match kind {
        Activation::Identity => {}
        Activation::PRelu(slope) => out.data_mut().iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v *= slope
            }
        }),
        Activation::Sigmoid => out.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
    }
    out
}

/// Elementwise derivative times upstream. `pre` is the input, `out` the forward output.
pub fn activation_backward(pre: &Tensor, out: &Tensor, upstream: &Tensor, kind: Activation) -> Tensor {
    let mut g = upstream.clone();
    match kind {
        Activation::Identity => {}
        Activation::PRelu(slope) => {
            for (gv, &x) in g.data_mut().iter_mut().zip(pre.data()) {
                if x < 0.0 {
                    *gv *= slope;
                }
            }
        }
        Activation::Sigmoid => {
            for (gv, &s) in g.data_mut().iter_mut().zip(out.data()) {
                *gv *= s * (1.0 - s);
            }
        }
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMode {
    Mean,
    Max,
    Sum,
}

impl ReadoutMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReadoutMode::Mean => "mean",
            ReadoutMode::Max => "max",
            ReadoutMode::Sum => "sum",
        }
    }
}

impl FromStr for ReadoutMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ReadoutMode::Mean),
            "max" => Ok(ReadoutMode::Max),
            "sum" => Ok(ReadoutMode::Sum),
            other => Err(Error::Invalid(format!("unknown readout mode `{other}`"))),
        }
    }
}

/// What the readout backward pass needs to remember.
#[derive(Clone, Debug)]
pub struct PoolCache {
    mode: ReadoutMode,
    boundaries: Vec<usize>,
    rows: usize,
    /// For max pooling: source row of each output entry, row-major B x d.
    argmax: Vec<usize>,
}

fn check_boundaries(rows: usize, boundaries: &[usize]) -> Result<()> {
    if boundaries.len() < 2 || boundaries[0] != 0 || *boundaries.last().unwrap() != rows {
        return Err(Error::shape(
            "readout_pool",
            format!("boundaries must run from 0 to {rows}"),
        ));
    }
    for (b, w) in boundaries.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::shape("readout_pool", "boundaries decrease"));
        }
        if w[1] == w[0] {
            return Err(Error::EmptySegment(b));
        }
    }
    Ok(())
}

/// Pools the rows of each segment `[boundaries[b], boundaries[b+1])` into one row.
pub fn readout_pool(h: &Tensor, boundaries: &[usize], mode: ReadoutMode) -> Result<(Tensor, PoolCache)> {
    check_boundaries(h.rows(), boundaries)?;
    let segments = boundaries.len() - 1;
    let d = h.cols();
    let mut out = Tensor::zeros(segments, d);
    let mut argmax = Vec::new();
    if mode == ReadoutMode::Max {
        argmax = vec![0; segments * d];
    }
    for b in 0..segments {
        let (lo, hi) = (boundaries[b], boundaries[b + 1]);
        match mode {
            ReadoutMode::Sum | ReadoutMode::Mean => {
                let o = out.row_mut(b);
                for r in lo..hi {
                    for (ov, hv) in o.iter_mut().zip(h.row(r)) {
                        *ov += hv;
                    }
                }
                if mode == ReadoutMode::Mean {
                    let inv = 1.0 / (hi - lo) as f64;
                    o.iter_mut().for_each(|v| *v *= inv);
                }
            }
            ReadoutMode::Max => {
                out.row_mut(b).copy_from_slice(h.row(lo));
                argmax[b * d..(b + 1) * d].iter_mut().for_each(|a| *a = lo);
                for r in lo + 1..hi {
                    for (j, &hv) in h.row(r).iter().enumerate() {
                        // strict comparison keeps the first index on ties
                        if hv > out.get(b, j) {
                            out.set(b, j, hv);
                            argmax[b * d + j] = r;
                        }
                    }
                }
            }
        }
    }
    let cache = PoolCache {
        mode,
        boundaries: boundaries.to_vec(),
        rows: h.rows(),
        argmax,
    };
    Ok((out, cache))
}

pub fn readout_pool_backward(cache: &PoolCache, upstream: &Tensor) -> Result<Tensor> {
    let segments = cache.boundaries.len() - 1;
    if upstream.rows() != segments {
        return Err(Error::shape(
            "readout_pool_backward",
            format!("upstream has {} rows for {segments} segments", upstream.rows()),
        ));
    }
    let d = upstream.cols();
    let mut g = Tensor::zeros(cache.rows, d);
    for b in 0..segments {
        let (lo, hi) = (cache.boundaries[b], cache.boundaries[b + 1]);
        let up = upstream.row(b);
        match cache.mode {
            ReadoutMode::Sum | ReadoutMode::Mean => {
                let scale = if cache.mode == ReadoutMode::Mean {
                    1.0 / (hi - lo) as f64
                } else {
                    1.0
                };
                for r in lo..hi {
                    for (gv, u) in g.row_mut(r).iter_mut().zip(up) {
                        *gv += scale * u;
                    }
                }
            }
            ReadoutMode::Max => {
                for (j, u) in up.iter().enumerate() {
                    let r = cache.argmax[b * d + j];
                    let v = g.get(r, j) + u;
                    g.set(r, j, v);
                }
            }
        }
    }
    Ok(g)
}

/// Row-wise softmax with max subtraction.
pub fn row_softmax(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

/// Backward of [`row_softmax`] given its output `s`.
pub fn row_softmax_backward(s: &Tensor, upstream: &Tensor) -> Tensor {
    let mut g = Tensor::zeros(s.rows(), s.cols());
    for r in 0..s.rows() {
        let dot: f64 = s.row(r).iter().zip(upstream.row(r)).map(|(a, b)| a * b).sum();
        for ((gv, sv), uv) in g.row_mut(r).iter_mut().zip(s.row(r)).zip(upstream.row(r)) {
            *gv = sv * (uv - dot);
        }
    }
    g
}
