use super::Tensor;
use crate::error::{Error, Result};

/// Square sparse operator in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    n: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOp {
    pub fn new(n: usize, offsets: Vec<usize>, targets: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if offsets.len() != n + 1 || offsets[0] != 0 || offsets[n] != targets.len() {
            return Err(Error::shape("sparse_op", "offsets do not describe the target list"));
        }
        if targets.len() != values.len() {
            return Err(Error::shape("sparse_op", "targets and values differ in length"));
        }
        if offsets.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::shape("sparse_op", "offsets decrease"));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= n) {
            return Err(Error::NodeOutOfRange { index: t, num_nodes: n });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "sparse value".into(),
                location: "sparse_op".into(),
            });
        }
        Ok(Self {
            n,
            offsets,
            targets,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            offsets: (0..=n).collect(),
            targets: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.targets.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        self.targets[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let cur = t.get(i, j);
                t.set(i, j, cur + v);
            }
        }
        t
    }

    fn check_rows(&self, x: &Tensor, op: &'static str) -> Result<()> {
        if x.rows() != self.n {
            return Err(Error::shape(
                op,
                format!("operator is {0}x{0}, input has {1} rows", self.n, x.rows()),
            ));
        }
        Ok(())
    }

    /// `y = S x`.
    pub fn spmm(&self, x: &Tensor) -> Result<Tensor> {
        self.check_rows(x, "spmm")?;
        let mut y = Tensor::zeros(self.n, x.cols());
        for i in 0..self.n {
            let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
            for p in lo..hi {
                let (j, v) = (self.targets[p], self.values[p]);
                let xr = x.row(j);
                for (o, xv) in y.row_mut(i).iter_mut().zip(xr) {
                    *o += v * xv;
                }
            }
        }
        Ok(y)
    }

    /// `y = S^T x`; the backward of [`SparseOp::spmm`].
    pub fn spmm_transpose(&self, x: &Tensor) -> Result<Tensor> {
        self.check_rows(x, "spmm_transpose")?;
        let mut y = Tensor::zeros(self.n, x.cols());
        for i in 0..self.n {
            let xr = x.row(i);
            for p in self.offsets[i]..self.offsets[i + 1] {
                let (j, v) = (self.targets[p], self.values[p]);
                for (o, xv) in y.row_mut(j).iter_mut().zip(xr) {
                    *o += v * xv;
                }
            }
        }
        Ok(y)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}
