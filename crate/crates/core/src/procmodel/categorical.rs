use super::kernel::{Kernel, KernelMeta, Window};
use crate::error::{Error, Result};

/// iid one-hot indicators centred by their probabilities:
/// `(X_t)_j = 1(Z_t = j) - p_j` with `Z_t` drawn from `p`.
#[derive(Debug, Clone)]
pub struct CategoricalKernel {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    n: usize,
    meta: KernelMeta,
}

impl CategoricalKernel {
    /// With `meta = None`, `Theta` is the exact maximum of the lag-0
    /// dependence measure and the `q`-th moment for `q = 4`.
    pub fn new(probs: Vec<f64>, n: usize, meta: Option<KernelMeta>) -> Result<Self> {
        if probs.is_empty() || n == 0 {
            return Err(Error::invalid("need at least one category and a positive horizon"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let mut k = Self { probs, cumulative, n, meta: KernelMeta { theta: 1.0, beta: 3.0, q: 4.0, gamma: 1.0 } };
        let meta = match meta {
            Some(m) => m,
            None => KernelMeta { theta: k.theta_exact(4.0).max(k.moment_exact(4.0)), beta: 3.0, q: 4.0, gamma: 1.0 },
        };
        meta.validate()?;
        k.meta = meta;
        Ok(k)
    }

    pub fn uniform(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![1.0 / d as f64; d], n, None)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    fn category(&self, u: f64) -> usize {
        let k = self.cumulative.partition_point(|&c| c <= u);
        k.min(self.probs.len() - 1)
    }

    /// Exact `(E ||X - X'||^q)^(1/q)`: the difference has squared norm 2
    /// whenever the categories differ.
    pub fn theta_exact(&self, q: f64) -> f64 {
        let differ = 1.0 - self.probs.iter().map(|p| p * p).sum::<f64>();
        2f64.sqrt() * differ.powf(1.0 / q)
    }

    /// Exact `(E ||X||^q)^(1/q)`.
    pub fn moment_exact(&self, q: f64) -> f64 {
        let sum_sq: f64 = self.probs.iter().map(|p| p * p).sum();
        self.probs.iter().map(|&p| p * (1.0 - 2.0 * p + sum_sq).max(0.0).powf(q / 2.0)).sum::<f64>().powf(1.0 / q)
    }
}

impl Kernel for CategoricalKernel {
    fn dim(&self) -> usize {
        self.probs.len()
    }

    fn lag(&self) -> usize {
        0
    }

    fn horizon(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        1
    }

    fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    fn eval(&self, _t: usize, window: &Window<'_>, out: &mut [f64]) {
        let z = self.category(window.lag(0)[0]);
        for (j, (o, p)) in out.iter_mut().zip(&self.probs).enumerate() {
            *o = if j == z { 1.0 - p } else { -p };
        }
    }
}
