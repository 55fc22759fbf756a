use std::fmt::Debug;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stream::{InnovationStream, Lane};
use super::LinearKernel;
use crate::error::{Error, Result};
use crate::matops::Matrix;

/// Declared regularity constants of a kernel: the dependence decay
/// `theta_{t,j,q,2} <= theta * max(j, 1)^(-beta)`, the moment bound
/// `||G_t(eps_0)||_q <= theta`, and the total-variation factor `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub theta: f64,
    pub beta: f64,
    pub q: f64,
    pub gamma: f64,
}

impl KernelMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::invalid("Theta must be a nonnegative real"));
        }
        if !(self.beta > 1.0) {
            return Err(Error::invalid("beta must exceed 1"));
        }
        if !(self.q > 2.0) {
            return Err(Error::invalid("q must exceed 2"));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::invalid("Gamma must be at least 1"));
        }
        Ok(())
    }
}

/// The `J + 1` most recent transformed innovations seen by `G_t`.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    buf: &'a [f64],
    width: usize,
    newest: usize,
}

impl<'a> Window<'a> {
    /// `buf` holds innovations in increasing time order, `width` values per
    /// time index; `newest` is the row of time `t`.
    pub fn new(buf: &'a [f64], width: usize, newest: usize) -> Self {
        Self { buf, width, newest }
    }

    /// Innovation at time `t - j`.
    #[inline]
    pub fn lag(&self, j: usize) -> &'a [f64] {
        let row = self.newest - j;
        &self.buf[row * self.width..(row + 1) * self.width]
    }
}

/// A time-indexed generator `X_t = G_t(eps_t, eps_{t-1}, ..., eps_{t-J})`.
///
/// Time indices are 1-based, `t = 1..=horizon`. Each time index carries
/// `width` iid uniforms, which [`Kernel::transform`] maps to the innovation
/// values passed to [`Kernel::eval`].
pub trait Kernel: Send + Sync + Debug {
    fn dim(&self) -> usize;
    /// Truncation lag `J`.
    fn lag(&self) -> usize;
    fn horizon(&self) -> usize;
    fn width(&self) -> usize;
    fn meta(&self) -> &KernelMeta;

    fn transform(&self, uniforms: &[f64], out: &mut [f64]) {
        out.copy_from_slice(uniforms);
    }

    fn eval(&self, t: usize, window: &Window<'_>, out: &mut [f64]);

    fn as_linear(&self) -> Option<&LinearKernel> {
        None
    }
}

fn transformed_block(kernel: &dyn Kernel, raw: &[f64]) -> Vec<f64> {
    let w = kernel.width();
    let mut out = vec![0.0; raw.len()];
    for (src, dst) in raw.chunks_exact(w).zip(out.chunks_exact_mut(w)) {
        kernel.transform(src, dst);
    }
    out
}

/// Simulates `X_1, ..., X_n` from the main lane of `stream`.
pub fn gen_path(kernel: &dyn Kernel, n: usize, stream: &InnovationStream) -> Result<Matrix> {
    if n > kernel.horizon() {
        return Err(Error::invalid(format!("path length {n} exceeds kernel horizon {}", kernel.horizon())));
    }
    let j = kernel.lag();
    let w = kernel.width();
    let raw = stream.block(Lane::Main, 1 - j as i64, n + j, w);
    let innov = transformed_block(kernel, &raw);
    let d = kernel.dim();
    let mut x = Matrix::zeros(n, d);
    for t in 1..=n {
        let window = Window::new(&innov, w, t - 1 + j);
        kernel.eval(t, &window, x.row_mut(t - 1));
    }
    Ok(x)
}

/// Block-decoupled surrogate path.
///
/// `boundaries` are `0 = t_0 < t_1 < ... < t_M = n`. For `t` in block `l`
/// (`t_l < t <= t_{l+1}`, `l >= 1`), innovations at indices `<= t_l` are
/// read from the independent lane `Block(l)`; the first block uses the
/// original innovations.
pub fn decoupled_surrogate(kernel: &dyn Kernel, boundaries: &[usize], stream: &InnovationStream) -> Result<Matrix> {
    if boundaries.len() < 2 || boundaries[0] != 0 {
        return Err(Error::invalid("boundaries must start at 0 and contain at least two points"));
    }
    if boundaries.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("boundaries must be strictly increasing"));
    }
    let n = *boundaries.last().unwrap();
    if n > kernel.horizon() {
        return Err(Error::invalid("surrogate length exceeds kernel horizon"));
    }
    let j = kernel.lag();
    let w = kernel.width();
    let d = kernel.dim();
    let main_raw = stream.block(Lane::Main, 1 - j as i64, n + j, w);
    let main = transformed_block(kernel, &main_raw);
    let mut x = Matrix::zeros(n, d);
    for (l, pair) in boundaries.windows(2).enumerate() {
        let (lo, hi) = (pair[0], pair[1]);
        if l == 0 {
            for t in lo + 1..=hi {
                kernel.eval(t, &Window::new(&main, w, t - 1 + j), x.row_mut(t - 1));
            }
            continue;
        }
        // rows for times (lo - j + 1)..=hi; times <= lo come from the block lane
        let first = lo as i64 - j as i64 + 1;
        let count = hi - lo + j;
        let mut buf = stream.block(Lane::Block(l as u32), first, count, w);
        let split = j.min(count);
        let main_offset = (first - (1 - j as i64)) as usize;
        buf[split * w..].copy_from_slice(&main_raw[(main_offset + split) * w..(main_offset + count) * w]);
        let innov = transformed_block(kernel, &buf);
        for t in lo + 1..=hi {
            let window = Window::new(&innov, w, t - lo - 1 + j);
            kernel.eval(t, &window, x.row_mut(t - 1));
        }
    }
    Ok(x)
}

fn vec_r_norm(v: &[f64], r: f64) -> f64 {
    if r == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else if r.is_infinite() {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else {
        v.iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// Monte-Carlo estimate of the physical dependence measure
/// `(E ||G_t(eps_t) - G_t(eps~_{t,t-j})||_r^q)^(1/q)`.
///
/// Both evaluations share every innovation except the one at index `t - j`,
/// which is taken from the tilde lane. Returns exactly 0 for `j > J`.
pub fn theta_mc(
    kernel: &dyn Kernel,
    t: usize,
    j: usize,
    q: f64,
    r: f64,
    replications: usize,
    stream: &InnovationStream,
) -> Result<f64> {
    if !(2.0 <= r && r <= q) {
        return Err(Error::invalid("need 2 <= r <= q"));
    }
    if replications == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    if t == 0 || t > kernel.horizon() {
        return Err(Error::invalid("time index out of range"));
    }
    let lag = kernel.lag();
    if j > lag {
        return Ok(0.0);
    }
    let w = kernel.width();
    let d = kernel.dim();
    let terms: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|i| {
            let s = stream.replicate(i as u64);
            let raw = s.block(Lane::Main, t as i64 - lag as i64, lag + 1, w);
            let main = transformed_block(kernel, &raw);
            let mut swapped = main.clone();
            let tilde_raw = s.block(Lane::Tilde, t as i64 - j as i64, 1, w);
            let row = lag - j;
            kernel.transform(&tilde_raw, &mut swapped[row * w..(row + 1) * w]);
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            kernel.eval(t, &Window::new(&main, w, lag), &mut a);
            kernel.eval(t, &Window::new(&swapped, w, lag), &mut b);
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            vec_r_norm(&diff, r).powf(q)
        })
        .collect();
    let mean = terms.iter().sum::<f64>() / replications as f64;
    Ok(mean.powf(1.0 / q))
}

/// Nonstationarity factor `Gamma = max(1, S / Theta)` where
/// `S = sum_{t=2..n} (E ||G_t(eps_0) - G_{t-1}(eps_0)||^2)^(1/2)`.
///
/// Linear kernels use the closed form; other kernels estimate each summand
/// from `replications` common innovation windows.
pub fn gamma_tv(kernel: &dyn Kernel, n: usize, replications: usize, stream: &InnovationStream) -> Result<f64> {
    let theta = kernel.meta().theta;
    if theta <= 0.0 {
        return Err(Error::invalid("Gamma is undefined for Theta = 0"));
    }
    if n > kernel.horizon() {
        return Err(Error::invalid("n exceeds kernel horizon"));
    }
    let total = if let Some(lin) = kernel.as_linear() {
        lin.variation_sum(n)
    } else {
        if replications == 0 {
            return Err(Error::invalid("need at least one replication"));
        }
        let lag = kernel.lag();
        let w = kernel.width();
        let d = kernel.dim();
        let windows: Vec<Vec<f64>> = (0..replications)
            .map(|i| {
                let raw = stream.replicate(i as u64).block(Lane::Main, -(lag as i64), lag + 1, w);
                transformed_block(kernel, &raw)
            })
            .collect();
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        let mut total = 0.0;
        for t in 2..=n {
            let mut ss = 0.0;
            for win in &windows {
                let window = Window::new(win, w, lag);
                kernel.eval(t, &window, &mut a);
                kernel.eval(t - 1, &window, &mut b);
                ss += a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            }
            total += (ss / replications as f64).sqrt();
        }
        total
    };
    Ok((total / theta).max(1.0))
}
