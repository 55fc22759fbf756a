use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::kernel::{Kernel, KernelMeta, Window};
use super::normal::inv_normal_cdf;
use crate::error::{Error, Result};
use crate::matops::{Matrix, SymMat};

/// Standardizing map from a uniform to a mean-zero, unit-variance scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnovationMap {
    Gaussian,
    Uniform,
}

impl InnovationMap {
    #[inline]
    pub fn apply(self, u: f64) -> f64 {
        match self {
            InnovationMap::Gaussian => inv_normal_cdf(u),
            InnovationMap::Uniform => (u - 0.5) * 12f64.sqrt(),
        }
    }

    /// `(E |psi(U)|^q)^(1/q)`.
    pub fn moment(self, q: f64) -> f64 {
        match self {
            InnovationMap::Gaussian => gaussian_abs_moment(q).powf(1.0 / q),
            // |U - 1/2| is uniform on [0, 1/2]
            InnovationMap::Uniform => 12f64.sqrt() * (0.5f64.powf(q) / (q + 1.0)).powf(1.0 / q),
        }
    }

    /// `(E |psi(U) - psi(U')|^q)^(1/q)` for independent `U, U'`.
    pub fn difference_moment(self, q: f64) -> f64 {
        match self {
            // psi - psi' ~ N(0, 2)
            InnovationMap::Gaussian => 2f64.sqrt() * gaussian_abs_moment(q).powf(1.0 / q),
            // U - U' is triangular on [-1, 1]: E|U - U'|^q = 2 / ((q + 1)(q + 2))
            InnovationMap::Uniform => 12f64.sqrt() * (2.0 / ((q + 1.0) * (q + 2.0))).powf(1.0 / q),
        }
    }
}

/// `E |N(0,1)|^q = 2^(q/2) Gamma((q+1)/2) / sqrt(pi)`.
fn gaussian_abs_moment(q: f64) -> f64 {
    (0.5 * q * 2f64.ln() + ln_gamma(0.5 * (q + 1.0)) - 0.5 * std::f64::consts::PI.ln()).exp()
}

/// Coefficients `A_0, ..., A_J` of one moving-average filter.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefSet {
    /// `A_j = a_j * I_d`.
    Scalar(Vec<f64>),
    /// Full `d x m` matrices.
    Matrices(Vec<Matrix>),
}

impl CoefSet {
    fn len(&self) -> usize {
        match self {
            CoefSet::Scalar(a) => a.len(),
            CoefSet::Matrices(m) => m.len(),
        }
    }

    fn matrix(&self, j: usize, d: usize) -> Matrix {
        match self {
            CoefSet::Scalar(a) => Matrix::identity(d).scale(a.get(j).copied().unwrap_or(0.0)),
            CoefSet::Matrices(m) => m.get(j).cloned().unwrap_or_else(|| Matrix::zeros(d, m[0].cols())),
        }
    }

    #[inline]
    fn apply_acc(&self, j: usize, w: f64, x: &[f64], out: &mut [f64]) {
        match self {
            CoefSet::Scalar(a) => {
                let c = w * a[j];
                if c != 0.0 {
                    for (o, v) in out.iter_mut().zip(x) {
                        *o += c * v;
                    }
                }
            }
            CoefSet::Matrices(m) => {
                if w == 1.0 {
                    m[j].mul_vec_acc(x, out);
                } else if w != 0.0 {
                    let mut tmp = vec![0.0; out.len()];
                    m[j].mul_vec_acc(x, &mut tmp);
                    for (o, v) in out.iter_mut().zip(tmp) {
                        *o += w * v;
                    }
                }
            }
        }
    }
}

/// Time profile of the coefficients: `A_j(t) = w0(t) P_j + w1(t) R_j`.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(CoefSet),
    /// Linear interpolation in rescaled time `u = t / n` from `start` to `end`.
    Lipschitz {
        start: CoefSet,
        end: CoefSet,
    },
    /// `before` for `t <= at`, `after` for `t > at`.
    Jump {
        before: CoefSet,
        after: CoefSet,
        at: usize,
    },
}

impl Schedule {
    fn sets(&self) -> (&CoefSet, Option<&CoefSet>) {
        match self {
            Schedule::Constant(c) => (c, None),
            Schedule::Lipschitz { start, end } => (start, Some(end)),
            Schedule::Jump { before, after, .. } => (before, Some(after)),
        }
    }

    #[inline]
    fn weights(&self, t: usize, n: usize) -> (f64, f64) {
        match self {
            Schedule::Constant(_) => (1.0, 0.0),
            Schedule::Lipschitz { .. } => {
                let u = t as f64 / n as f64;
                (1.0 - u, u)
            }
            Schedule::Jump { at, .. } => {
                if t <= *at {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
        }
    }
}

/// `X_t = sum_{j=0}^{J} A_j(t) psi(eps_{t-j})` with `m`-dimensional
/// standardized innovations.
#[derive(Debug, Clone)]
pub struct LinearKernel {
    d: usize,
    m: usize,
    lag: usize,
    n: usize,
    schedule: Schedule,
    map: InnovationMap,
    meta: KernelMeta,
}

impl LinearKernel {
    /// Builds a kernel. When `meta` is `None`, `Theta` is set to the smallest
    /// value satisfying both decay and moment bounds for `(q, beta)` = (4, 3),
    /// and `Gamma` is computed from the schedule.
    pub fn new(d: usize, n: usize, schedule: Schedule, map: InnovationMap, meta: Option<KernelMeta>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::invalid("dimension and horizon must be positive"));
        }
        let (first, second) = schedule.sets();
        let lens = first.len();
        if lens == 0 {
            return Err(Error::invalid("at least one coefficient is required"));
        }
        if let Some(s) = second {
            if s.len() != lens {
                return Err(Error::invalid("coefficient sets have different lag counts"));
            }
        }
        let mut m = d;
        for set in std::iter::once(first).chain(second) {
            if let CoefSet::Matrices(ms) = set {
                let cols = ms[0].cols();
                if ms.iter().any(|a| a.rows() != d || a.cols() != cols) || cols == 0 {
                    return Err(Error::invalid("coefficient matrices must all be d x m"));
                }
                m = cols;
            }
        }
        for set in std::iter::once(first).chain(second) {
            if matches!(set, CoefSet::Scalar(_)) && m != d {
                return Err(Error::invalid("scalar coefficients require m = d"));
            }
        }
        if let Schedule::Jump { at, .. } = schedule {
            if at > n {
                return Err(Error::invalid("jump location beyond horizon"));
            }
        }
        let mut k = Self {
            d,
            m,
            lag: lens - 1,
            n,
            schedule,
            map,
            meta: KernelMeta { theta: 1.0, beta: 3.0, q: 4.0, gamma: 1.0 },
        };
        let meta = match meta {
            Some(meta) => meta,
            None => {
                let theta = k.theta_floor(4.0, 3.0);
                let gamma = if theta > 0.0 { (k.variation_sum(n) / theta).max(1.0) } else { 1.0 };
                KernelMeta { theta, beta: 3.0, q: 4.0, gamma }
            }
        };
        meta.validate()?;
        k.meta = meta;
        Ok(k)
    }

    /// iid kernel `X_t = psi(eps_t)` in `d` dimensions.
    pub fn iid(d: usize, n: usize, map: InnovationMap) -> Result<Self> {
        Self::new(d, n, Schedule::Constant(CoefSet::Scalar(vec![1.0])), map, None)
    }

    /// `X_t = psi(eps_t) + a psi(eps_{t-1})` coordinate-wise.
    pub fn ma1(d: usize, n: usize, a: f64, map: InnovationMap) -> Result<Self> {
        Self::new(d, n, Schedule::Constant(CoefSet::Scalar(vec![1.0, a])), map, None)
    }

    /// Replaces the declared metadata.
    pub fn with_meta(mut self, meta: KernelMeta) -> Result<Self> {
        meta.validate()?;
        self.meta = meta;
        Ok(self)
    }

    pub fn innovation_dim(&self) -> usize {
        self.m
    }

    pub fn map(&self) -> InnovationMap {
        self.map
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// `A_j(t)` as a `d x m` matrix (zero for `j > J`).
    pub fn coef(&self, t: usize, j: usize) -> Matrix {
        if j > self.lag {
            return Matrix::zeros(self.d, self.m);
        }
        let (w0, w1) = self.schedule.weights(t, self.n);
        let (first, second) = self.schedule.sets();
        let mut a = first.matrix(j, self.d).scale(w0);
        if let Some(s) = second {
            if w1 != 0.0 {
                a = a.add(&s.matrix(j, self.d).scale(w1));
            }
        }
        a
    }

    fn coef_sum(&self, t: usize) -> Matrix {
        (0..=self.lag).fold(Matrix::zeros(self.d, self.m), |acc, j| acc.add(&self.coef(t, j)))
    }

    fn diff_moment(&self, q: f64) -> f64 {
        let own = self.map.difference_moment(q);
        if self.m == 1 {
            own
        } else {
            own.max(InnovationMap::Gaussian.difference_moment(q))
        }
    }

    fn level_moment(&self, q: f64) -> f64 {
        let own = self.map.moment(q);
        if self.m == 1 {
            own
        } else {
            own.max(InnovationMap::Gaussian.moment(q))
        }
    }

    /// Closed-form `||A_j(t)||_F * mu_q` with `mu_q` the `q`-th moment of the
    /// difference of two independent innovations. Exact for `q = 2`.
    pub fn theta_analytic(&self, t: usize, j: usize, q: f64) -> f64 {
        if j > self.lag {
            return 0.0;
        }
        self.coef(t, j).frobenius() * self.diff_moment(q)
    }

    /// Upper bound on `(E ||X_t||^q)^(1/q)` via Minkowski.
    pub fn moment_bound(&self, t: usize, q: f64) -> f64 {
        let mq = self.level_moment(q);
        (0..=self.lag).map(|j| self.coef(t, j).frobenius() * mq).sum()
    }

    /// Smallest `Theta` with `theta_{t,j,q,2} <= Theta max(j,1)^(-beta)` and
    /// `||X_t||_q <= Theta` for every `t`, from the analytic bounds.
    pub fn theta_floor(&self, q: f64, beta: f64) -> f64 {
        let mut best: f64 = 0.0;
        for t in self.distinct_times() {
            for j in 0..=self.lag {
                best = best.max(self.theta_analytic(t, j, q) * (j.max(1) as f64).powf(beta));
            }
            best = best.max(self.moment_bound(t, q));
        }
        best
    }

    fn distinct_times(&self) -> Vec<usize> {
        match &self.schedule {
            Schedule::Constant(_) => vec![1],
            Schedule::Jump { at, .. } => {
                let mut v = vec![1, self.n];
                if *at >= 1 {
                    v.push(*at);
                }
                v
            }
            Schedule::Lipschitz { .. } => (1..=self.n).collect(),
        }
    }

    /// Local long-run covariance `(sum_j A_j(t)) (sum_j A_j(t))^T`.
    pub fn sigma(&self, t: usize) -> SymMat {
        SymMat::gram(&self.coef_sum(t))
    }

    /// Lag-`h` autocovariance of the frozen kernel, `sum_j A_{j+h}(t) A_j(t)^T`.
    pub fn autocov(&self, t: usize, h: usize) -> Matrix {
        let mut acc = Matrix::zeros(self.d, self.d);
        for j in 0..=self.lag {
            if j + h > self.lag {
                break;
            }
            acc = acc.add(&self.coef(t, j + h).matmul(&self.coef(t, j).transpose()));
        }
        acc
    }

    /// `sum_{t=2..n} ||stacked (A_j(t) - A_j(t-1))||_F`, the closed form of
    /// the total-variation sum for standardized innovations.
    pub fn variation_sum(&self, n: usize) -> f64 {
        match &self.schedule {
            Schedule::Constant(_) => 0.0,
            _ => {
                let mut total = 0.0;
                for t in 2..=n {
                    let mut ss = 0.0;
                    for j in 0..=self.lag {
                        let diff = self.coef(t, j).sub(&self.coef(t - 1, j));
                        ss += diff.frobenius().powi(2);
                    }
                    total += ss.sqrt();
                }
                total
            }
        }
    }
}

impl Kernel for LinearKernel {
    fn dim(&self) -> usize {
        self.d
    }

    fn lag(&self) -> usize {
        self.lag
    }

    fn horizon(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        self.m
    }

    fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    fn transform(&self, uniforms: &[f64], out: &mut [f64]) {
        for (o, &u) in out.iter_mut().zip(uniforms) {
            *o = self.map.apply(u);
        }
    }

    fn eval(&self, t: usize, window: &Window<'_>, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let (w0, w1) = self.schedule.weights(t, self.n);
        let (first, second) = self.schedule.sets();
        for j in 0..=self.lag {
            let x = window.lag(j);
            first.apply_acc(j, w0, x, out);
            if let Some(s) = second {
                s.apply_acc(j, w1, x, out);
            }
        }
    }

    fn as_linear(&self) -> Option<&LinearKernel> {
        Some(self)
    }
}
