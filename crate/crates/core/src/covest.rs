//! Cumulative long-run covariance processes and the overlapping-window
//! estimator
//! `Q̂(k) = sum_{t=b}^{k} b^{-1} (X_{t-b+1} + ... + X_t)(X_{t-b+1} + ... + X_t)ᵀ`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{eigen, trace_norm, Matrix, SymMat};
use crate::procmodel::LinearKernel;

/// Increments whose smallest eigenvalue is below `-INCREMENT_PSD_TOL *
/// lambda_max` are rejected when a process is loaded.
pub const INCREMENT_PSD_TOL: f64 = 1e-8;

/// Increasing path `Q(0) = 0, Q(1), ..., Q(n)` of symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CovProcess {
    d: usize,
    increments: Vec<SymMat>,
    cumulative: Vec<SymMat>,
}

#[derive(Serialize, Deserialize)]
struct CovProcessJson {
    n: usize,
    d: usize,
    increments: Vec<Vec<f64>>,
}

impl CovProcess {
    /// Builds the process from its increments without checking them.
    pub fn from_increments_unchecked(d: usize, increments: Vec<SymMat>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if increments.iter().any(|m| m.dim() != d) {
            return Err(Error::invalid("increment dimension mismatch"));
        }
        let mut cumulative = Vec::with_capacity(increments.len() + 1);
        let mut acc = SymMat::zeros(d);
        cumulative.push(acc.clone());
        for inc in &increments {
            acc.add_assign(inc);
            cumulative.push(acc.clone());
        }
        Ok(Self { d, increments, cumulative })
    }

    /// Builds the process and checks that every increment is PSD within
    /// [`INCREMENT_PSD_TOL`].
    pub fn from_increments(d: usize, increments: Vec<SymMat>) -> Result<Self> {
        for (k, inc) in increments.iter().enumerate() {
            if !inc.is_finite() {
                return Err(Error::invalid(format!("increment {} is not finite", k + 1)));
            }
            let e = eigen(inc)?;
            let max = e.max_value().max(0.0);
            if e.min_value() < 0.0 && e.min_value() < -INCREMENT_PSD_TOL * max {
                return Err(Error::NotPsd { min_eigenvalue: e.min_value(), max_eigenvalue: e.max_value() });
            }
        }
        Self::from_increments_unchecked(d, increments)
    }

    pub fn zeros(n: usize, d: usize) -> Result<Self> {
        Self::from_increments_unchecked(d, vec![SymMat::zeros(d); n])
    }

    /// Horizon `n`.
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `Q(k)` for `k = 0..=n`.
    pub fn at(&self, k: usize) -> &SymMat {
        &self.cumulative[k]
    }

    /// `Q(k) - Q(k-1)` for `k = 1..=n`.
    pub fn increment(&self, k: usize) -> &SymMat {
        &self.increments[k - 1]
    }

    pub fn increments(&self) -> &[SymMat] {
        &self.increments
    }

    pub fn to_json(&self) -> String {
        let j = CovProcessJson {
            n: self.len(),
            d: self.d,
            increments: self.increments.iter().map(|m| m.packed().to_vec()).collect(),
        };
        serde_json::to_string(&j).expect("process serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: CovProcessJson = serde_json::from_str(text)?;
        if j.increments.len() != j.n {
            return Err(Error::invalid("increment count differs from n"));
        }
        let incs = j.increments.into_iter().map(|v| SymMat::new(j.d, v)).collect::<Result<Vec<_>>>()?;
        // a non-PSD file is bad input rather than a numerical failure
        Self::from_increments(j.d, incs).map_err(|e| match e {
            Error::NotPsd { min_eigenvalue, .. } => {
                Error::invalid(format!("covariance increments must be PSD (found eigenvalue {min_eigenvalue:e})"))
            }
            other => other,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Global-mean centering applied before estimation; off by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    #[default]
    None,
    Global,
}

fn centered(x: &Matrix) -> Matrix {
    let (n, d) = (x.rows(), x.cols());
    let mut mean = vec![0.0; d];
    for row in x.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut out = x.clone();
    for t in 0..n {
        for (v, m) in out.row_mut(t).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    out
}

/// Overlapping-window estimator of the cumulative long-run covariance.
///
/// Increments are zero for `k < b` and the rank-one matrix
/// `b^{-1} w_k w_kᵀ` afterwards, `w_k` being the sum of the last `b` rows.
pub fn qhat(x: &Matrix, b: usize) -> Result<CovProcess> {
    qhat_with(x, b, Centering::None)
}

pub fn qhat_with(x: &Matrix, b: usize, centering: Centering) -> Result<CovProcess> {
    let (n, d) = (x.rows(), x.cols());
    if d == 0 {
        return Err(Error::invalid("data must have at least one column"));
    }
    if b == 0 || b > n {
        return Err(Error::invalid(format!("bandwidth {b} must lie in 1..={n}")));
    }
    if !x.is_finite() {
        return Err(Error::invalid("data contain non-finite values"));
    }
    let owned;
    let x = match centering {
        Centering::None => x,
        Centering::Global => {
            owned = centered(x);
            &owned
        }
    };
    let inv_b = 1.0 / b as f64;
    let mut window = vec![0.0; d];
    let mut incs = Vec::with_capacity(n);
    for k in 0..n {
        for (w, v) in window.iter_mut().zip(x.row(k)) {
            *w += v;
        }
        if k >= b {
            for (w, v) in window.iter_mut().zip(x.row(k - b)) {
                *w -= v;
            }
        }
        let mut inc = SymMat::zeros(d);
        if k + 1 >= b {
            inc.add_outer(inv_b, &window);
        }
        incs.push(inc);
    }
    CovProcess::from_increments_unchecked(d, incs)
}

/// `Q(k) = sum_{t<=k} Σ_t` from the analytic local long-run covariances.
pub fn qtrue(kernel: &LinearKernel, n: usize) -> Result<CovProcess> {
    use crate::procmodel::Kernel;
    if n > kernel.horizon() {
        return Err(Error::invalid("n exceeds kernel horizon"));
    }
    let incs = (1..=n).map(|t| kernel.sigma(t)).collect();
    CovProcess::from_increments_unchecked(kernel.dim(), incs)
}

/// `max_{k=1..n} ||Q̂(k) - Q(k)||_tr`.
pub fn qhat_error(qh: &CovProcess, qt: &CovProcess) -> Result<f64> {
    if qh.len() != qt.len() || qh.dim() != qt.dim() {
        return Err(Error::invalid("processes differ in horizon or dimension"));
    }
    Ok((1..=qh.len()).map(|k| trace_norm(&qh.at(k).sub(qt.at(k)))).fold(0.0, f64::max))
}

/// Default window length `ceil(n^(1/3))`.
pub fn bandwidth_default(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let mut b = (n as f64).cbrt().ceil() as usize;
    // guard against cbrt rounding at perfect cubes
    while b > 1 && (b - 1).pow(3) >= n {
        b -= 1;
    }
    b.clamp(1, n)
}

/// Error-bound shape `Θ² (Γ √b + √(n d b) + n / b + n b^(2-β))`.
pub fn qhat_bound(n: usize, d: usize, b: usize, theta: f64, gamma: f64, beta: f64) -> f64 {
    let (n, d, b) = (n as f64, d as f64, b as f64);
    theta * theta * (gamma * b.sqrt() + (n * d * b).sqrt() + n / b + n * b.powf(2.0 - beta))
}
