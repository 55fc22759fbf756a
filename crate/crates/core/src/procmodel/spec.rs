//! JSON kernel specification files.
//!
//! ```json
//! {"type": "linear", "d": 5, "J": 1, "n": 500,
//!  "schedule": {"kind": "constant", "coefficients": {"lags": [1.0, 0.5]}},
//!  "innovation": "gaussian",
//!  "theta_meta": {"Theta": 4.5, "beta": 3.0, "q": 4.0}}
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::categorical::CategoricalKernel;
use super::kernel::{Kernel, KernelMeta};
use super::linear::{CoefSet, InnovationMap, LinearKernel, Schedule};
use crate::error::{Error, Result};
use crate::matops::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefSpec {
    Lags { lags: Vec<f64> },
    Ar { ar: f64 },
    Matrices { matrices: Vec<Vec<Vec<f64>>> },
}

impl CoefSpec {
    fn build(&self, lag: Option<usize>) -> Result<CoefSet> {
        match self {
            CoefSpec::Lags { lags } => {
                if let Some(j) = lag {
                    if lags.len() != j + 1 {
                        return Err(Error::invalid(format!(
                            "J = {j} requires {} lag coefficients, got {}",
                            j + 1,
                            lags.len()
                        )));
                    }
                }
                Ok(CoefSet::Scalar(lags.clone()))
            }
            CoefSpec::Ar { ar } => {
                let j = lag.ok_or_else(|| Error::invalid("autoregressive coefficients need J"))?;
                if !(ar.abs() < 1.0) {
                    return Err(Error::invalid("autoregressive coefficient must lie in (-1, 1)"));
                }
                Ok(CoefSet::Scalar((0..=j).map(|k| ar.powi(k as i32)).collect()))
            }
            CoefSpec::Matrices { matrices } => {
                if let Some(j) = lag {
                    if matrices.len() != j + 1 {
                        return Err(Error::invalid("matrix count must equal J + 1"));
                    }
                }
                if matrices.is_empty() {
                    return Err(Error::invalid("no coefficient matrices"));
                }
                let ms = matrices.iter().map(|rows| Matrix::from_rows(rows)).collect::<Result<Vec<_>>>()?;
                Ok(CoefSet::Matrices(ms))
            }
        }
    }

    fn fixed_dim(&self) -> Option<usize> {
        match self {
            CoefSpec::Matrices { matrices } => matrices.first().map(Vec::len),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScheduleSpec {
    Constant {
        coefficients: CoefSpec,
    },
    Lipschitz {
        start: CoefSpec,
        end: CoefSpec,
    },
    Jump {
        before: CoefSpec,
        after: CoefSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaMeta {
    #[serde(rename = "Theta", default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(rename = "Gamma", default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

fn default_beta() -> f64 {
    3.0
}

fn default_q() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear {
        d: usize,
        #[serde(rename = "J")]
        lag: usize,
        n: usize,
        schedule: ScheduleSpec,
        #[serde(default = "default_map")]
        innovation: InnovationMap,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_meta: Option<ThetaMeta>,
    },
    Categorical {
        d: usize,
        #[serde(rename = "J", default)]
        lag: usize,
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probs: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_meta: Option<ThetaMeta>,
    },
}

fn default_map() -> InnovationMap {
    InnovationMap::Gaussian
}

impl KernelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("kernel spec serializes")
    }

    pub fn horizon(&self) -> usize {
        match self {
            KernelSpec::Linear { n, .. } | KernelSpec::Categorical { n, .. } => *n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelSpec::Linear { d, .. } | KernelSpec::Categorical { d, .. } => *d,
        }
    }

    /// Copy with horizon `n` and dimension `d`. Fails when the coefficients
    /// or probabilities pin a different dimension.
    pub fn with_shape(&self, n: usize, d: usize) -> Result<Self> {
        let mut s = self.clone();
        match &mut s {
            KernelSpec::Linear { d: sd, n: sn, schedule, .. } => {
                let fixed = match schedule {
                    ScheduleSpec::Constant { coefficients } => coefficients.fixed_dim(),
                    ScheduleSpec::Lipschitz { start, .. } => start.fixed_dim(),
                    ScheduleSpec::Jump { before, .. } => before.fixed_dim(),
                };
                if fixed.is_some_and(|f| f != d) {
                    return Err(Error::invalid("coefficient matrices fix the dimension"));
                }
                // keep the jump at the same relative position
                if let ScheduleSpec::Jump { at: Some(a), .. } = schedule {
                    *a = (*a as f64 * n as f64 / *sn as f64).round() as usize;
                }
                *sd = d;
                *sn = n;
            }
            KernelSpec::Categorical { d: sd, n: sn, probs, .. } => {
                if probs.as_ref().is_some_and(|p| p.len() != d) {
                    return Err(Error::invalid("probability vector fixes the dimension"));
                }
                *sd = d;
                *sn = n;
            }
        }
        Ok(s)
    }

    pub fn build(&self) -> Result<Arc<dyn Kernel>> {
        match self {
            KernelSpec::Linear { .. } => Ok(Arc::new(self.build_linear()?)),
            KernelSpec::Categorical { d, lag, n, probs, theta_meta } => {
                if *lag != 0 {
                    return Err(Error::invalid("categorical kernels have J = 0"));
                }
                let p = probs.clone().unwrap_or_else(|| vec![1.0 / *d as f64; *d]);
                if p.len() != *d {
                    return Err(Error::invalid("probability vector length must equal d"));
                }
                let base = CategoricalKernel::new(p.clone(), *n, None)?;
                let meta = theta_meta.map(|tm| KernelMeta {
                    theta: tm.theta.unwrap_or_else(|| base.theta_exact(tm.q).max(base.moment_exact(tm.q))),
                    beta: tm.beta,
                    q: tm.q,
                    gamma: tm.gamma.unwrap_or(1.0),
                });
                Ok(Arc::new(CategoricalKernel::new(p, *n, meta)?))
            }
        }
    }

    pub fn build_linear(&self) -> Result<LinearKernel> {
        let KernelSpec::Linear { d, lag, n, schedule, innovation, theta_meta } = self else {
            return Err(Error::invalid("kernel is not linear"));
        };
        let j = Some(*lag);
        let sched = match schedule {
            ScheduleSpec::Constant { coefficients } => Schedule::Constant(coefficients.build(j)?),
            ScheduleSpec::Lipschitz { start, end } => {
                Schedule::Lipschitz { start: start.build(j)?, end: end.build(j)? }
            }
            ScheduleSpec::Jump { before, after, at } => {
                Schedule::Jump { before: before.build(j)?, after: after.build(j)?, at: at.unwrap_or(*n / 2) }
            }
        };
        let base = LinearKernel::new(*d, *n, sched, *innovation, None)?;
        match theta_meta {
            None => Ok(base),
            Some(tm) => {
                let theta = tm.theta.unwrap_or_else(|| base.theta_floor(tm.q, tm.beta));
                let gamma = match tm.gamma {
                    Some(g) => g,
                    None if theta > 0.0 => (base.variation_sum(*n) / theta).max(1.0),
                    None => 1.0,
                };
                base.with_meta(KernelMeta { theta, beta: tm.beta, q: tm.q, gamma })
            }
        }
    }
}

/// The shipped demonstration kernels.
pub mod demo {
    use super::*;

    fn meta() -> Option<ThetaMeta> {
        Some(ThetaMeta { theta: None, beta: 3.0, q: 4.0, gamma: None })
    }

    pub fn iid(d: usize, n: usize) -> KernelSpec {
        KernelSpec::Linear {
            d,
            lag: 0,
            n,
            schedule: ScheduleSpec::Constant { coefficients: CoefSpec::Lags { lags: vec![1.0] } },
            innovation: InnovationMap::Gaussian,
            theta_meta: meta(),
        }
    }

    pub fn ma1(d: usize, n: usize) -> KernelSpec {
        KernelSpec::Linear {
            d,
            lag: 1,
            n,
            schedule: ScheduleSpec::Constant { coefficients: CoefSpec::Lags { lags: vec![1.0, 0.5] } },
            innovation: InnovationMap::Gaussian,
            theta_meta: meta(),
        }
    }

    /// AR(1)-type filter whose coefficient drifts from 0.2 to 0.6.
    pub fn lipschitz(d: usize, n: usize) -> KernelSpec {
        KernelSpec::Linear {
            d,
            lag: 20,
            n,
            schedule: ScheduleSpec::Lipschitz { start: CoefSpec::Ar { ar: 0.2 }, end: CoefSpec::Ar { ar: 0.6 } },
            innovation: InnovationMap::Gaussian,
            theta_meta: meta(),
        }
    }

    /// Variance 1 before the midpoint, 4 after.
    pub fn jump(d: usize, n: usize) -> KernelSpec {
        KernelSpec::Linear {
            d,
            lag: 0,
            n,
            schedule: ScheduleSpec::Jump {
                before: CoefSpec::Lags { lags: vec![1.0] },
                after: CoefSpec::Lags { lags: vec![2.0] },
                at: None,
            },
            innovation: InnovationMap::Gaussian,
            theta_meta: meta(),
        }
    }

    pub fn categorical(d: usize, n: usize) -> KernelSpec {
        KernelSpec::Categorical { d, lag: 0, n, probs: None, theta_meta: None }
    }

    pub fn all(d: usize, n: usize) -> Vec<(&'static str, KernelSpec)> {
        vec![
            ("iid", iid(d, n)),
            ("ma1", ma1(d, n)),
            ("lipschitz", lipschitz(d, n)),
            ("jump", jump(d, n)),
            ("categorical", categorical(d, n)),
        ]
    }
}
