use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent slack in the Zaitsev-type comparator `d^(8 + alpha)`.
pub const ZAITSEV_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub q: f64,
    pub beta: f64,
    pub n: usize,
    pub d: usize,
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return Err(Error::invalid("beta must be a finite real above 1"));
        }
        if self.d == 0 || self.n < self.d {
            return Err(Error::invalid("need 1 <= d <= n"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Chi,
    Xi,
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 2.0) || q.is_nan() {
        return Err(Error::invalid("q must exceed 2"));
    }
    Ok(())
}

/// Breakpoint between the two lower branches of [`rate_xi`].
pub fn xi_breakpoint(q: f64) -> f64 {
    let r = 2.0 / q;
    (3.0 + r) / (1.0 + r)
}

/// Rate exponent `chi(q, beta)` of the pathwise approximation.
pub fn rate_chi(q: f64, beta: f64) -> Result<f64> {
    check_q(q)?;
    if !(beta > 1.0) {
        return Err(Error::invalid("beta must exceed 1"));
    }
    if q.is_infinite() {
        return Ok(if beta >= 1.5 { 1.0 / 6.0 } else { (beta - 1.0) / (4.0 * beta - 3.0) });
    }
    Ok(if beta >= 1.5 {
        (q - 2.0) / (6.0 * q - 4.0)
    } else {
        (beta - 1.0) * (q - 2.0) / (q * (4.0 * beta - 3.0) - 2.0)
    })
}

/// Rate exponent `xi(q, beta)` of the nonstationary approximation.
pub fn rate_xi(q: f64, beta: f64) -> Result<f64> {
    check_q(q)?;
    if !(beta > 2.0) {
        return Err(Error::invalid("beta must exceed 2"));
    }
    if q.is_infinite() {
        return rate_xi_limit(beta);
    }
    let star = xi_breakpoint(q);
    Ok(if beta >= 3.0 {
        (q - 2.0) / (6.0 * q - 4.0)
    } else if beta > star {
        (beta - 2.0) * (q - 2.0) / ((4.0 * beta - 6.0) * q - 4.0)
    } else {
        0.5 - 1.0 / beta
    })
}

fn rate_xi_limit(beta: f64) -> Result<f64> {
    Ok(if beta >= 3.0 { 1.0 / 6.0 } else { (beta - 2.0) / (4.0 * beta - 6.0) })
}

/// Comparator `d^(8 + alpha) n^(1/q - 1/2)` for the classical
/// independent-case coupling rate.
pub fn rate_zaitsev(q: f64, d: usize, n: usize) -> Result<f64> {
    if !(q >= 2.0) {
        return Err(Error::invalid("q must be at least 2"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    Ok((d as f64).powf(8.0 + ZAITSEV_ALPHA) * (n as f64).powf(1.0 / q - 0.5))
}

// powf can land a hair off an exact integer; nudge before rounding
fn ceil_snap(x: f64) -> f64 {
    (x * (1.0 - 1e-12)).ceil()
}

fn floor_snap(x: f64) -> f64 {
    (x * (1.0 + 1e-12)).floor()
}

/// Block length that balances the blocking and coupling errors.
pub fn block_size(params: RateParams, regime: Regime) -> Result<usize> {
    params.validate()?;
    let RateParams { q, beta, n, d } = params;
    let base = n as f64 / d as f64;
    let raw = match regime {
        Regime::Chi => {
            let e =
                if beta >= 1.5 { (q - 2.0) / (3.0 * q - 2.0) } else { (q - 2.0) / (4.0 * q * beta - 3.0 * q - 2.0) };
            ceil_snap(base.powf(e))
        }
        Regime::Xi => {
            if !(beta > 2.0) {
                return Err(Error::invalid("the xi regime needs beta > 2"));
            }
            let e = if beta >= 3.0 {
                (q - 2.0) / (3.0 * q - 2.0)
            } else if beta > xi_breakpoint(q) {
                (0.5 - 1.0 / q) / (beta - 1.5 - 1.0 / q)
            } else {
                1.0 / beta
            };
            floor_snap(base.powf(e))
        }
    };
    Ok((raw as usize).clamp(1, n))
}

/// `L = 1 v ceil(sqrt(n delta / rho))`, capped at `n`.
pub fn default_block_length(n: usize, delta: f64, rho: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(delta >= 0.0 && rho >= 0.0) {
        return Err(Error::invalid("delta and rho must be nonnegative"));
    }
    if delta == 0.0 {
        return Ok(1);
    }
    if rho == 0.0 {
        return Ok(n);
    }
    let l = ceil_snap((n as f64 * delta / rho).sqrt());
    Ok((l as usize).clamp(1, n))
}
