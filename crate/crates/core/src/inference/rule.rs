use serde::{Deserialize, Serialize};

use super::calibrate::{quantile_mc_detailed, MIN_MC_REPS};
use super::stats::Statistic;
use crate::coupling::rate_xi;
use crate::covest::{bandwidth_default, qhat_with, Centering};
use crate::error::{Error, Result};
use crate::matops::Matrix;

/// `(tau, nu) = (1 / ln n, 1 / ln n)` before clamping.
pub fn default_offsets(n: usize) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::invalid("default offsets need n >= 3"));
    }
    let v = 1.0 / (n as f64).ln();
    Ok((v, v))
}

/// Parameters of the offset test `T(X) > a_{alpha - nu}(Q̂) + tau`.
///
/// `None` offsets and bandwidth are filled in from the sample size; a
/// defaulted `nu` is clamped to at most `alpha / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub statistic: Statistic,
    pub alpha: f64,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub bandwidth: Option<usize>,
    pub mc_reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub centering: Centering,
}

impl TestConfig {
    pub fn new(statistic: Statistic, alpha: f64, seed: u64) -> Self {
        Self { statistic, alpha, nu: None, tau: None, bandwidth: None, mc_reps: 2000, seed, centering: Centering::None }
    }

    /// Fully specified parameters for a sample of length `n`.
    pub fn resolve(&self, n: usize) -> Result<ResolvedConfig> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if self.mc_reps < MIN_MC_REPS {
            return Err(Error::invalid(format!("need at least {MIN_MC_REPS} Monte-Carlo paths")));
        }
        let (tau_d, nu_d) = if self.tau.is_none() || self.nu.is_none() { default_offsets(n)? } else { (0.0, 0.0) };
        let tau = self.tau.unwrap_or(tau_d);
        let nu = self.nu.unwrap_or(nu_d.min(self.alpha / 2.0));
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::invalid("tau must be a finite nonnegative number"));
        }
        if !(nu >= 0.0 && nu < self.alpha) {
            return Err(Error::invalid("nu must lie in [0, alpha)"));
        }
        let bandwidth = self.bandwidth.unwrap_or_else(|| bandwidth_default(n));
        if bandwidth == 0 || bandwidth > n {
            return Err(Error::invalid(format!("bandwidth {bandwidth} must lie in 1..={n}")));
        }
        Ok(ResolvedConfig {
            statistic: self.statistic,
            alpha: self.alpha,
            nu,
            tau,
            bandwidth,
            mc_reps: self.mc_reps,
            seed: self.seed,
            centering: self.centering,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub statistic: Statistic,
    pub alpha: f64,
    pub nu: f64,
    pub tau: f64,
    pub bandwidth: usize,
    pub mc_reps: usize,
    pub seed: u64,
    pub centering: Centering,
}

/// Outcome of [`run_test`]; `reject == (value > quantile + tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: Statistic,
    pub value: f64,
    pub quantile: f64,
    pub threshold: f64,
    pub tau: f64,
    pub nu: f64,
    pub alpha: f64,
    pub bandwidth: usize,
    pub mc_reps: usize,
    pub seed: u64,
    pub reject: bool,
    pub quantile_se: f64,
    pub centering: Centering,
    pub n: usize,
    pub d: usize,
    pub projected_increments: usize,
}

/// Estimates `Q̂`, calibrates `a_{alpha - nu}(Q̂)` by Monte Carlo and applies
/// the offset rejection rule.
pub fn run_test(x: &Matrix, config: &TestConfig) -> Result<TestReport> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 || d == 0 {
        return Err(Error::invalid("empty data"));
    }
    let c = config.resolve(n)?;
    let q = qhat_with(x, c.bandwidth, c.centering)?;
    let est = quantile_mc_detailed(&q, c.statistic, c.alpha - c.nu, c.mc_reps, c.seed)?;
    let value = c.statistic.eval(x);
    let threshold = est.quantile + c.tau;
    Ok(TestReport {
        statistic: c.statistic,
        value,
        quantile: est.quantile,
        threshold,
        tau: c.tau,
        nu: c.nu,
        alpha: c.alpha,
        bandwidth: c.bandwidth,
        mc_reps: c.mc_reps,
        seed: c.seed,
        reject: value > threshold,
        quantile_se: est.standard_error,
        centering: c.centering,
        n,
        d,
        projected_increments: est.projected_increments,
    })
}

/// Inputs of the offset condition; sizes are reals so that the asymptotic
/// regime can be probed beyond machine-sized samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionParams {
    pub n: f64,
    pub d: f64,
    pub theta: f64,
    pub gamma: f64,
    pub b: f64,
    pub q: f64,
    pub beta: f64,
    pub nu: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `(label, value)` for each summand of the right-hand side, each
    /// already multiplied by `sqrt(log n) Theta` (and `nu^{-1/2}` where it
    /// applies).
    pub terms: Vec<(String, f64)>,
    pub rhs: f64,
    /// `tau / rhs`.
    pub ratio: f64,
    pub satisfied: bool,
}

/// Evaluates the offset condition with the hidden constant set to one:
///
/// ```text
/// tau >> sqrt(log n) Θ {(d/n)^xi + nu^{-1/2}(Γ^{1/4} n^{-1/4} b^{1/8}
///        + n^{-1/8} d^{1/8} b^{1/8} + b^{-1/4} + b^{(2-β)/4} + n^{-1/2})}
/// ```
pub fn seq_test_condition(p: &ConditionParams) -> Result<ConditionReport> {
    if !(p.q > 4.0 && p.beta > 2.0) {
        return Err(Error::invalid("the condition needs q > 4 and beta > 2"));
    }
    if !(p.n >= 2.0 && p.d >= 1.0 && p.b >= 1.0 && p.theta >= 0.0 && p.gamma >= 1.0) {
        return Err(Error::invalid("need n >= 2, d >= 1, b >= 1, Theta >= 0, Gamma >= 1"));
    }
    if !(p.nu > 0.0 && p.tau >= 0.0) {
        return Err(Error::invalid("need nu > 0 and tau >= 0"));
    }
    let xi = rate_xi(p.q, p.beta)?;
    let lead = p.n.ln().sqrt() * p.theta;
    let w = lead / p.nu.sqrt();
    let terms = vec![
        ("(d/n)^xi".to_string(), lead * (p.d / p.n).powf(xi)),
        ("Gamma^(1/4) n^(-1/4) b^(1/8)".to_string(), w * p.gamma.powf(0.25) * p.n.powf(-0.25) * p.b.powf(0.125)),
        ("n^(-1/8) d^(1/8) b^(1/8)".to_string(), w * (p.d * p.b / p.n).powf(0.125)),
        ("b^(-1/4)".to_string(), w * p.b.powf(-0.25)),
        ("b^((2-beta)/4)".to_string(), w * p.b.powf((2.0 - p.beta) / 4.0)),
        ("n^(-1/2)".to_string(), w / p.n.sqrt()),
    ];
    let rhs: f64 = terms.iter().map(|t| t.1).sum();
    let ratio = if rhs > 0.0 { p.tau / rhs } else { f64::INFINITY };
    Ok(ConditionReport { terms, rhs, ratio, satisfied: ratio > 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procmodel::{gen_path, InnovationStream, KernelSpec};

    #[test]
    fn offsets() {
        let (t, v) = default_offsets(20).unwrap();
        assert!((t - 1.0 / 20f64.ln()).abs() < 1e-15 && t == v);
        let (t, _) = default_offsets(1_000_000).unwrap();
        assert!((t - 0.0723824).abs() < 1e-6);
        assert!(default_offsets(2).is_err());
        let e3 = std::f64::consts::E.powi(3);
        assert!((1.0 / e3.ln() - 1.0 / 3.0).abs() < 1e-15);
        let cfg = TestConfig::new(Statistic::Seq, 0.05, 0);
        let r = cfg.resolve(20).unwrap();
        assert_eq!(r.nu, 0.025);
        assert!((r.tau - 1.0 / 20f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TestConfig::new(Statistic::Seq, 1.0, 0);
        assert!(cfg.resolve(100).is_err());
        cfg.alpha = 0.1;
        cfg.nu = Some(0.1);
        assert!(cfg.resolve(100).is_err());
        cfg.nu = Some(0.0);
        cfg.mc_reps = 50;
        assert!(cfg.resolve(100).is_err());
        cfg.mc_reps = 100;
        cfg.bandwidth = Some(101);
        assert!(cfg.resolve(100).is_err());
    }

    #[test]
    fn zero_data_never_rejects() {
        let x = Matrix::zeros(50, 2);
        let r = run_test(&x, &TestConfig::new(Statistic::Cusum, 0.1, 1)).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.quantile >= 0.0);
        assert!(!r.reject);
    }

    #[test]
    fn decision_matches_rule() {
        let spec = crate::procmodel::spec::demo::ma1(3, 200);
        let k = spec.build().unwrap();
        for seed in 0..4 {
            let x = gen_path(k.as_ref(), 200, &InnovationStream::new(seed)).unwrap();
            let mut cfg = TestConfig::new(Statistic::Seq, 0.1, seed);
            cfg.mc_reps = 200;
            cfg.tau = Some(0.0);
            cfg.nu = Some(0.0);
            let r = run_test(&x, &cfg).unwrap();
            assert_eq!(r.reject, r.value > r.quantile + r.tau);
            assert_eq!(r.threshold, r.quantile + r.tau);
        }
        let _ = KernelSpec::from_json(&spec.to_json()).unwrap();
    }

    #[test]
    fn condition_terms() {
        let n = 1e6;
        let mut p = ConditionParams {
            n,
            d: 1.0,
            theta: 1.0,
            gamma: 1.0,
            b: n.cbrt(),
            q: 8.0,
            beta: 4.0,
            nu: 1.0 / n.ln(),
            tau: 1.0 / n.ln(),
        };
        let r = seq_test_condition(&p).unwrap();
        assert_eq!(r.terms.len(), 6);
        assert!((r.rhs - r.terms.iter().map(|t| t.1).sum::<f64>()).abs() < 1e-12);
        // the b^(-1/4) term alone: sqrt(ln n) ln(n)^(1/2) n^(-1/12)
        let b_term = n.ln() * n.powf(-1.0 / 12.0);
        assert!((r.terms[3].1 - b_term).abs() < 1e-9 * b_term);
        let small = r.ratio;
        p.n = 1e60;
        p.b = p.n.cbrt();
        p.nu = 1.0 / p.n.ln();
        p.tau = p.nu;
        let big = seq_test_condition(&p).unwrap();
        assert!(big.ratio > small);
        assert!(big.satisfied);
        p.tau = 0.0;
        let zero = seq_test_condition(&p).unwrap();
        assert_eq!(zero.ratio, 0.0);
        assert!(!zero.satisfied);
        p.q = 4.0;
        assert!(seq_test_condition(&p).is_err());
    }
}
