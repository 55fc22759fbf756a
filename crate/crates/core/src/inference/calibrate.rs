use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::Statistic;
use crate::covest::{CovProcess, INCREMENT_PSD_TOL};
use crate::error::{Error, Result};
use crate::matops::{eigen, noise_floor, Matrix};
use crate::procmodel::replicate_rng;

/// Smallest admissible number of Monte-Carlo paths.
pub const MIN_MC_REPS: usize = 100;

/// `Z_t = F_t g_t` with `F_t` a `d x r` factor of the increment and
/// `g_t ~ N(0, I_r)`; zero increments have `r = 0`.
#[derive(Debug, Clone)]
struct Factor {
    rank: usize,
    /// row-major `d x rank`
    cols: Vec<f64>,
}

/// Gaussian sampler for independent `Z_t ~ N(0, Q(t) - Q(t-1))`.
///
/// Each increment is factored once; only eigenvalues above the rounding
/// floor are kept, so rank-one increments (as produced by the window
/// estimator) cost a single normal draw per step. Increments that are not
/// PSD are projected by dropping their negative spectrum; the dropped mass
/// is reported.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    n: usize,
    d: usize,
    factors: Vec<Factor>,
    projected: usize,
    clipped: f64,
}

impl IncrementSampler {
    pub fn new(q: &CovProcess) -> Result<Self> {
        let d = q.dim();
        let mut factors = Vec::with_capacity(q.len());
        let mut projected = 0;
        let mut clipped = 0.0;
        for inc in q.increments() {
            let e = eigen(inc)?;
            let max = e.max_value();
            if e.min_value() < 0.0 && e.min_value() < -INCREMENT_PSD_TOL * max.max(0.0) {
                projected += 1;
                clipped += e.values.iter().filter(|l| **l < 0.0).map(|l| -l).sum::<f64>();
            }
            let floor = noise_floor(&e);
            let keep: Vec<usize> = (0..d).filter(|&i| e.values[i] > floor && e.values[i] > 0.0).collect();
            let mut cols = vec![0.0; d * keep.len()];
            for (c, &i) in keep.iter().enumerate() {
                let s = e.values[i].sqrt();
                for (row, v) in e.vector(i).iter().enumerate() {
                    cols[row * keep.len() + c] = s * v;
                }
            }
            factors.push(Factor { rank: keep.len(), cols });
        }
        Ok(Self { n: q.len(), d, factors, projected, clipped })
    }

    /// Number of increments that needed projection onto the PSD cone.
    pub fn projected(&self) -> usize {
        self.projected
    }

    pub fn clipped_mass(&self) -> f64 {
        self.clipped
    }

    /// Writes the partial sums of one Gaussian path into `sums` (`n x d`).
    pub fn sample_partial_sums<R: Rng + ?Sized>(&self, rng: &mut R, sums: &mut [f64]) {
        let d = self.d;
        let mut acc = vec![0.0; d];
        let mut g = vec![0.0; d];
        for (t, f) in self.factors.iter().enumerate() {
            if f.rank > 0 {
                for v in g[..f.rank].iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for (i, a) in acc.iter_mut().enumerate() {
                    let row = &f.cols[i * f.rank..(i + 1) * f.rank];
                    *a += row.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            sums[t * d..(t + 1) * d].copy_from_slice(&acc);
        }
    }

    /// One Gaussian path `Z_1..Z_n`.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix {
        let (n, d) = (self.n, self.d);
        let mut sums = vec![0.0; n * d];
        self.sample_partial_sums(rng, &mut sums);
        let mut out = vec![0.0; n * d];
        for t in 0..n {
            for i in 0..d {
                let prev = if t == 0 { 0.0 } else { sums[(t - 1) * d + i] };
                out[t * d + i] = sums[t * d + i] - prev;
            }
        }
        Matrix::from_vec(n, d, out).expect("shape")
    }

    /// Statistic values of `reps` independent Gaussian paths; replicate `i`
    /// draws from `replicate_rng(seed, i)`, so the output does not depend on
    /// the number of worker threads.
    pub fn draw_statistics(&self, statistic: Statistic, reps: usize, seed: u64) -> Vec<f64> {
        let (n, d) = (self.n, self.d);
        (0..reps)
            .into_par_iter()
            .map_init(
                || vec![0.0; n * d],
                |sums, i| {
                    let mut rng = replicate_rng(seed, i as u64);
                    self.sample_partial_sums(&mut rng, sums);
                    statistic.from_partial_sums(sums, n, d)
                },
            )
            .collect()
    }
}

/// Monte-Carlo quantile with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub quantile: f64,
    /// Half the spread between the order statistics at
    /// `(1 - alpha) -+ sqrt(alpha (1 - alpha) / B)`.
    pub standard_error: f64,
    pub mc_reps: usize,
    pub projected_increments: usize,
    pub clipped_mass: f64,
}

/// `ceil((1 - alpha)(B + 1))`-th order statistic of a sorted sample, clamped
/// to the sample maximum.
pub fn order_statistic_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let b = sorted.len();
    let k = ((1.0 - alpha) * (b as f64 + 1.0)).ceil() as usize;
    sorted[k.clamp(1, b) - 1]
}

fn quantile_se(sorted: &[f64], alpha: f64) -> f64 {
    let b = sorted.len() as f64;
    let p = 1.0 - alpha;
    let h = (alpha * (1.0 - alpha) / b).sqrt();
    let at = |prob: f64| {
        let k = (prob.clamp(0.0, 1.0) * b).ceil() as usize;
        sorted[k.clamp(1, sorted.len()) - 1]
    };
    0.5 * (at(p + h) - at(p - h))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    Ok(())
}

/// Quantile `a_alpha(Q)` of the statistic evaluated on independent
/// `Z_t ~ N(0, Q(t) - Q(t-1))`.
pub fn quantile_mc(q: &CovProcess, statistic: Statistic, alpha: f64, reps: usize, seed: u64) -> Result<f64> {
    quantile_mc_detailed(q, statistic, alpha, reps, seed).map(|e| e.quantile)
}

pub fn quantile_mc_detailed(
    q: &CovProcess,
    statistic: Statistic,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<QuantileEstimate> {
    check_alpha(alpha)?;
    if reps < MIN_MC_REPS {
        return Err(Error::invalid(format!("need at least {MIN_MC_REPS} Monte-Carlo paths")));
    }
    if q.is_empty() {
        return Err(Error::invalid("covariance process is empty"));
    }
    let sampler = IncrementSampler::new(q)?;
    let mut draws = sampler.draw_statistics(statistic, reps, seed);
    draws.sort_by(f64::total_cmp);
    Ok(QuantileEstimate {
        quantile: order_statistic_quantile(&draws, alpha),
        standard_error: quantile_se(&draws, alpha),
        mc_reps: reps,
        projected_increments: sampler.projected(),
        clipped_mass: sampler.clipped_mass(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::SymMat;
    use crate::procmodel::normal::inv_normal_cdf;

    fn unit(n: usize) -> CovProcess {
        CovProcess::from_increments(1, vec![SymMat::diag(&[1.0]); n]).unwrap()
    }

    #[test]
    fn zero_process() {
        let q = CovProcess::zeros(10, 3).unwrap();
        for a in [0.01, 0.5, 0.9] {
            assert_eq!(quantile_mc(&q, Statistic::Seq, a, 200, 1).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_normal() {
        let a = quantile_mc(&unit(1), Statistic::Seq, 0.1, 40_000, 2).unwrap();
        let target = inv_normal_cdf(0.95);
        assert!((a - target).abs() < 3.0 / (40_000f64).sqrt() * 2.0, "{a}");
    }

    #[test]
    fn monotone_in_alpha_and_deterministic() {
        let q = unit(30);
        let a1 = quantile_mc(&q, Statistic::Cusum, 0.1, 500, 3).unwrap();
        let a2 = quantile_mc(&q, Statistic::Cusum, 0.05, 500, 3).unwrap();
        assert!(a2 >= a1);
        assert_eq!(a1, quantile_mc(&q, Statistic::Cusum, 0.1, 500, 3).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a3 = pool.install(|| quantile_mc(&q, Statistic::Cusum, 0.1, 500, 3).unwrap());
        assert_eq!(a1.to_bits(), a3.to_bits());
    }

    #[test]
    fn validation() {
        let q = unit(3);
        assert!(quantile_mc(&q, Statistic::Seq, 0.1, 99, 0).is_err());
        assert!(quantile_mc(&q, Statistic::Seq, 0.0, 100, 0).is_err());
        assert!(quantile_mc(&q, Statistic::Seq, 1.0, 100, 0).is_err());
    }

    #[test]
    fn order_statistic_rule() {
        let v: Vec<f64> = (1..=99).map(f64::from).collect();
        // ceil(0.9 * 100) = 90
        assert_eq!(order_statistic_quantile(&v, 0.1), 90.0);
        assert_eq!(order_statistic_quantile(&v, 1e-9), 99.0);
    }

    #[test]
    fn projects_indefinite_increments() {
        let incs = vec![SymMat::diag(&[1.0, -0.5]), SymMat::diag(&[1.0, 1.0])];
        let q = CovProcess::from_increments_unchecked(2, incs).unwrap();
        let est = quantile_mc_detailed(&q, Statistic::Seq, 0.1, 200, 4).unwrap();
        assert_eq!(est.projected_increments, 1);
        assert!((est.clipped_mass - 0.5).abs() < 1e-12);
        assert!(est.quantile.is_finite());
    }

    #[test]
    fn rank_one_sampler_covariance() {
        let v = [1.0, -2.0, 0.5];
        let q = CovProcess::from_increments(3, vec![SymMat::outer(&v); 1]).unwrap();
        let s = IncrementSampler::new(&q).unwrap();
        let mut rng = replicate_rng(5, 0);
        let mut cov = SymMat::zeros(3);
        let reps = 50_000;
        for _ in 0..reps {
            let z = s.sample_path(&mut rng);
            cov.add_outer(1.0 / reps as f64, z.row(0));
        }
        let target = SymMat::outer(&v);
        assert!(cov.sub(&target).frobenius() / target.frobenius() < 0.03);
    }
}
