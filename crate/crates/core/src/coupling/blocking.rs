use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::{standard_normals, PairCoupler};
use crate::error::{Error, Result};
use crate::matops::{pinv_psd, sqrt_psd, trace_norm, Matrix, SymMat};
use crate::procmodel::replicate_rng;

/// Pair of coupled Gaussian paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPaths {
    pub y: Matrix,
    pub y_prime: Matrix,
}

impl CoupledPaths {
    pub fn len(&self) -> usize {
        self.y.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.y.cols()
    }

    /// Cumulative sums of both paths, row `k - 1` holding the sum up to `k`.
    pub fn partial_sums(&self) -> (Matrix, Matrix) {
        (cumsum(&self.y), cumsum(&self.y_prime))
    }

    /// `max_k || sum_{t<=k} (Y_t - Y'_t) ||^2`.
    pub fn max_sq_deviation(&self) -> f64 {
        let d = self.dim();
        let mut acc = vec![0.0; d];
        let mut best = 0.0f64;
        for (a, b) in self.y.row_iter().zip(self.y_prime.row_iter()) {
            for i in 0..d {
                acc[i] += a[i] - b[i];
            }
            best = best.max(acc.iter().map(|v| v * v).sum());
        }
        best
    }
}

fn cumsum(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for t in 1..out.rows() {
        let prev = out.row(t - 1).to_vec();
        for (v, p) in out.row_mut(t).iter_mut().zip(prev) {
            *v += p;
        }
    }
    out
}

/// Block boundaries `0, L, 2L, ..., n`; the last block may be shorter.
pub fn block_boundaries(n: usize, len: usize) -> Result<Vec<usize>> {
    if len == 0 || len > n {
        return Err(Error::invalid(format!("block length {len} must lie in 1..={n}")));
    }
    let mut b: Vec<usize> = (0..n).step_by(len).collect();
    b.push(n);
    Ok(b)
}

#[derive(Debug, Clone)]
struct BlockPlan {
    lo: usize,
    hi: usize,
    /// `Y' = Y` on this block because the covariances agree termwise.
    identical: bool,
    pair: PairCoupler,
    /// `Σ'_t S'⁺` for every `t` in the block.
    bridge: Vec<Matrix>,
}

/// Blocked coupling of independent `Y_t ~ N(0, Σ_t)` with independent
/// `Y'_t ~ N(0, Σ'_t)`.
///
/// Block sums satisfy `ξ'_l = ξ_l + ζ_l` where `ζ_l` comes from the
/// [`PairCoupler`] of `(S_l, S'_l)`, the blockwise covariance sums. Inside a
/// block, `Y'` is obtained by conditioning fresh draws `W'_t ~ N(0, Σ'_t)` on
/// their sum equalling `ξ'_l`:
/// `Y'_t = W'_t + Σ'_t S'⁺ (ξ'_l - Σ_s W'_s)`. This keeps the `Y'_t` exactly
/// independent with covariance `Σ'_t` while the block sums are coupled.
#[derive(Debug, Clone)]
pub struct PartialSumCoupler {
    n: usize,
    d: usize,
    roots: Vec<SymMat>,
    roots_prime: Vec<SymMat>,
    blocks: Vec<BlockPlan>,
}

impl PartialSumCoupler {
    pub fn new(sigma: &[SymMat], sigma_prime: &[SymMat], len: usize) -> Result<Self> {
        let n = sigma.len();
        if n == 0 || sigma_prime.len() != n {
            return Err(Error::invalid("covariance lists must be nonempty and of equal length"));
        }
        let d = sigma[0].dim();
        if sigma.iter().chain(sigma_prime).any(|s| s.dim() != d) {
            return Err(Error::invalid("covariances must share one dimension"));
        }
        let bounds = block_boundaries(n, len)?;
        let roots = sigma.iter().map(sqrt_psd).collect::<Result<Vec<_>>>()?;
        let roots_prime = sigma_prime.iter().map(sqrt_psd).collect::<Result<Vec<_>>>()?;
        let mut blocks = Vec::with_capacity(bounds.len() - 1);
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let identical = sigma[lo..hi] == sigma_prime[lo..hi];
            let mut s = SymMat::zeros(d);
            let mut sp = SymMat::zeros(d);
            for t in lo..hi {
                s.add_assign(&sigma[t]);
                sp.add_assign(&sigma_prime[t]);
            }
            let pair = PairCoupler::new(&s, &sp)?;
            let bridge = if identical {
                Vec::new()
            } else {
                let pinv = pinv_psd(&sp)?.to_matrix();
                sigma_prime[lo..hi].iter().map(|st| st.to_matrix().matmul(&pinv)).collect()
            };
            blocks.push(BlockPlan { lo, hi, identical, pair, bridge });
        }
        Ok(Self { n, d, roots, roots_prime, blocks })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn boundaries(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.blocks.iter().map(|p| p.lo).collect();
        b.push(self.n);
        b
    }

    /// Total eigenvalue mass clamped across all block couplers.
    pub fn clamped(&self) -> f64 {
        self.blocks.iter().map(|b| b.pair.clamped()).sum()
    }

    /// Sum over blocks of `||S'_l - S_l||_tr`.
    pub fn block_delta_total(&self) -> f64 {
        self.blocks.iter().map(|b| b.pair.expected_sq_distance()).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CoupledPaths {
        let (n, d) = (self.n, self.d);
        let mut y = Matrix::zeros(n, d);
        let mut yp = Matrix::zeros(n, d);
        let mut z = vec![0.0; d];
        let mut xi = vec![0.0; d];
        let mut zeta = vec![0.0; d];
        for blk in &self.blocks {
            xi.fill(0.0);
            for t in blk.lo..blk.hi {
                standard_normals(rng, &mut z);
                let row = y.row_mut(t);
                self.roots[t].mul_vec_into(&z, row);
                for i in 0..d {
                    xi[i] += row[i];
                }
            }
            if blk.identical {
                for t in blk.lo..blk.hi {
                    yp.row_mut(t).copy_from_slice(y.row(t));
                }
                continue;
            }
            blk.pair.noise_given(&xi, rng, &mut zeta);
            // residual r = ξ' − Σ W'
            let mut r: Vec<f64> = xi.iter().zip(&zeta).map(|(a, b)| a + b).collect();
            for t in blk.lo..blk.hi {
                standard_normals(rng, &mut z);
                let row = yp.row_mut(t);
                self.roots_prime[t].mul_vec_into(&z, row);
                for i in 0..d {
                    r[i] -= row[i];
                }
            }
            for (k, t) in (blk.lo..blk.hi).enumerate() {
                blk.bridge[k].mul_vec_acc(&r, yp.row_mut(t));
            }
        }
        CoupledPaths { y, y_prime: yp }
    }
}

/// One draw of the blocked partial-sum coupling, deterministic in `seed`.
pub fn couple_partial_sums(sigma: &[SymMat], sigma_prime: &[SymMat], len: usize, seed: u64) -> Result<CoupledPaths> {
    let c = PartialSumCoupler::new(sigma, sigma_prime, len)?;
    Ok(c.sample(&mut replicate_rng(seed, 0)))
}

/// `(delta, rho)`: `delta = max_k ||sum_{t<=k} (Σ_t - Σ'_t)||_tr` and
/// `rho = max_t ||Σ_t||_tr`.
pub fn delta_rho(sigma: &[SymMat], sigma_prime: &[SymMat]) -> Result<(f64, f64)> {
    if sigma.len() != sigma_prime.len() || sigma.is_empty() {
        return Err(Error::invalid("covariance lists must be nonempty and of equal length"));
    }
    let d = sigma[0].dim();
    let mut acc = SymMat::zeros(d);
    let mut delta = 0.0f64;
    let mut rho = 0.0f64;
    for (s, sp) in sigma.iter().zip(sigma_prime) {
        acc.add_assign(&s.sub(sp));
        delta = delta.max(trace_norm(&acc));
        rho = rho.max(trace_norm(s));
    }
    Ok((delta, rho))
}

/// Right-hand shape `log(n) [sqrt(n delta rho) + rho]` of the blocked
/// coupling bound.
pub fn coupling_bound(n: usize, delta: f64, rho: f64) -> f64 {
    (n as f64).ln() * ((n as f64 * delta * rho).sqrt() + rho)
}

/// Shape `n^(1/2) sum_j theta_j (1 ^ M j / n)^(1/q)` of the block-decoupling
/// bound, where `theta[j]` bounds `theta_{t,j,q}` uniformly in `t`.
pub fn surrogate_bound(theta: &[f64], n: usize, blocks: usize, q: f64) -> f64 {
    let nf = n as f64;
    let sum: f64 =
        theta.iter().enumerate().map(|(j, th)| th * (blocks as f64 * j as f64 / nf).min(1.0).powf(1.0 / q)).sum();
    nf.sqrt() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64, n: usize) -> Vec<SymMat> {
        vec![SymMat::diag(&[v]); n]
    }

    #[test]
    fn boundaries() {
        assert_eq!(block_boundaries(10, 4).unwrap(), vec![0, 4, 8, 10]);
        assert_eq!(block_boundaries(4, 4).unwrap(), vec![0, 4]);
        assert!(block_boundaries(4, 0).is_err());
        assert!(block_boundaries(4, 5).is_err());
    }

    #[test]
    fn identity_coupling() {
        let s: Vec<SymMat> = (0..9).map(|t| SymMat::diag(&[1.0 + t as f64, 2.0])).collect();
        let p = couple_partial_sums(&s, &s, 4, 11).unwrap();
        assert_eq!(p.y, p.y_prime);
        assert_eq!(p.max_sq_deviation(), 0.0);
    }

    #[test]
    fn deterministic() {
        let a = couple_partial_sums(&scalar(1.0, 20), &scalar(1.21, 20), 5, 3).unwrap();
        let b = couple_partial_sums(&scalar(1.0, 20), &scalar(1.21, 20), 5, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_step_block_noise_and_marginals() {
        let c = PartialSumCoupler::new(&scalar(1.0, 2), &scalar(1.21, 2), 2).unwrap();
        assert!((c.block_delta_total() - 0.42).abs() < 1e-12);
        let reps = 100_000;
        let mut rng = replicate_rng(8, 0);
        let (mut zeta2, mut v1, mut v2, mut c12, mut vs) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..reps {
            let p = c.sample(&mut rng);
            let xi = p.y.get(0, 0) + p.y.get(1, 0);
            let a = p.y_prime.get(0, 0);
            let b = p.y_prime.get(1, 0);
            zeta2 += (a + b - xi).powi(2);
            v1 += a * a;
            v2 += b * b;
            c12 += a * b;
            vs += (a + b).powi(2);
        }
        let r = reps as f64;
        assert!((zeta2 / r - 0.42).abs() / 0.42 < 0.05, "{}", zeta2 / r);
        assert!((v1 / r - 1.21).abs() < 0.03);
        assert!((v2 / r - 1.21).abs() < 0.03);
        assert!((c12 / r).abs() < 0.03);
        assert!((vs / r - 2.42).abs() / 2.42 < 0.03);
    }

    #[test]
    fn block_sum_covariance_matches_target() {
        let s: Vec<SymMat> = (0..6).map(|t| SymMat::diag(&[1.0, 0.5 + 0.1 * t as f64])).collect();
        let sp: Vec<SymMat> =
            (0..6).map(|t| SymMat::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0 + 0.05 * t as f64]]).unwrap()).collect();
        let c = PartialSumCoupler::new(&s, &sp, 3).unwrap();
        let reps = 100_000;
        let mut rng = replicate_rng(9, 0);
        let mut cov = [SymMat::zeros(2), SymMat::zeros(2)];
        for _ in 0..reps {
            let p = c.sample(&mut rng);
            for (l, acc) in cov.iter_mut().enumerate() {
                let mut sum = [0.0; 2];
                for t in 3 * l..3 * l + 3 {
                    sum[0] += p.y_prime.get(t, 0);
                    sum[1] += p.y_prime.get(t, 1);
                }
                acc.add_outer(1.0, &sum);
            }
        }
        for (l, acc) in cov.iter().enumerate() {
            let mut target = SymMat::zeros(2);
            for t in 3 * l..3 * l + 3 {
                target.add_assign(&sp[t]);
            }
            let est = acc.scale(1.0 / reps as f64);
            assert!(est.sub(&target).frobenius() / target.frobenius() < 0.03);
        }
    }

    #[test]
    fn delta_rho_constant() {
        let (delta, rho) = delta_rho(&scalar(1.0, 10), &scalar(1.21, 10)).unwrap();
        assert!((delta - 2.1).abs() < 1e-12);
        assert!((rho - 1.0).abs() < 1e-12);
        assert_eq!(coupling_bound(10, 0.0, 1.0), 10f64.ln());
    }

    #[test]
    fn surrogate_bound_shape() {
        // j = 0 never contributes; one lag at full weight once M j >= n
        assert_eq!(surrogate_bound(&[5.0], 100, 4, 4.0), 0.0);
        let v = surrogate_bound(&[1.0, 0.5], 16, 16, 4.0);
        assert!((v - 4.0 * 0.5).abs() < 1e-12);
    }
}
