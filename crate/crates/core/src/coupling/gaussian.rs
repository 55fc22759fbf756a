use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matops::{
    eigen, pinv_psd, pos_neg_parts, psd_project, psd_project_with_info, sqrt_psd, trace_norm, Matrix, SymMat,
};

/// Relative eigenvalue tolerance for the conditional residual covariance.
pub const COUPLING_CLAMP_TOL: f64 = 1e-8;

pub(crate) fn standard_normals<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Coupling of `N(0, s1)` and `N(0, s2)` with `E||Y' - Y||^2 = ||s2 - s1||_tr`.
///
/// With `Δ = s2 - s1 = Δ₊ - Δ₋`, the noise `η = η₁ + η₂` has
/// `Cov(Y, η₁) = -Δ₋`, `Cov(η₁) = Δ₋` and `η₂ ~ N(0, Δ₊)` independent of
/// `(Y, η₁)`. Given `Y`, `η₁` is drawn from its conditional law
/// `N(-Δ₋ s1⁺ Y, Δ₋ - Δ₋ s1⁺ Δ₋)`, so the same coupler can extend an existing
/// draw of `Y`.
///
/// That split needs `Δ₋ <= s1`, which fails for many pairs (typically when
/// `s1` is close to singular). Then the coupler switches to
/// `Y' = s2^{1/2} (c z + sqrt(1 - c²) z')` with `Y = s1^{1/2} z`, choosing
/// `c` so that `E||Y' - Y||^2 = ||s2 - s1||_tr` still holds; both marginals
/// stay exact, only `Cov(η) = |Δ|` is given up. [`PairCoupler::interpolated`]
/// reports which construction is in use.
#[derive(Debug, Clone)]
pub struct PairCoupler {
    dim: usize,
    root: SymMat,
    gain: Matrix,
    residual_root: SymMat,
    positive_root: SymMat,
    delta_trace_norm: f64,
    clamped: f64,
    identical: bool,
    interpolated: bool,
}

impl PairCoupler {
    pub fn new(s1: &SymMat, s2: &SymMat) -> Result<Self> {
        let d = s1.dim();
        if s2.dim() != d {
            return Err(Error::invalid("covariance dimensions differ"));
        }
        let root = sqrt_psd(s1)?;
        sqrt_psd(s2)?;
        if s1 == s2 {
            return Ok(Self {
                dim: d,
                root,
                gain: Matrix::zeros(d, d),
                residual_root: SymMat::zeros(d),
                positive_root: SymMat::zeros(d),
                delta_trace_norm: 0.0,
                clamped: 0.0,
                identical: true,
                interpolated: false,
            });
        }
        let delta = s2.sub(s1);
        let delta_trace_norm = trace_norm(&delta);
        let parts = pos_neg_parts(&delta)?;
        let neg = &parts.negative;
        let pinv = pinv_psd(s1)?;
        let gain = neg.to_matrix().matmul(&pinv.to_matrix()).scale(-1.0);
        let residual = neg.sub(&neg.sandwich(&pinv));
        let lmax = eigen(&residual)?.max_value().abs().max(neg.frobenius());
        let proj = psd_project_with_info(&residual, COUPLING_CLAMP_TOL * lmax)?;
        let split = Self {
            dim: d,
            root,
            gain,
            residual_root: sqrt_psd(&proj.matrix)?,
            positive_root: sqrt_psd(&parts.positive)?,
            delta_trace_norm,
            clamped: proj.clipped,
            identical: false,
            interpolated: false,
        };
        let scale = s1.frobenius().max(s2.frobenius());
        if proj.clipped == 0.0 && split.target_cov().sub(s2).frobenius() <= COUPLING_CLAMP_TOL.sqrt() * scale {
            return Ok(split);
        }
        Self::interpolate(s1, s2, split)
    }

    /// `Cov(Y + η)` implied by the factors.
    fn target_cov(&self) -> SymMat {
        let d = self.dim;
        let mut t = self.gain.clone();
        for i in 0..d {
            t.set(i, i, t.get(i, i) + 1.0);
        }
        let r = t.matmul(&self.root.to_matrix());
        let mut cov = SymMat::gram(&r);
        cov.add_assign(&self.residual_root.sym_product(&self.residual_root));
        cov.add_assign(&self.positive_root.sym_product(&self.positive_root));
        cov
    }

    fn interpolate(s1: &SymMat, s2: &SymMat, split: Self) -> Result<Self> {
        let d = split.dim;
        let r = &split.root;
        let s = sqrt_psd(s2)?;
        let cross = (0..d).map(|i| (0..d).map(|j| r.get(i, j) * s.get(j, i)).sum::<f64>()).sum::<f64>();
        let c = if cross > 0.0 {
            ((s1.trace() + s2.trace() - split.delta_trace_norm) / (2.0 * cross)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let r_pinv = pinv_psd(r)?;
        let sm = s.to_matrix();
        let mut gain = sm.matmul(&r_pinv.to_matrix()).scale(c);
        for i in 0..d {
            gain.set(i, i, gain.get(i, i) - 1.0);
        }
        // noise covariance s (c² (I - P) + (1 - c²) I) s with P the range projector of s1
        let proj = r.sym_product(&r_pinv);
        let mut inner = SymMat::identity(d).sub(&proj.scale(c * c));
        inner = psd_project(&inner, 0.0)?;
        let noise = s.sandwich(&inner);
        Ok(Self {
            gain,
            residual_root: sqrt_psd(&noise)?,
            positive_root: SymMat::zeros(d),
            interpolated: true,
            ..split
        })
    }

    /// Whether the interpolated construction is in use (see the type docs).
    pub fn interpolated(&self) -> bool {
        self.interpolated
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `||s2 - s1||_tr`, the expected squared coupling distance.
    pub fn expected_sq_distance(&self) -> f64 {
        self.delta_trace_norm
    }

    /// Eigenvalue mass removed when the residual covariance had to be
    /// projected back onto the PSD cone (0 when no clamp was needed).
    pub fn clamped(&self) -> f64 {
        self.clamped
    }

    /// Noise `η` for a given draw `y ~ N(0, s1)`.
    pub fn noise_given<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R, eta: &mut [f64]) {
        eta.fill(0.0);
        if self.identical {
            return;
        }
        let d = self.dim;
        let mut z = vec![0.0; 2 * d];
        standard_normals(rng, &mut z);
        self.gain.mul_vec_acc(y, eta);
        let a = self.residual_root.mul_vec(&z[..d]);
        let b = self.positive_root.mul_vec(&z[d..]);
        for i in 0..d {
            eta[i] += a[i] + b[i];
        }
    }

    /// One coupled pair `(Y, Y')`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut z = vec![0.0; d];
        standard_normals(rng, &mut z);
        let y = self.root.mul_vec(&z);
        let mut eta = vec![0.0; d];
        self.noise_given(&y, rng, &mut eta);
        let y2 = y.iter().zip(&eta).map(|(a, b)| a + b).collect();
        (y, y2)
    }
}

/// Draws one coupled pair; see [`PairCoupler`].
pub fn couple_gaussian_pair<R: Rng + ?Sized>(s1: &SymMat, s2: &SymMat, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(PairCoupler::new(s1, s2)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procmodel::replicate_rng;

    fn moments(c: &PairCoupler, reps: usize, seed: u64) -> (SymMat, f64) {
        let d = c.dim();
        let mut rng = replicate_rng(seed, 0);
        let mut cov = SymMat::zeros(d);
        let mut dist = 0.0;
        for _ in 0..reps {
            let (y, y2) = c.sample(&mut rng);
            cov.add_outer(1.0, &y2);
            dist += y.iter().zip(&y2).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        (cov.scale(1.0 / reps as f64), dist / reps as f64)
    }

    #[test]
    fn identical_covariances_give_identical_draws() {
        let s = SymMat::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let c = PairCoupler::new(&s, &s).unwrap();
        let mut rng = replicate_rng(3, 0);
        for _ in 0..10 {
            let (y, y2) = c.sample(&mut rng);
            assert_eq!(y, y2);
        }
    }

    #[test]
    fn zero_source() {
        let s2 = SymMat::diag(&[1.0, 3.0]);
        let c = PairCoupler::new(&SymMat::zeros(2), &s2).unwrap();
        assert!((c.expected_sq_distance() - 4.0).abs() < 1e-12);
        let mut rng = replicate_rng(4, 0);
        let (y, _) = c.sample(&mut rng);
        assert_eq!(y, vec![0.0, 0.0]);
        let (cov, dist) = moments(&c, 40_000, 5);
        assert!((dist - 4.0).abs() / 4.0 < 0.03);
        assert!(cov.sub(&s2).frobenius() / s2.frobenius() < 0.03);
    }

    #[test]
    fn swapped_diagonal() {
        let s1 = SymMat::diag(&[2.0, 1.0]);
        let s2 = SymMat::diag(&[1.0, 2.0]);
        let c = PairCoupler::new(&s1, &s2).unwrap();
        assert!((c.expected_sq_distance() - 2.0).abs() < 1e-12);
        assert_eq!(c.clamped(), 0.0);
        let (cov, dist) = moments(&c, 100_000, 6);
        assert!((dist - 2.0).abs() / 2.0 < 0.03, "{dist}");
        assert!(cov.sub(&s2).frobenius() / s2.frobenius() < 0.03);
    }

    #[test]
    fn negative_part_outside_source_range() {
        // Δ₋ has mass on e2, where s1 is singular: the split cannot apply
        let s1 = SymMat::diag(&[1.0, 0.0]);
        let s2 = SymMat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let c = PairCoupler::new(&s1, &s2).unwrap();
        assert!(c.interpolated());
        let target = trace_norm(&s2.sub(&s1));
        let (cov, dist) = moments(&c, 100_000, 7);
        assert!((dist - target).abs() / target < 0.03, "{dist} vs {target}");
        assert!(cov.sub(&s2).frobenius() / s2.frobenius() < 0.03);
    }

    #[test]
    fn split_used_when_valid() {
        let s1 = SymMat::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s2 = SymMat::from_rows(&[vec![1.5, 0.2], vec![0.2, 1.8]]).unwrap();
        assert!(!PairCoupler::new(&s1, &s2).unwrap().interpolated());
    }

    #[test]
    fn rejects_bad_input() {
        let a = SymMat::diag(&[1.0, -1.0]);
        assert!(PairCoupler::new(&a, &SymMat::identity(2)).is_err());
        assert!(PairCoupler::new(&SymMat::identity(3), &SymMat::identity(2)).is_err());
    }
}
