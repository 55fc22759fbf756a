//! Nonstationary time series `X_t = G_t(eps_t)` driven by addressable iid
//! innovations, together with their dependence measures and analytic
//! second-order structure.

mod categorical;
mod kernel;
mod linear;
pub mod normal;
pub mod spec;
pub mod stream;

pub use categorical::CategoricalKernel;
pub use kernel::{decoupled_surrogate, gamma_tv, gen_path, theta_mc, Kernel, KernelMeta, Window};
pub use linear::{CoefSet, InnovationMap, LinearKernel, Schedule};
pub use spec::{CoefSpec, KernelSpec, ScheduleSpec, ThetaMeta};
pub use stream::{derive_seed, replicate_rng, InnovationStream, Lane};

use crate::matops::{Matrix, SymMat};

pub fn theta_analytic(kernel: &LinearKernel, t: usize, j: usize, q: f64) -> f64 {
    kernel.theta_analytic(t, j, q)
}

pub fn sigma_analytic(kernel: &LinearKernel, t: usize) -> SymMat {
    kernel.sigma(t)
}

pub fn autocov_analytic(kernel: &LinearKernel, t: usize, h: usize) -> Matrix {
    kernel.autocov(t, h)
}

/// `sum_{j >= h} max(j, 1)^(-beta)` for `beta > 1`.
pub fn decay_tail(h: usize, beta: f64) -> f64 {
    assert!(beta > 1.0);
    const TERMS: usize = 100_000;
    let start = h.max(1);
    let mut s = if h == 0 { 1.0 } else { 0.0 };
    for j in start..start + TERMS {
        s += (j as f64).powf(-beta);
    }
    // Euler-Maclaurin remainder for the tail beyond the explicit terms
    let m = (start + TERMS) as f64;
    s + m.powf(1.0 - beta) / (beta - 1.0) + 0.5 * m.powf(-beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::nuclear_norm;
    use crate::matops::trace_norm;

    fn scalar_kernel(lags: Vec<f64>, n: usize, map: InnovationMap) -> LinearKernel {
        LinearKernel::new(1, n, Schedule::Constant(CoefSet::Scalar(lags)), map, None).unwrap()
    }

    #[test]
    fn degenerate_categorical_path_is_zero() {
        let k = CategoricalKernel::new(vec![1.0, 0.0, 0.0], 50, None).unwrap();
        let x = gen_path(&k, 50, &InnovationStream::new(3)).unwrap();
        assert!(x.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn categorical_rows_sum_to_zero() {
        let k = CategoricalKernel::new(vec![0.5, 0.25, 0.25], 200, None).unwrap();
        let x = gen_path(&k, 200, &InnovationStream::new(9)).unwrap();
        for row in x.row_iter() {
            assert_eq!(row.iter().sum::<f64>(), 0.0);
            assert!(row.iter().map(|v| v.abs()).sum::<f64>() <= 2.0);
        }
        let k = CategoricalKernel::uniform(7, 100).unwrap();
        let x = gen_path(&k, 100, &InnovationStream::new(1)).unwrap();
        for row in x.row_iter() {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn iid_gaussian_rows_look_standard_normal() {
        let k = LinearKernel::iid(2, 20_000, InnovationMap::Gaussian).unwrap();
        let x = gen_path(&k, 20_000, &InnovationStream::new(5)).unwrap();
        let n = 20_000.0;
        for c in 0..2 {
            let col: Vec<f64> = x.row_iter().map(|r| r[c]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let kurt = col.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n / (var * var);
            assert!(mean.abs() < 0.03);
            assert!((var - 1.0).abs() < 0.04);
            assert!((kurt - 3.0).abs() < 0.15);
        }
        let cross: f64 = x.row_iter().map(|r| r[0] * r[1]).sum::<f64>() / n;
        assert!(cross.abs() < 0.03);
    }

    #[test]
    fn ma1_uniform_lag_one_autocorrelation() {
        // brute-force: gamma(0) = 1 + 0.25, gamma(1) = 0.5, rho = 0.4
        let n = 100_000;
        let k = scalar_kernel(vec![1.0, 0.5], n, InnovationMap::Uniform);
        let x = gen_path(&k, n, &InnovationStream::new(11)).unwrap();
        let v: Vec<f64> = x.as_slice().to_vec();
        let mean = v.iter().sum::<f64>() / n as f64;
        let g0 = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
        let g1 = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / n as f64;
        assert!((g1 / g0 - 0.4).abs() < 0.02, "rho = {}", g1 / g0);
    }

    #[test]
    fn paths_are_deterministic() {
        let k = spec::demo::lipschitz(3, 300).build().unwrap();
        let a = gen_path(k.as_ref(), 300, &InnovationStream::new(77)).unwrap();
        let b = gen_path(k.as_ref(), 300, &InnovationStream::new(77)).unwrap();
        assert_eq!(a, b);
        let c = gen_path(k.as_ref(), 300, &InnovationStream::new(78)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn path_longer_than_horizon_is_rejected() {
        let k = LinearKernel::iid(1, 10, InnovationMap::Gaussian).unwrap();
        assert!(gen_path(&k, 11, &InnovationStream::new(0)).is_err());
    }

    #[test]
    fn theta_mc_zero_beyond_truncation() {
        let k = LinearKernel::iid(2, 10, InnovationMap::Gaussian).unwrap();
        assert_eq!(theta_mc(&k, 5, 1, 2.0, 2.0, 10, &InnovationStream::new(0)).unwrap(), 0.0);
        let k = scalar_kernel(vec![1.0, 0.5], 10, InnovationMap::Uniform);
        assert_eq!(theta_mc(&k, 5, 2, 4.0, 2.0, 10, &InnovationStream::new(0)).unwrap(), 0.0);
    }

    #[test]
    fn theta_mc_geometric_gaussian() {
        // a_j = rho^j: theta_{t,j,2,2} = rho^j sqrt(2)
        let rho: f64 = 0.6;
        let k = scalar_kernel((0..=5).map(|j| rho.powi(j)).collect(), 20, InnovationMap::Gaussian);
        for j in [0usize, 1, 3] {
            let est = theta_mc(&k, 10, j, 2.0, 2.0, 100_000, &InnovationStream::new(j as u64)).unwrap();
            let exact = rho.powi(j as i32) * 2f64.sqrt();
            assert!((est / exact - 1.0).abs() < 0.05, "j={j}: {est} vs {exact}");
            assert!((k.theta_analytic(10, j, 2.0) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_mc_matches_analytic_for_uniform_map() {
        let k = scalar_kernel(vec![1.0, -0.7], 20, InnovationMap::Uniform);
        let est = theta_mc(&k, 4, 1, 2.0, 2.0, 100_000, &InnovationStream::new(8)).unwrap();
        let exact = k.theta_analytic(4, 1, 2.0);
        assert!((est / exact - 1.0).abs() < 0.05);
    }

    #[test]
    fn theta_mc_categorical_fair_coin() {
        // enumerating the four outcome pairs gives E||X - X'||^2 = 1
        let k = CategoricalKernel::new(vec![0.5, 0.5], 5, None).unwrap();
        let est = theta_mc(&k, 1, 0, 2.0, 2.0, 100_000, &InnovationStream::new(4)).unwrap();
        assert!((est - 1.0).abs() < 0.02, "{est}");
        assert!((k.theta_exact(2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn theta_mc_validates_norm_orders() {
        let k = LinearKernel::iid(1, 10, InnovationMap::Gaussian).unwrap();
        let s = InnovationStream::new(0);
        assert!(theta_mc(&k, 1, 0, 4.0, 1.0, 10, &s).is_err());
        assert!(theta_mc(&k, 1, 0, 2.0, 4.0, 10, &s).is_err());
        assert!(theta_mc(&k, 1, 0, 4.0, 2.0, 0, &s).is_err());
    }

    #[test]
    fn theta_analytic_examples() {
        let k = scalar_kernel(vec![1.0, 0.0, 0.5], 5, InnovationMap::Gaussian);
        assert_eq!(theta_analytic(&k, 1, 1, 2.0), 0.0);
        assert!((theta_analytic(&k, 1, 2, 2.0) - 0.5 * 2f64.sqrt()).abs() < 1e-14);
        // (E (eta - eta')^4)^(1/4) = (3 * 2^2)^(1/4)
        assert!((theta_analytic(&k, 1, 0, 4.0) - 12f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn sigma_analytic_examples() {
        let k = scalar_kernel(vec![1.0, 0.5], 5, InnovationMap::Gaussian);
        // gamma(0) + 2 gamma(1) = 1.25 + 1.0
        assert!((sigma_analytic(&k, 3).get(0, 0) - 2.25).abs() < 1e-15);
        let k = LinearKernel::iid(3, 5, InnovationMap::Uniform).unwrap();
        assert_eq!(sigma_analytic(&k, 1), SymMat::identity(3));
        let k = scalar_kernel(vec![1.0, -1.0], 5, InnovationMap::Gaussian);
        assert_eq!(sigma_analytic(&k, 2).get(0, 0), 0.0);
    }

    #[test]
    fn stationary_sigma_is_time_invariant() {
        let k = spec::demo::ma1(3, 50).build_linear().unwrap();
        let s1 = k.sigma(1);
        for t in [2, 17, 50] {
            assert_eq!(k.sigma(t), s1);
        }
    }

    #[test]
    fn autocov_analytic_examples() {
        let k = scalar_kernel(vec![1.0, 0.5], 5, InnovationMap::Gaussian);
        assert_eq!(autocov_analytic(&k, 1, 2).frobenius(), 0.0);
        assert!((autocov_analytic(&k, 1, 1).get(0, 0) - 0.5).abs() < 1e-15);
        let k = LinearKernel::iid(4, 5, InnovationMap::Gaussian).unwrap();
        assert_eq!(autocov_analytic(&k, 3, 0), Matrix::identity(4));
    }

    #[test]
    fn autocov_trace_norm_obeys_decay_bound_for_demo_kernels() {
        for (name, spec) in spec::demo::all(3, 64) {
            let Ok(k) = spec.build_linear() else {
                continue;
            };
            let meta = *Kernel::meta(&k);
            for t in [1, 32, 33, 64] {
                for h in 0..=k.lag() {
                    let lhs = nuclear_norm(&k.autocov(t, h));
                    let rhs = meta.theta * meta.theta * decay_tail(h, meta.beta);
                    assert!(lhs <= rhs, "{name}: t={t} h={h} {lhs} > {rhs}");
                }
            }
        }
    }

    #[test]
    fn demo_kernels_satisfy_declared_inequalities() {
        for (name, spec) in spec::demo::all(4, 64) {
            let k = spec.build().unwrap();
            let meta = *k.meta();
            let s = InnovationStream::new(123);
            for t in [1, 40, 64] {
                for j in 0..=k.lag().min(3) {
                    let th = theta_mc(k.as_ref(), t, j, meta.q, 2.0, 20_000, &s).unwrap();
                    let bound = meta.theta * (j.max(1) as f64).powf(-meta.beta);
                    // Monte-Carlo slack of 5%
                    assert!(th <= 1.05 * bound, "{name}: t={t} j={j} {th} > {bound}");
                }
            }
            if let Some(lin) = k.as_linear() {
                for t in [1, 64] {
                    assert!(lin.moment_bound(t, meta.q) <= meta.theta * (1.0 + 1e-12), "{name}");
                }
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let s = InnovationStream::new(0);
        let k = LinearKernel::ma1(2, 100, 0.3, InnovationMap::Gaussian).unwrap();
        assert_eq!(gamma_tv(&k, 100, 10, &s).unwrap(), 1.0);

        let jump = LinearKernel::new(
            1,
            10,
            Schedule::Jump { before: CoefSet::Scalar(vec![1.0]), after: CoefSet::Scalar(vec![2.0]), at: 5 },
            InnovationMap::Gaussian,
            None,
        )
        .unwrap();
        assert!((jump.variation_sum(10) - 1.0).abs() < 1e-15);
        let meta = KernelMeta { theta: 0.25, beta: 3.0, q: 4.0, gamma: 1.0 };
        let jump = jump.with_meta(meta).unwrap();
        assert!((gamma_tv(&jump, 10, 1, &s).unwrap() - 4.0).abs() < 1e-12);

        let n = 200;
        let lip = LinearKernel::new(
            1,
            n,
            Schedule::Lipschitz { start: CoefSet::Scalar(vec![1.0]), end: CoefSet::Scalar(vec![2.0]) },
            InnovationMap::Gaussian,
            Some(KernelMeta { theta: 1.0, beta: 3.0, q: 4.0, gamma: 1.0 }),
        )
        .unwrap();
        // A_0(t) = 1 + t/n telescopes to (n - 1)/n
        assert!((lip.variation_sum(n) - (n as f64 - 1.0) / n as f64).abs() < 1e-12);
        assert_eq!(gamma_tv(&lip, n, 1, &s).unwrap(), 1.0);
    }

    #[test]
    fn gamma_mc_for_generic_kernel() {
        let k = CategoricalKernel::new(vec![0.3, 0.7], 50, None).unwrap();
        assert_eq!(gamma_tv(&k, 50, 100, &InnovationStream::new(2)).unwrap(), 1.0);
        let zero = CategoricalKernel::new(vec![1.0], 5, Some(KernelMeta { theta: 0.0, beta: 3.0, q: 4.0, gamma: 1.0 }))
            .unwrap();
        assert!(gamma_tv(&zero, 5, 1, &InnovationStream::new(0)).is_err());
    }

    #[test]
    fn surrogate_special_cases() {
        let s = InnovationStream::new(21);
        let iid = LinearKernel::iid(2, 40, InnovationMap::Gaussian).unwrap();
        assert_eq!(decoupled_surrogate(&iid, &[0, 10, 25, 40], &s).unwrap(), gen_path(&iid, 40, &s).unwrap());
        let ma = spec::demo::ma1(2, 40).build().unwrap();
        assert_eq!(decoupled_surrogate(ma.as_ref(), &[0, 40], &s).unwrap(), gen_path(ma.as_ref(), 40, &s).unwrap());
        let x = gen_path(ma.as_ref(), 40, &s).unwrap();
        let y = decoupled_surrogate(ma.as_ref(), &[0, 20, 40], &s).unwrap();
        // only the first row of the second block sees a replaced innovation
        for t in 0..40 {
            if t == 20 {
                assert_ne!(x.row(t), y.row(t));
            } else {
                assert_eq!(x.row(t), y.row(t));
            }
        }
        assert!(decoupled_surrogate(ma.as_ref(), &[0, 20, 20, 40], &s).is_err());
        assert!(decoupled_surrogate(ma.as_ref(), &[1, 40], &s).is_err());
    }

    #[test]
    fn decay_tail_matches_direct_sum() {
        // sum_{j>=1} j^-2 = pi^2/6
        assert!((decay_tail(1, 2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-10);
        assert!((decay_tail(0, 2.0) - 1.0 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-10);
        let direct: f64 = (3..2_000_000).map(|j| (j as f64).powi(-3)).sum();
        assert!((decay_tail(3, 3.0) - direct).abs() < 1e-11);
    }

    #[test]
    fn trace_norm_of_sigma_equals_trace() {
        let k = spec::demo::lipschitz(3, 100).build_linear().unwrap();
        for t in [1, 50, 100] {
            let s = k.sigma(t);
            assert!((trace_norm(&s) - s.trace()).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_spec_round_trip_and_validation() {
        let spec = spec::demo::jump(2, 100);
        let back = KernelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        let text = r#"{"type":"linear","d":2,"J":1,"n":10,
            "schedule":{"kind":"constant","coefficients":{"lags":[1.0]}}}"#;
        assert!(KernelSpec::from_json(text).unwrap().build().is_err());
        let text = r#"{"type":"linear","d":1,"J":2,"n":10,
            "schedule":{"kind":"constant","coefficients":{"ar":0.5}},
            "innovation":"uniform","theta_meta":{"Theta":3.0,"beta":0.5,"q":4}}"#;
        assert!(KernelSpec::from_json(text).unwrap().build().is_err());
        let text = r#"{"type":"linear","d":2,"J":0,"n":10,
            "schedule":{"kind":"constant","coefficients":{"matrices":[[[1,0,0],[0,1,1]]]}}}"#;
        let k = KernelSpec::from_json(text).unwrap().build_linear().unwrap();
        assert_eq!(k.innovation_dim(), 3);
        assert!((k.sigma(1).get(1, 1) - 2.0).abs() < 1e-15);
    }
}
