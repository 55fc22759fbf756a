use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::Matrix;

/// Sup-type statistic of the scaled partial-sum path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    /// `max_k ||n^{-1/2} sum_{t<=k} X_t||`.
    Seq,
    /// `max_k n^{-1/2} ||sum_{t<=k} X_t - (k/n) sum_{t<=n} X_t||`.
    Cusum,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Seq => "seq",
            Statistic::Cusum => "cusum",
        }
    }

    pub fn eval(self, x: &Matrix) -> f64 {
        match self {
            Statistic::Seq => stat_seq(x),
            Statistic::Cusum => stat_cusum(x),
        }
    }

    /// Same statistic from the partial sums `S_1..S_n` (row `k - 1` = `S_k`).
    pub fn from_partial_sums(self, sums: &[f64], n: usize, d: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let scale = 1.0 / (n as f64).sqrt();
        let total = &sums[(n - 1) * d..n * d];
        let mut best = 0.0f64;
        for k in 1..=n {
            let s = &sums[(k - 1) * d..k * d];
            let sq: f64 = match self {
                Statistic::Seq => s.iter().map(|v| v * v).sum(),
                Statistic::Cusum => {
                    let f = k as f64 / n as f64;
                    s.iter().zip(total).map(|(a, b)| (a - f * b).powi(2)).sum()
                }
            };
            best = best.max(sq);
        }
        best.sqrt() * scale
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq" => Ok(Statistic::Seq),
            "cusum" => Ok(Statistic::Cusum),
            other => Err(Error::invalid(format!("unknown statistic '{other}'"))),
        }
    }
}

fn partial_sums(x: &Matrix) -> Vec<f64> {
    let d = x.cols();
    let mut out = x.as_slice().to_vec();
    for k in 1..x.rows() {
        let (done, rest) = out.split_at_mut(k * d);
        for (v, p) in rest[..d].iter_mut().zip(&done[(k - 1) * d..]) {
            *v += p;
        }
    }
    out
}

pub fn stat_seq(x: &Matrix) -> f64 {
    Statistic::Seq.from_partial_sums(&partial_sums(x), x.rows(), x.cols())
}

pub fn stat_cusum(x: &Matrix) -> f64 {
    Statistic::Cusum.from_partial_sums(&partial_sums(x), x.rows(), x.cols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(stat_seq(&Matrix::zeros(4, 3)), 0.0);
        assert_eq!(stat_seq(&m(&[&[3.0]])), 3.0);
        assert!((stat_seq(&m(&[&[1.0], &[-2.0]])) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(stat_cusum(&m(&[&[2.0, 1.0], &[2.0, 1.0], &[2.0, 1.0]])), 0.0);
        assert!((stat_cusum(&m(&[&[1.0], &[-1.0]])) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!("cusum".parse::<Statistic>().unwrap(), Statistic::Cusum);
        assert!("max".parse::<Statistic>().is_err());
    }

    #[test]
    fn cusum_needs_lipschitz_two() {
        // partial sums (1, -1): residual at k = 1 is 1.5, sup of |S_k| is 1
        let x = m(&[&[1.0], &[-2.0]]);
        let zero = Matrix::zeros(2, 1);
        let gap = stat_cusum(&x) - stat_cusum(&zero);
        assert!(gap > stat_seq(&x));
        assert!(gap <= 2.0 * stat_seq(&x));
    }

    fn data(n: usize, d: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-5.0f64..5.0, n * d).prop_map(move |v| Matrix::from_vec(n, d, v).unwrap())
    }

    proptest! {
        #[test]
        fn seq_homogeneous(x in data(30, 3), c in -3.0f64..3.0) {
            let a = stat_seq(&x.scale(c));
            let b = c.abs() * stat_seq(&x);
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }

        #[test]
        fn cusum_shift_invariant(x in data(25, 2), c in prop::collection::vec(-10.0f64..10.0, 2)) {
            let mut shifted = x.clone();
            for t in 0..25 {
                for i in 0..2 {
                    shifted.set(t, i, x.get(t, i) + c[i]);
                }
            }
            prop_assert!((stat_cusum(&shifted) - stat_cusum(&x)).abs() < 1e-10);
        }

        #[test]
        fn cusum_below_twice_seq(x in data(40, 4)) {
            prop_assert!(stat_cusum(&x) <= 2.0 * stat_seq(&x) + 1e-12);
        }

        #[test]
        fn lipschitz_in_partial_sums(x in data(20, 3), y in data(20, 3)) {
            let diff = x.sub(&y);
            let bound = stat_seq(&diff);
            for s in [Statistic::Seq, Statistic::Cusum] {
                let gap = (s.eval(&x) - s.eval(&y)).abs();
                let b = if s == Statistic::Seq { bound } else { 2.0 * bound };
                prop_assert!(gap <= b + 1e-10);
            }
        }
    }
}
