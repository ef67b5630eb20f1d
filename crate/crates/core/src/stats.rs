//! Monte Carlo estimators and special functions.

use rayon::prelude::*;
use libm::erfc;

use crate::rng::{self, SimRng};

/// Point estimate with its standard error `std / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            se: 0.0,
            n: 1,
        }
    }

    /// True when `target` lies within `k` standard errors (plus `abs_slack`).
    pub fn within(&self, target: f64, k: f64, abs_slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + abs_slack
    }
}

/// Pairwise summation, stable and independent of thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            se: f64::NAN,
            n: 0,
        };
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return Estimate { mean, se: 0.0, n };
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    Estimate {
        mean,
        se: (var / n as f64).sqrt(),
        n,
    }
}

/// Ratio of means `E[a]/E[b]` with a delta-method standard error.
pub fn ratio_of_means(a: &[f64], b: &[f64]) -> Estimate {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ea = mean_se(a);
    let eb = mean_se(b);
    let r = ea.mean / eb.mean;
    // Linearized residuals a - r b carry the first-order variance of the ratio.
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - r * y).collect();
    let er = mean_se(&resid);
    Estimate {
        mean: r,
        se: er.se / eb.mean.abs(),
        n,
    }
}

/// Runs `f` once per trial on its own RNG stream and returns the outputs in
/// trial order.
pub fn par_trials<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            f(&mut r, i)
        })
        .collect()
}

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}
