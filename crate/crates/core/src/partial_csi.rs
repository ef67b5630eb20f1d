//! Capacity when the encoder only knows channel statistics.
//!
//! The transmitter builds `S(F(T))`, the elementwise mean of observed channel
//! matrices, and takes the input unitary `Q = ξ_in` from its SVD. With the
//! isotropic optimum `℘ = σ'²/K_in · I` the input covariance
//! `K_s = ξ_in ℘ ξ_in†` does not depend on `Q` at all, so the achievable rate
//! is `E[log2 det(I + σ'²/(σ_N² K_in) F F†)]` averaged over channel draws.

use std::f64::consts::LOG2_E;

use crate::allocation::log_det_capacity;
use crate::error::{invalid, Result};
use crate::linalg::{singular_values, CMatrix, Svd};
use crate::rng::{self, SimRng};
use crate::singular_layer::SvdLayer;
use crate::stats::{mean_se, par_trials, Estimate};

/// `‖S‖_F` below this fraction of the mean sample norm marks the mean as
/// cancelled out.
pub const DEGENERATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct StatChannelModel {
    /// `S(F(T))`.
    pub mean: CMatrix,
    pub xi_out: CMatrix,
    pub gamma: Vec<f64>,
    /// `ξ_in`, used as the pre-unitary `Q`.
    pub xi_in: CMatrix,
    /// `E[F F†]`.
    pub mean_gram: CMatrix,
    pub degenerate: bool,
    pub samples: usize,
}

pub fn build_statistical_model(samples: &[CMatrix]) -> Result<StatChannelModel> {
    let first = samples
        .first()
        .ok_or_else(|| invalid("statistical model needs at least one sample"))?;
    let shape = first.shape();
    if samples.iter().any(|s| s.shape() != shape) {
        return Err(invalid("channel samples must share one shape"));
    }
    if shape.1 > shape.0 {
        return Err(invalid("channel samples must have K_in <= K_out"));
    }
    let n = samples.len() as f64;
    let mut mean = CMatrix::zeros(shape.0, shape.1);
    let mut gram = CMatrix::zeros(shape.0, shape.0);
    let mut norm_sum = 0.0;
    for s in samples {
        mean = mean.add(s);
        gram = gram.add(&s.matmul(&s.adjoint()));
        norm_sum += s.frobenius_norm();
    }
    let mean = mean.scale_real(1.0 / n);
    let mean_gram = gram.scale_real(1.0 / n);
    let degenerate = mean.frobenius_norm() <= DEGENERATE_TOL * (norm_sum / n);
    let svd = Svd::compute(&mean)?;
    Ok(StatChannelModel {
        mean,
        xi_out: svd.u,
        gamma: svd.singular_values,
        xi_in: svd.v,
        mean_gram,
        degenerate,
        samples: samples.len(),
    })
}

impl StatChannelModel {
    pub fn k_in(&self) -> usize {
        self.xi_in.rows()
    }

    pub fn k_out(&self) -> usize {
        self.xi_out.rows()
    }

    /// The mean model as a singular layer for encoder/decoder factors.
    pub fn as_layer(&self) -> SvdLayer {
        SvdLayer {
            u2: self.xi_out.clone(),
            gamma: self.gamma.clone(),
            f1_inv: self.xi_in.adjoint(),
            n_min: self.k_in(),
        }
    }

    /// `℘ = σ'²/K_in · I`.
    pub fn wp(&self, sigma_prime_sq: f64) -> CMatrix {
        CMatrix::from_real_diag(&vec![sigma_prime_sq / self.k_in() as f64; self.k_in()])
    }

    /// `K_s = ξ_in ℘ ξ_in†`.
    pub fn input_covariance(&self, sigma_prime_sq: f64) -> CMatrix {
        self.xi_in
            .matmul(&self.wp(sigma_prime_sq))
            .matmul(&self.xi_in.adjoint())
    }
}

/// Monte Carlo `E[log2 det(I + F K_s F†/σ_N²)]` over channel draws.
pub fn capacity_partial_csi<F>(
    k_s: &CMatrix,
    sampler: F,
    sigma_n_sq: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Estimate>
where
    F: Fn(&mut SimRng) -> CMatrix + Sync,
{
    if n_trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let vals: Vec<Result<f64>> =
        par_trials(n_trials, seed, |r, _| log_det_capacity(&sampler(r), k_s, sigma_n_sq));
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    Ok(mean_se(&vals))
}

/// Both sides of the Jensen bound
/// `Σ E[log2(1 + a λ_i²)] ≤ n_min E[log2(1 + a mean(λ²))]`
/// with `a = σ'²/(K_in n_min σ_N²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenGap {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// Per-draw `rhs − lhs`, nonnegative draw by draw.
    pub gap: Estimate,
}

pub fn jensen_gap<F>(
    sampler: F,
    sigma_prime_sq: f64,
    sigma_n_sq: f64,
    k_in: usize,
    n_min: usize,
    n_trials: usize,
    seed: u64,
) -> Result<JensenGap>
where
    F: Fn(&mut SimRng) -> CMatrix + Sync,
{
    if n_trials == 0 || k_in == 0 || n_min == 0 {
        return Err(invalid("jensen_gap needs positive trials and dimensions"));
    }
    let a = sigma_prime_sq / (k_in as f64 * n_min as f64 * sigma_n_sq);
    let pairs: Vec<Result<(f64, f64)>> = par_trials(n_trials, seed, |r, _| {
        let sv = singular_values(&sampler(r))?;
        let l2: Vec<f64> = sv.iter().take(n_min).map(|s| s * s).collect();
        let lhs: f64 = l2.iter().map(|x| (a * x).ln_1p()).sum::<f64>() * LOG2_E;
        let avg = l2.iter().sum::<f64>() / n_min as f64;
        let rhs = n_min as f64 * (a * avg).ln_1p() * LOG2_E;
        Ok((lhs, rhs))
    });
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_>>()?;
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let gap: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    Ok(JensenGap {
        lhs: mean_se(&lhs),
        rhs: mean_se(&rhs),
        gap: mean_se(&gap),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowSnrPartial {
    /// `K_out (1/n_min)(σ'²/σ_N²) log2 e`.
    pub closed_form: f64,
    /// `σ'²/(K_in σ_N²) · E[Tr F F†] · log2 e`, the first-order expansion of
    /// the isotropic log-det for a given mean trace.
    pub trace_form: f64,
}

pub fn low_snr_partial_capacity(
    k_in: usize,
    k_out: usize,
    sigma_prime_sq: f64,
    sigma_n_sq: f64,
    trace_ffdagger: f64,
) -> LowSnrPartial {
    let n_min = k_in.min(k_out) as f64;
    let snr = sigma_prime_sq / sigma_n_sq;
    LowSnrPartial {
        closed_form: k_out as f64 / n_min * snr * LOG2_E,
        trace_form: snr / k_in as f64 * trace_ffdagger * LOG2_E,
    }
}

/// Rayleigh ensemble with `E|F_ij|² = 1/K_in`, so `E[Tr F F†] = K_out`.
pub fn rayleigh_sampler(k_out: usize, k_in: usize) -> impl Fn(&mut SimRng) -> CMatrix + Sync {
    move |r| rng::complex_gaussian_matrix(r, k_out, k_in, 1.0 / k_in as f64)
}

/// Fixed mean plus Gaussian perturbation of Frobenius scale `eps`.
pub fn perturbed_sampler(f0: CMatrix, eps: f64) -> impl Fn(&mut SimRng) -> CMatrix + Sync {
    move |r| {
        let (m, n) = f0.shape();
        let e = rng::complex_gaussian_matrix(r, m, n, eps * eps / (m * n) as f64);
        f0.add(&e)
    }
}
