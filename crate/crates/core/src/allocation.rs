//! Constant modulation-variance allocation over eigenchannels and the
//! capacity formulas built on it.
//!
//! Two noise coefficients drive everything:
//! `ν_min = σ_N²/max|F(T)_i|²` for the best physical sub-channel and
//! `ν'_min = σ_N²/max λ_i²` for the best eigenchannel. Their gap
//! `Π = ν_min − ν'_min` is the variance gained by going through the singular
//! layer. The per-sub-channel variance is `σ''² = ν_Eve − ν'_min`, the
//! eigenchannel total is `σ_ω² = σ''²/(1+c)` split evenly as
//! `σ'²_i = σ_ω²/n_min`, and the water level is `μ = σ'²_i + ν'_min`.
//!
//! `σ_ω²` also names the plain multicarrier baseline's per-sub-channel
//! variance `ν_Eve − ν_min`. The plan keeps that value separately as
//! `sigma_omega_sub_sq`, which is what makes `σ''² − σ_ω² = Π` hold.

use std::f64::consts::LOG2_E;

use crate::channel::ChannelModel;
use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::rng::SimRng;
use crate::singular_layer::SvdLayer;
use crate::stats::par_trials;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationParams {
    /// `c > 0` in `σ''² = (1+c) σ_ω²`.
    pub c: f64,
    /// Nonideal-modulation correction `ν_κ`; zero for ideal Gaussian modulation.
    pub nu_kappa: f64,
}

impl Default for AllocationParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            nu_kappa: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    pub n_min: usize,
    pub l: usize,
    pub sigma_n_sq: f64,
    pub nu_eve: f64,
    pub c: f64,
    pub lambda_max_sq: f64,
    pub ft_max_sq: f64,
    pub nu_min: f64,
    pub nu_prime_min: f64,
    pub pi_term: f64,
    /// `σ''²`, constant variance per good sub-channel.
    pub sigma_dprime_sq: f64,
    /// Eigenchannel total `σ_ω² = Σ σ'²_i`.
    pub sigma_omega_sq: f64,
    /// Baseline per-sub-channel variance `ν_Eve − ν_min` (may be negative when
    /// no physical sub-channel beats Eve).
    pub sigma_omega_sub_sq: f64,
    pub sigma_prime_sq: Vec<f64>,
    pub mu: f64,
    pub nu_kappa: f64,
    /// `ν'_κ = ν_κ − Π`, present only when the correction applies (`Π < ν_κ`).
    pub nu_kappa_prime: Option<f64>,
}

/// Allocation from the two channel maxima alone.
pub fn allocate_from(
    lambda_max_sq: f64,
    ft_max_sq: f64,
    n_min: usize,
    l: usize,
    sigma_n_sq: f64,
    nu_eve: f64,
    params: AllocationParams,
) -> Result<AllocationPlan> {
    if !(params.c > 0.0) {
        return Err(invalid(format!("c must be positive, got {}", params.c)));
    }
    if n_min == 0 {
        return Err(invalid("n_min must be at least 1"));
    }
    if !(sigma_n_sq > 0.0) {
        return Err(invalid("noise variance must be positive for allocation"));
    }
    if !(lambda_max_sq > 0.0) {
        return Err(Error::InfeasibleAllocation {
            nu_eve,
            nu_prime_min: f64::INFINITY,
        });
    }
    let nu_prime_min = sigma_n_sq / lambda_max_sq;
    if nu_eve <= nu_prime_min {
        return Err(Error::InfeasibleAllocation {
            nu_eve,
            nu_prime_min,
        });
    }
    let nu_min = if ft_max_sq > 0.0 {
        sigma_n_sq / ft_max_sq
    } else {
        f64::INFINITY
    };
    let pi_term = nu_min - nu_prime_min;
    let sigma_dprime_sq = nu_eve - nu_prime_min;
    let sigma_omega_sq = sigma_dprime_sq / (1.0 + params.c);
    let nm = n_min as f64;
    let mu = (nu_eve + (nm * (1.0 + params.c) - 1.0) * nu_prime_min) / (nm * (1.0 + params.c));
    let per = sigma_omega_sq / nm;
    let nu_kappa_prime = (pi_term < params.nu_kappa).then_some(params.nu_kappa - pi_term);
    Ok(AllocationPlan {
        n_min,
        l,
        sigma_n_sq,
        nu_eve,
        c: params.c,
        lambda_max_sq,
        ft_max_sq,
        nu_min,
        nu_prime_min,
        pi_term,
        sigma_dprime_sq,
        sigma_omega_sq,
        sigma_omega_sub_sq: nu_eve - nu_min,
        sigma_prime_sq: vec![per; n_min],
        mu,
        nu_kappa: params.nu_kappa,
        nu_kappa_prime,
    })
}

/// Allocation for a channel and the SVD of its transfer matrix.
pub fn allocate(layer: &SvdLayer, ch: &ChannelModel, params: AllocationParams) -> Result<AllocationPlan> {
    let ft_max_sq = ch.ft().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    allocate_from(
        layer.lambda_max_sq(),
        ft_max_sq,
        layer.n_min,
        ch.l(),
        ch.sigma_n_sq(),
        ch.nu_eve(),
        params,
    )
}

impl AllocationPlan {
    /// `μ − ν'_min`, which the water level is built to equal `σ_ω²/n_min`.
    pub fn water_level_variance(&self) -> f64 {
        self.mu - self.nu_prime_min
    }
}

/// `Σ log2(1 + σ_ω² λ_i² / (n_min (σ_N² + σ_γ²)))`.
pub fn eigen_capacity(lambdas: &[f64], sigma_omega_sq: f64, sigma_n_sq: f64, sigma_gamma_sq: f64) -> f64 {
    let n = lambdas.len() as f64;
    lambdas
        .iter()
        .map(|l| (1.0 + sigma_omega_sq * l * l / (n * (sigma_n_sq + sigma_gamma_sq))).log2())
        .sum()
}

pub fn capacity_eigen(plan: &AllocationPlan, layer: &SvdLayer, sigma_gamma_sq: f64) -> f64 {
    eigen_capacity(
        &layer.gamma[..plan.n_min.min(layer.gamma.len())],
        plan.sigma_omega_sq,
        plan.sigma_n_sq,
        sigma_gamma_sq,
    )
}

/// `log2 det(I + F K_s F† / σ_N²)`.
pub fn log_det_capacity(ft: &CMatrix, k_s: &CMatrix, sigma_n_sq: f64) -> Result<f64> {
    let g = ft.matmul(k_s).matmul(&ft.adjoint()).scale_real(1.0 / sigma_n_sq);
    CMatrix::identity(ft.rows()).add(&g).log2_det_hpd()
}

/// `Σ_good log2(1 + σ''² |F(T)_i|² / (σ_N² + σ_γ²))`.
pub fn subchannel_capacity(ch: &ChannelModel, sigma_dprime_sq: f64, sigma_gamma_sq: f64) -> f64 {
    let den = ch.sigma_n_sq() + sigma_gamma_sq;
    ch.good_ft()
        .iter()
        .map(|f| (1.0 + sigma_dprime_sq * f.norm_sqr() / den).log2())
        .sum()
}

pub fn capacity_subchannels(plan: &AllocationPlan, ch: &ChannelModel) -> f64 {
    subchannel_capacity(ch, plan.sigma_dprime_sq, 0.0)
}

/// Form with the interference variance added to the noise.
pub fn capacity_subchannels_with_interference(
    plan: &AllocationPlan,
    ch: &ChannelModel,
    sigma_gamma_sq: f64,
) -> f64 {
    subchannel_capacity(ch, plan.sigma_dprime_sq, sigma_gamma_sq)
}

/// First-order rates valid when `σ'²/σ_N² ≪ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowSnrRate {
    /// `n_min · max λ² · log2 e · σ'²/σ_N²`.
    pub eigen: f64,
    /// `Σ_good |F(T)_i|² · log2 e · σ'²/σ_N²` at the same per-channel SNR.
    pub amqd: f64,
}

pub fn low_snr_rate(layer: &SvdLayer, ch: &ChannelModel, plan: &AllocationPlan) -> LowSnrRate {
    let snr = plan.sigma_prime_sq.first().copied().unwrap_or(0.0) / plan.sigma_n_sq;
    low_snr_rate_at(layer, &ch.good_ft().iter().map(|z| z.norm_sqr()).collect::<Vec<_>>(), snr)
}

pub fn low_snr_rate_at(layer: &SvdLayer, ft_sq: &[f64], snr: f64) -> LowSnrRate {
    LowSnrRate {
        eigen: layer.n_min as f64 * layer.lambda_max_sq() * LOG2_E * snr,
        amqd: ft_sq.iter().sum::<f64>() * LOG2_E * snr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxProbabilityRate {
    /// Fraction of draws attaining the maximum.
    pub p: f64,
    pub p_se: f64,
    /// The maximum itself.
    pub max: f64,
    /// `p log2(1 + SNR · max / p)`.
    pub rate: f64,
}

/// Relative tolerance for "attains the maximum".
pub const MAX_HIT_TOL: f64 = 1e-9;

/// Estimates how often a channel draw attains its best-case gain.
///
/// `draw` returns `(value, candidate)`: the per-draw gain and the quantity
/// whose maximum over all draws defines the target. For the sub-channel mode
/// both are `Σ|F(T)_i|²`; for the eigen mode the value is `Σ λ_i²` and the
/// candidate `n_min max λ_i²`.
pub fn max_probability_rate<F>(draw: F, snr: f64, n_draws: usize, seed: u64) -> Result<MaxProbabilityRate>
where
    F: Fn(&mut SimRng) -> (f64, f64) + Sync,
{
    if n_draws == 0 {
        return Err(invalid("need at least one channel draw"));
    }
    let samples = par_trials(n_draws, seed, |r, _| draw(r));
    let max = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let hits = samples
        .iter()
        .filter(|s| (s.0 - max).abs() <= MAX_HIT_TOL * max.abs().max(f64::MIN_POSITIVE))
        .count();
    let n = n_draws as f64;
    let p = hits as f64 / n;
    let rate = if p > 0.0 {
        p * (1.0 + snr * max / p).log2()
    } else {
        0.0
    };
    Ok(MaxProbabilityRate {
        p,
        p_se: (p * (1.0 - p) / n).sqrt(),
        max,
        rate,
    })
}

/// Sub-channel mode draw for a fixed channel model.
pub fn subchannel_gain(ch: &ChannelModel) -> f64 {
    ch.good_ft().iter().map(|z| z.norm_sqr()).sum()
}

/// Eigen mode draw `(Σ λ², n_min max λ²)`.
pub fn eigen_gain(layer: &SvdLayer) -> (f64, f64) {
    let s: f64 = layer.gamma.iter().map(|l| l * l).sum();
    (s, layer.n_min as f64 * layer.lambda_max_sq())
}
