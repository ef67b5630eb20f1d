//! Linear MMSE decoding of one user among interferers.
//!
//! Everything on the other users plus noise is lumped into
//! `χ ~ CN(0, K_χ)` with `K_χ = (σ_N² + σ_γ²) I + Σ_{j≠k} P_j h_j h_j†`.
//! Whitening by `K_χ^{-1/2}` turns the problem into a white-noise channel, the
//! matched filter there is `c = K_χ⁻¹ h_k`, and the MMSE estimate of `z_k` is
//! `ẑ = P/(1 + P q) · h_k† K_χ⁻¹ y` with `q = h_k† K_χ⁻¹ h_k`.
//!
//! Variances here are total complex variances: `P_j = E|z_j|²` and the noise
//! covariance is `σ² I` with `σ² = E|n_i|²`.

use crate::error::{invalid, Error, Result};
use crate::linalg::{inner, norm_sqr, outer, psd_power, rank_one_update_inverse, CMatrix, C64};
use crate::rng;
use crate::stats::{mean_se, par_trials, Estimate};

#[derive(Debug, Clone)]
pub struct DecoderState {
    pub k_chi: CMatrix,
    pub k_chi_inv: CMatrix,
    /// `K_χ^{-1/2}`.
    pub whitener: CMatrix,
    /// `c = K_χ⁻¹ h_k`.
    pub filter: Vec<C64>,
    pub h: Vec<C64>,
    /// `P_k = E|z_k|²`.
    pub power: f64,
    pub user: usize,
}

/// `K_χ` for target user `k`.
pub fn interference_covariance(
    h: &[Vec<C64>],
    powers: &[f64],
    noise_var: f64,
    k: usize,
) -> Result<CMatrix> {
    if h.is_empty() || h.len() != powers.len() || k >= h.len() {
        return Err(invalid("need one power per user and a valid target index"));
    }
    let dim = h[0].len();
    if h.iter().any(|v| v.len() != dim) {
        return Err(invalid("user channel vectors must share one dimension"));
    }
    let mut kc = CMatrix::from_real_diag(&vec![noise_var; dim]);
    for (j, (hj, &pj)) in h.iter().zip(powers).enumerate() {
        if j != k {
            kc = kc.add(&outer(hj, hj).scale_real(pj));
        }
    }
    Ok(kc)
}

/// `noise_var` is `σ_N² + σ_γ²` as a total complex variance.
pub fn build_decoder(h: &[Vec<C64>], powers: &[f64], noise_var: f64, k: usize) -> Result<DecoderState> {
    let k_chi = interference_covariance(h, powers, noise_var, k)?;
    let k_chi_inv = k_chi.inverse()?;
    let whitener = psd_power(&k_chi, -0.5).map_err(|_| {
        Error::RankDeficient("interference-plus-noise covariance is singular".into())
    })?;
    let filter = k_chi_inv.mul_vec(&h[k]);
    Ok(DecoderState {
        k_chi,
        k_chi_inv,
        whitener,
        filter,
        h: h[k].clone(),
        power: powers[k],
        user: k,
    })
}

impl DecoderState {
    /// `q = h† K_χ⁻¹ h`.
    pub fn quadratic_form(&self) -> f64 {
        inner(&self.h, &self.filter).re
    }

    /// `P_k h† K_χ⁻¹ h`.
    pub fn snir(&self) -> f64 {
        self.power * self.quadratic_form()
    }

    /// SNIR for a supplied variance in place of `P_k`.
    pub fn snir_with(&self, sigma_dprime_sq: f64) -> f64 {
        sigma_dprime_sq * self.quadratic_form()
    }

    /// SNIR delivered by an arbitrary linear filter `w`:
    /// `P |w† h|² / (w† K_χ w)`.
    pub fn filter_snir(&self, w: &[C64]) -> f64 {
        let num = self.power * inner(w, &self.h).norm_sqr();
        let den = inner(w, &self.k_chi.mul_vec(w)).re;
        num / den
    }

    /// `(ẑ, mse)` with mse the theoretical `P/(1 + P q)`.
    pub fn estimate(&self, y: &[C64]) -> (C64, f64) {
        let q = self.quadratic_form();
        let a = self.power / (1.0 + self.power * q);
        (inner(&self.filter, y) * a, self.mse())
    }

    pub fn mse(&self) -> f64 {
        self.power / (1.0 + self.snir())
    }

    pub fn rate_bits(&self) -> f64 {
        (1.0 + self.snir()).log2()
    }
}

/// SNIR of the averaged eigenchannel form `(σ_ω²/n_min)/(σ_N² + σ_γ²)`.
pub fn averaged_snir(sigma_omega_sq: f64, n_min: usize, sigma_n_sq: f64, sigma_gamma_sq: f64) -> f64 {
    sigma_omega_sq / n_min as f64 / (sigma_n_sq + sigma_gamma_sq)
}

/// Monte Carlo MSE of the estimator together with the orthogonality statistic
/// `E[(z − ẑ) conj(ẑ)]` (real and imaginary parts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseCheck {
    pub mse: Estimate,
    pub theory: f64,
    pub orth_re: Estimate,
    pub orth_im: Estimate,
}

pub fn monte_carlo_mse(
    dec: &DecoderState,
    h: &[Vec<C64>],
    powers: &[f64],
    noise_var: f64,
    trials: usize,
    seed: u64,
) -> MseCheck {
    let dim = dec.h.len();
    let rows = par_trials(trials, seed, |r, _| {
        let z: Vec<C64> = powers
            .iter()
            .map(|&p| rng::complex_gaussian(r, p / 2.0))
            .collect();
        let mut y = rng::complex_gaussian_vec(r, noise_var / 2.0, dim);
        for (hj, zj) in h.iter().zip(&z) {
            for (acc, x) in y.iter_mut().zip(hj) {
                *acc += x * zj;
            }
        }
        let (zh, _) = dec.estimate(&y);
        let e = z[dec.user] - zh;
        (e.norm_sqr(), e * zh.conj())
    });
    let mse: Vec<f64> = rows.iter().map(|x| x.0).collect();
    let ore: Vec<f64> = rows.iter().map(|x| x.1.re).collect();
    let oim: Vec<f64> = rows.iter().map(|x| x.1.im).collect();
    MseCheck {
        mse: mean_se(&mse),
        theory: dec.mse(),
        orth_re: mean_se(&ore),
        orth_im: mean_se(&oim),
    }
}

/// Gaussian mutual information of `z_k` with the full observation and with
/// the scalar `w† y`, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficiencyReport {
    pub full: f64,
    pub projected: f64,
}

/// `I(z_k; y) = log2 det(K_χ + P h h†) − log2 det K_χ`;
/// `I(z_k; w†y) = log2(1 + P|w†h|²/(w†K_χ w))`.
pub fn sufficient_statistic_check(dec: &DecoderState, w: Option<&[C64]>) -> Result<SufficiencyReport> {
    let with = dec.k_chi.add(&outer(&dec.h, &dec.h).scale_real(dec.power));
    let full = with.log2_det_hpd()? - dec.k_chi.log2_det_hpd()?;
    let w = w.unwrap_or(&dec.filter);
    Ok(SufficiencyReport {
        full,
        projected: (1.0 + dec.filter_snir(w)).log2(),
    })
}

/// One decoding step of successive cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRate {
    pub user: usize,
    pub order_index: usize,
    pub snir: f64,
    pub mse: f64,
    pub rate_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRuleReport {
    pub users: Vec<UserRate>,
    pub sum_rate: f64,
    /// `log2 det(I + Σ P_j h_j h_j† / σ²)`.
    pub joint: f64,
}

/// Successive cancellation in `order`: each user is decoded against the
/// users not yet decoded, then subtracted.
pub fn chain_rule_rate(
    h: &[Vec<C64>],
    powers: &[f64],
    noise_var: f64,
    order: &[usize],
) -> Result<ChainRuleReport> {
    let n = h.len();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&u| u >= n || std::mem::replace(&mut seen[u], true)) {
        return Err(invalid("decoding order must be a permutation of the users"));
    }
    let mut users = Vec::with_capacity(n);
    for (pos, &u) in order.iter().enumerate() {
        let remaining: Vec<usize> = order[pos..].to_vec();
        let sub_h: Vec<Vec<C64>> = remaining.iter().map(|&j| h[j].clone()).collect();
        let sub_p: Vec<f64> = remaining.iter().map(|&j| powers[j]).collect();
        let dec = build_decoder(&sub_h, &sub_p, noise_var, 0)?;
        users.push(UserRate {
            user: u,
            order_index: pos,
            snir: dec.snir(),
            mse: dec.mse(),
            rate_bits: dec.rate_bits(),
        });
    }
    let dim = h[0].len();
    let mut g = CMatrix::identity(dim);
    for (hj, &pj) in h.iter().zip(powers) {
        g = g.add(&outer(hj, hj).scale_real(pj / noise_var));
    }
    let joint = g.log2_det_hpd()?;
    Ok(ChainRuleReport {
        sum_rate: users.iter().map(|u| u.rate_bits).sum(),
        users,
        joint,
    })
}

/// Largest entrywise gap between the Sherman-Morrison update and a direct
/// inverse of `K + x x†`.
pub fn sherman_morrison_gap(k: &CMatrix, x: &[C64]) -> Result<f64> {
    let direct = k.add(&outer(x, x)).inverse()?;
    let updated = rank_one_update_inverse(&k.inverse()?, x);
    Ok(direct.max_abs_diff(&updated) / direct.frobenius_norm().max(1.0))
}

/// Empirical covariance of `K_χ^{-1/2} χ` over `trials` draws; should be `I`.
pub fn whitened_covariance(dec: &DecoderState, trials: usize, seed: u64) -> Result<CMatrix> {
    let root = crate::phase_space::covariance_root(&dec.k_chi)?;
    let dim = dec.h.len();
    let vs = par_trials(trials, seed, |r, _| {
        let w = rng::complex_gaussian_vec(r, 0.5, dim);
        dec.whitener.mul_vec(&root.mul_vec(&w))
    });
    let mut acc = CMatrix::zeros(dim, dim);
    for v in &vs {
        acc = acc.add(&outer(v, v));
    }
    Ok(acc.scale_real(1.0 / trials as f64))
}

/// `‖h‖²`, handy for scalar checks.
pub fn channel_gain(h: &[C64]) -> f64 {
    norm_sqr(h)
}
