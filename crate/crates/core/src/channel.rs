//! The multicarrier Gaussian link.
//!
//! `n` sub-channels carry complex transmittances `T_i` with `Re T_i = Im T_i`
//! in `[0, 1/√2]`. The receiver sees the Fourier-domain coefficients
//! `F(T)_i`, and sub-channel `i` is usable when its noise coefficient
//! `ν_i = σ_N²/|F(T)_i|²` sits below Eve's reference level `ν_Eve`.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::{CMatrix, C64};
use crate::phase_space::{fft, ifft};
use crate::rng;

/// How the transmittance vector is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum TransmittanceSpec {
    Explicit(Vec<C64>),
    /// `T_i = a_i (1 + i)` with `a_i` uniform in `[0, 1/√2)`.
    Uniform { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    transmittances: Vec<C64>,
    ft: Vec<C64>,
    sigma_n_sq: f64,
    nu_eve: f64,
    good_set: Vec<usize>,
}

const SLOPE_TOL: f64 = 1e-12;

fn check_transmittance(i: usize, t: C64) -> Result<()> {
    let upper = FRAC_1_SQRT_2 * (1.0 + SLOPE_TOL);
    if !(t.re >= 0.0 && t.im >= 0.0 && t.re <= upper && t.im <= upper) {
        return Err(invalid(format!(
            "transmittance {i} = {t} outside [0, 1/sqrt 2]^2"
        )));
    }
    if (t.re - t.im).abs() > SLOPE_TOL * t.re.abs().max(1.0) {
        return Err(invalid(format!(
            "transmittance {i} = {t} must have equal real and imaginary parts"
        )));
    }
    if t.norm_sqr() >= 1.0 {
        return Err(invalid(format!("transmittance {i} has |T|^2 >= 1")));
    }
    Ok(())
}

/// `ν_i = σ_N²/|F(T)_i|²`, infinite for a dead sub-channel.
pub fn noise_coefficient(sigma_n_sq: f64, ft: C64) -> f64 {
    let g = ft.norm_sqr();
    if g == 0.0 {
        f64::INFINITY
    } else {
        sigma_n_sq / g
    }
}

pub fn make_channel(
    n: usize,
    spec: &TransmittanceSpec,
    sigma_n_sq: f64,
    nu_eve: f64,
) -> Result<ChannelModel> {
    if n == 0 {
        return Err(invalid("channel needs at least one sub-channel"));
    }
    if !(sigma_n_sq >= 0.0) || !sigma_n_sq.is_finite() {
        return Err(invalid(format!("noise variance must be >= 0, got {sigma_n_sq}")));
    }
    if !(nu_eve > 0.0) {
        return Err(invalid(format!("nu_eve must be positive, got {nu_eve}")));
    }
    let transmittances = match spec {
        TransmittanceSpec::Explicit(t) => {
            if t.len() != n {
                return Err(invalid(format!(
                    "expected {n} transmittances, got {}",
                    t.len()
                )));
            }
            t.clone()
        }
        TransmittanceSpec::Uniform { seed } => {
            let mut r = rng::seeded(*seed);
            (0..n)
                .map(|_| {
                    let a: f64 = r.random_range(0.0..FRAC_1_SQRT_2);
                    C64::new(a, a)
                })
                .collect()
        }
    };
    for (i, &t) in transmittances.iter().enumerate() {
        check_transmittance(i, t)?;
    }
    let ft = fft(&transmittances)?;
    let good_set = (0..n)
        .filter(|&i| noise_coefficient(sigma_n_sq, ft[i]) < nu_eve)
        .collect();
    Ok(ChannelModel {
        transmittances,
        ft,
        sigma_n_sq,
        nu_eve,
        good_set,
    })
}

impl ChannelModel {
    pub fn n(&self) -> usize {
        self.transmittances.len()
    }

    /// Number of good sub-channels `l`.
    pub fn l(&self) -> usize {
        self.good_set.len()
    }

    pub fn transmittances(&self) -> &[C64] {
        &self.transmittances
    }

    /// Fourier-domain coefficients `F(T)` of all `n` sub-channels.
    pub fn ft(&self) -> &[C64] {
        &self.ft
    }

    pub fn good_set(&self) -> &[usize] {
        &self.good_set
    }

    pub fn good_ft(&self) -> Vec<C64> {
        self.good_set.iter().map(|&i| self.ft[i]).collect()
    }

    pub fn sigma_n_sq(&self) -> f64 {
        self.sigma_n_sq
    }

    pub fn nu_eve(&self) -> f64 {
        self.nu_eve
    }

    pub fn nu(&self, i: usize) -> f64 {
        noise_coefficient(self.sigma_n_sq, self.ft[i])
    }

    /// Eve's transmittance, the complement of `T_i` within the admissible box.
    pub fn eve_transmittance(&self, i: usize) -> C64 {
        C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2) - self.transmittances[i]
    }

    /// Diagonal `l x l` transfer matrix over the good set.
    pub fn transfer_matrix(&self) -> CMatrix {
        let g = self.good_ft();
        CMatrix::from_diag(g.len(), g.len(), &g)
    }

    /// Same link with a different Eve reference level.
    pub fn with_nu_eve(&self, nu_eve: f64) -> Result<ChannelModel> {
        make_channel(
            self.n(),
            &TransmittanceSpec::Explicit(self.transmittances.clone()),
            self.sigma_n_sq,
            nu_eve,
        )
    }

    /// Restriction to the sub-channels of one user.
    pub fn logical_channel(&self, indices: &[usize]) -> Result<LogicalChannel> {
        if indices.is_empty() {
            return Err(invalid("logical channel needs at least one sub-channel"));
        }
        for &i in indices {
            if !self.good_set.contains(&i) {
                return Err(invalid(format!("sub-channel {i} is not in the good set")));
            }
        }
        Ok(LogicalChannel {
            indices: indices.to_vec(),
            transmittances: indices.iter().map(|&i| self.transmittances[i]).collect(),
            ft: indices.iter().map(|&i| self.ft[i]).collect(),
            sigma_n_sq: self.sigma_n_sq,
            nu_eve: self.nu_eve,
        })
    }

    /// One block over the good set: `y_i = F(T)_i F(d)_i + F(Δ)_i`.
    pub fn transmit_block(&self, j: usize, d: &[C64], seed: u64) -> Result<AmqdBlock> {
        let l = self.l();
        if d.len() != l {
            return Err(invalid(format!(
                "block has {} subcarriers but the good set has {l}",
                d.len()
            )));
        }
        let fd = fft(d)?;
        let noise = if self.sigma_n_sq > 0.0 {
            let mut r = rng::seeded(seed);
            fft(&rng::complex_gaussian_vec(&mut r, self.sigma_n_sq, l))?
        } else {
            vec![C64::new(0.0, 0.0); l]
        };
        let output = self
            .good_set
            .iter()
            .zip(fd.iter().zip(&noise))
            .map(|(&i, (x, w))| self.ft[i] * x + w)
            .collect();
        Ok(AmqdBlock {
            index: j,
            subcarriers: d.to_vec(),
            output,
            noise_realization: noise,
        })
    }

    /// Zero-forcing inverse of a block: `d = F⁻¹(y / F(T))`.
    pub fn invert_block(&self, output: &[C64]) -> Result<Vec<C64>> {
        if output.len() != self.l() {
            return Err(invalid("output length does not match the good set"));
        }
        let eq: Vec<C64> = self
            .good_set
            .iter()
            .zip(output)
            .map(|(&i, y)| y / self.ft[i])
            .collect();
        ifft(&eq)
    }
}

/// View of the sub-channels assigned to one user.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalChannel {
    pub indices: Vec<usize>,
    pub transmittances: Vec<C64>,
    pub ft: Vec<C64>,
    pub sigma_n_sq: f64,
    pub nu_eve: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmqdBlock {
    pub index: usize,
    pub subcarriers: Vec<C64>,
    pub output: Vec<C64>,
    /// `F(Δ)` as added to the output.
    pub noise_realization: Vec<C64>,
}
