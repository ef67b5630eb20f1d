//! Eigenchannel decomposition `F(T) = U₂ Γ F₁⁻¹`.
//!
//! The encoder applies `F₁` to the stream vector and the decoder applies
//! `U₂⁻¹ = U₂†`, so with exact factors the link reduces to independent scalar
//! channels `s'_i = λ_i s_i + Δ_i`. If either side uses factors from a wrong
//! matrix, the effective stream matrix `M = U₂,used† F(T) F₁,used` picks up
//! off-diagonal leakage and streams interfere.

use crate::error::{invalid, Result};
use crate::linalg::{CMatrix, Svd, C64};
use crate::rng;
use crate::stats::{mean_se, par_trials, Estimate};

#[derive(Debug, Clone)]
pub struct SvdLayer {
    /// `K_out x K_out` unitary.
    pub u2: CMatrix,
    /// Eigenchannels `λ_1 ≥ … ≥ λ_{n_min} ≥ 0`.
    pub gamma: Vec<f64>,
    /// `F₁⁻¹`, `K_in x K_in` unitary.
    pub f1_inv: CMatrix,
    pub n_min: usize,
}

/// Factor `F(T)` (`K_out x K_in`, `K_in ≤ K_out`).
pub fn svd_of_channel(ft: &CMatrix) -> Result<SvdLayer> {
    let (k_out, k_in) = ft.shape();
    if k_in > k_out {
        return Err(invalid(format!(
            "transfer matrix is {k_out}x{k_in}; need K_in <= K_out"
        )));
    }
    let svd = Svd::compute(ft)?;
    Ok(SvdLayer {
        u2: svd.u,
        gamma: svd.singular_values,
        f1_inv: svd.v.adjoint(),
        n_min: k_in,
    })
}

impl SvdLayer {
    pub fn k_out(&self) -> usize {
        self.u2.rows()
    }

    pub fn k_in(&self) -> usize {
        self.f1_inv.rows()
    }

    pub fn f1(&self) -> CMatrix {
        self.f1_inv.adjoint()
    }

    pub fn rank(&self) -> usize {
        self.gamma.iter().filter(|&&x| x > 0.0).count()
    }

    pub fn lambda_max_sq(&self) -> f64 {
        self.gamma.first().map_or(0.0, |x| x * x)
    }

    pub fn reconstruct(&self) -> CMatrix {
        let d: Vec<C64> = self.gamma.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.u2
            .matmul(&CMatrix::from_diag(self.k_out(), self.k_in(), &d))
            .matmul(&self.f1_inv)
    }

    /// `u_i`, the i-th column of `U₂`.
    pub fn u2_column(&self, i: usize) -> Vec<C64> {
        self.u2.column(i)
    }

    /// `v_i`, the i-th column of `F₁`.
    pub fn f1_column(&self, i: usize) -> Vec<C64> {
        self.f1_inv.row(i).iter().map(|z| z.conj()).collect()
    }

    /// Rank-one term `λ_i u_i v_i†`.
    pub fn rank_one_term(&self, i: usize) -> CMatrix {
        crate::linalg::outer(&self.u2_column(i), &self.f1_column(i)).scale_real(self.gamma[i])
    }

    /// Receive-space direction `λ_i u_i` of stream `i`.
    pub fn eigen_direction(&self, i: usize) -> Vec<C64> {
        self.u2_column(i)
            .into_iter()
            .map(|z| z * self.gamma[i])
            .collect()
    }

    /// Channel input `F₁ s` for a stream vector.
    pub fn pre_operator(&self, s: &[C64]) -> Vec<C64> {
        self.f1().mul_vec(s)
    }

    /// First `n_min` entries of `U₂† y`.
    pub fn post_operator(&self, y: &[C64]) -> Vec<C64> {
        let mut out = self.u2.adjoint().mul_vec(y);
        out.truncate(self.n_min);
        out
    }

    /// `n_min x n_min` effective stream matrix `U₂,self† F F₁,self`.
    pub fn stream_matrix(&self, ft: &CMatrix) -> CMatrix {
        let full = self.u2.adjoint().matmul(ft).matmul(&self.f1());
        CMatrix::from_fn(self.n_min, self.n_min, |i, j| full[(i, j)])
    }

    /// Input covariance `K_s = F₁ diag(σ'²) F₁⁻¹`.
    pub fn input_covariance(&self, sigma_prime_sq: &[f64]) -> CMatrix {
        let f1 = self.f1();
        f1.matmul(&CMatrix::from_real_diag(sigma_prime_sq))
            .matmul(&self.f1_inv)
    }
}

/// Stream vector `s` with covariance `K_s`.
#[derive(Debug, Clone)]
pub struct StreamVector {
    pub streams: Vec<C64>,
    pub covariance: CMatrix,
}

impl StreamVector {
    /// Streams drawn with total variance `var[i]` (`E|s_i|² = var[i]`).
    pub fn sample(var: &[f64], seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let streams = var
            .iter()
            .map(|&v| rng::complex_gaussian(&mut r, v / 2.0))
            .collect();
        Self {
            streams,
            covariance: CMatrix::from_real_diag(var),
        }
    }
}

/// How the encoder/decoder factors relate to the true channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorError {
    None,
    /// Factors taken from `F(T) + E` with `‖E‖_F = norm`, direction fixed by `seed`.
    Perturbed { norm: f64, seed: u64 },
}

/// Per-stream interference powers `σ²_{γ,i}` and their mean `σ_γ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenInterference {
    pub per_stream: Vec<f64>,
    pub average: f64,
}

impl EigenInterference {
    fn from_per_stream(per_stream: Vec<f64>) -> Self {
        let average = per_stream.iter().sum::<f64>() / per_stream.len() as f64;
        Self {
            per_stream,
            average,
        }
    }
}

/// Complex Gaussian perturbation with Frobenius norm exactly `norm`.
pub fn perturbation(rows: usize, cols: usize, norm: f64, seed: u64) -> CMatrix {
    let mut r = rng::seeded(seed);
    let e = rng::complex_gaussian_matrix(&mut r, rows, cols, 1.0);
    let f = e.frobenius_norm();
    e.scale_real(norm / f)
}

/// Factors used by the encoder/decoder under the given error model.
pub fn used_layer(ft: &CMatrix, err: FactorError) -> Result<SvdLayer> {
    match err {
        FactorError::None => svd_of_channel(ft),
        FactorError::Perturbed { norm, seed } => {
            if !(norm >= 0.0) {
                return Err(invalid("perturbation norm must be >= 0"));
            }
            let (r, c) = ft.shape();
            svd_of_channel(&ft.add(&perturbation(r, c, norm, seed)))
        }
    }
}

/// Interference power `[M_off K_s M_off†]_ii` for an effective stream matrix.
pub fn interference_from_stream_matrix(m: &CMatrix, k_s: &CMatrix) -> Result<EigenInterference> {
    if !m.is_square() || m.shape() != k_s.shape() {
        return Err(invalid("stream matrix and K_s must be square of equal size"));
    }
    let n = m.rows();
    let off = CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(0.0, 0.0) } else { m[(i, j)] });
    let p = off.matmul(k_s).matmul(&off.adjoint());
    Ok(EigenInterference::from_per_stream(
        (0..n).map(|i| p[(i, i)].re.max(0.0)).collect(),
    ))
}

/// Interference when encoding/decoding the `layer_true` channel with
/// `layer_used` factors. `k_s` is the stream covariance.
pub fn interference_variance(
    layer_true: &SvdLayer,
    layer_used: &SvdLayer,
    k_s: &CMatrix,
) -> Result<EigenInterference> {
    if layer_true.u2.shape() != layer_used.u2.shape()
        || layer_true.f1_inv.shape() != layer_used.f1_inv.shape()
    {
        return Err(invalid("layers have different shapes"));
    }
    interference_from_stream_matrix(&layer_used.stream_matrix(&layer_true.reconstruct()), k_s)
}

/// Result of one pass through the singular layer.
#[derive(Debug, Clone)]
pub struct EigenOutput {
    /// Received streams `s'`.
    pub streams: Vec<C64>,
    /// Cross-stream leakage term of each received stream.
    pub interference: Vec<C64>,
    /// Noise after the post-operator.
    pub noise: Vec<C64>,
}

/// Sends `s` through `ft` using factors chosen by `err`.
///
/// The transmitted vector is `F₁,used s`; the receiver applies `U₂,used†`.
/// The interference term is `(M − diag M) s`.
pub fn eigen_transmit(
    ft: &CMatrix,
    s: &StreamVector,
    sigma_n_sq: f64,
    seed: u64,
    err: FactorError,
) -> Result<EigenOutput> {
    let used = used_layer(ft, err)?;
    transmit_with(ft, &used, &s.streams, sigma_n_sq, &mut rng::seeded(seed))
}

fn transmit_with<R: rand::Rng + ?Sized>(
    ft: &CMatrix,
    used: &SvdLayer,
    s: &[C64],
    sigma_n_sq: f64,
    r: &mut R,
) -> Result<EigenOutput> {
    if s.len() != used.n_min {
        return Err(invalid(format!(
            "expected {} streams, got {}",
            used.n_min,
            s.len()
        )));
    }
    let x = used.pre_operator(s);
    let delta = if sigma_n_sq > 0.0 {
        rng::complex_gaussian_vec(r, sigma_n_sq, ft.rows())
    } else {
        vec![C64::new(0.0, 0.0); ft.rows()]
    };
    let clean = ft.mul_vec(&x);
    let y: Vec<C64> = clean.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let streams = used.post_operator(&y);
    let noise = used.post_operator(&delta);
    let m = used.stream_matrix(ft);
    // Whatever is left after removing the diagonal gain and the noise.
    let interference = (0..used.n_min)
        .map(|i| streams[i] - m[(i, i)] * s[i] - noise[i])
        .collect();
    Ok(EigenOutput {
        streams,
        interference,
        noise,
    })
}

/// Monte Carlo interference power per stream over `trials` stream draws with
/// total variance `sigma_prime_sq` per stream.
pub fn measure_interference(
    ft: &CMatrix,
    err: FactorError,
    sigma_prime_sq: f64,
    sigma_n_sq: f64,
    trials: usize,
    seed: u64,
) -> Result<(EigenInterference, Vec<Estimate>)> {
    let used = used_layer(ft, err)?;
    let n = used.n_min;
    let rows: Vec<Result<Vec<f64>>> = par_trials(trials, seed, |r, _| {
        let s = rng::complex_gaussian_vec(r, sigma_prime_sq / 2.0, n);
        let out = transmit_with(ft, &used, &s, sigma_n_sq, r)?;
        Ok(out.interference.iter().map(|z| z.norm_sqr()).collect())
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    let est: Vec<Estimate> = (0..n)
        .map(|i| mean_se(&rows.iter().map(|row| row[i]).collect::<Vec<_>>()))
        .collect();
    Ok((
        EigenInterference::from_per_stream(est.iter().map(|e| e.mean).collect()),
        est,
    ))
}
