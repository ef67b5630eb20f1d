//! Interference handling around the singular layer.
//!
//! Receiver side: a projector onto the orthogonal complement of the other
//! streams' receive directions removes their interference outright, at the
//! cost of the signal energy that lies in that span.
//!
//! Transmitter side: naive presubtraction `κ = φ − γ` costs `|γ|²` extra
//! energy. The lattice precoder instead picks the replica `φ + Λk` nearest to
//! `αγ` and sends `φ + Λk − αγ`, which stays inside one lattice cell. The
//! receiver undoes the replica choice by reducing modulo `Λ`.

use std::f64::consts::LOG2_E;

use crate::error::{invalid, Error, Result};
use crate::linalg::{inner, norm_sqr, CMatrix, C64};
use crate::rng;
use crate::singular_layer::SvdLayer;
use crate::stats::{mean_se, par_trials, ratio_of_means, Estimate};

/// Relative residual below which a direction counts as linearly dependent.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// Rows form an orthonormal basis of the complement of the interfering span.
#[derive(Debug, Clone)]
pub struct Projector {
    pub matrix: CMatrix,
    pub stream: usize,
}

fn orthonormalize(vs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(vs.len());
    for v in vs {
        let scale = norm_sqr(v).sqrt();
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let p = inner(b, &w);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let r = norm_sqr(&w).sqrt();
        if scale == 0.0 || r <= DEPENDENCE_TOL * scale {
            return Err(Error::RankDeficient(
                "interfering directions are linearly dependent".into(),
            ));
        }
        basis.push(w.into_iter().map(|z| z / r).collect());
    }
    Ok(basis)
}

impl Projector {
    /// Projector for stream `i` given every stream's receive direction `h_j`.
    pub fn from_directions(dirs: &[Vec<C64>], i: usize) -> Result<Projector> {
        if i >= dirs.len() {
            return Err(invalid(format!("stream {i} out of range")));
        }
        let k = dirs[i].len();
        if dirs.iter().any(|d| d.len() != k) {
            return Err(invalid("directions must share one dimension"));
        }
        if dirs.len() > k {
            return Err(Error::RankDeficient(format!(
                "{} directions cannot be independent in dimension {k}",
                dirs.len()
            )));
        }
        let others: Vec<Vec<C64>> = dirs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, d)| d.clone())
            .collect();
        // Fails when h_i itself lies in the span of the others.
        let mut all = others.clone();
        all.push(dirs[i].clone());
        orthonormalize(&all)?;

        let mut basis = orthonormalize(&others)?;
        let span = basis.len();
        while basis.len() < k {
            let mut best: Option<(f64, Vec<C64>)> = None;
            for e_idx in 0..k {
                let mut e = vec![C64::new(0.0, 0.0); k];
                e[e_idx] = C64::new(1.0, 0.0);
                for _ in 0..2 {
                    for b in &basis {
                        let p = inner(b, &e);
                        for (x, y) in e.iter_mut().zip(b) {
                            *x -= p * y;
                        }
                    }
                }
                let r = norm_sqr(&e);
                if best.as_ref().is_none_or(|b| r > b.0 + 1e-12) {
                    best = Some((r, e));
                }
            }
            let (r, e) = best.expect("k > 0");
            basis.push(e.into_iter().map(|z| z / r.sqrt()).collect());
        }
        let rows = &basis[span..];
        let matrix = CMatrix::from_fn(rows.len(), k, |a, b| rows[a][b].conj());
        Ok(Projector { matrix, stream: i })
    }

    pub fn apply(&self, y: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(y)
    }

    /// `P† P`, the orthogonal projection in receive space.
    pub fn projection(&self) -> CMatrix {
        self.matrix.adjoint().matmul(&self.matrix)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

/// Receive directions `λ_j u_j` of every eigenchannel.
pub fn layer_directions(layer: &SvdLayer) -> Vec<Vec<C64>> {
    (0..layer.n_min).map(|j| layer.eigen_direction(j)).collect()
}

/// Projector for stream `i` from the decoder's (statistical) layer.
pub fn build_projector(layer: &SvdLayer, i: usize) -> Result<Projector> {
    Projector::from_directions(&layer_directions(layer), i)
}

#[derive(Debug, Clone)]
pub struct PostcodeResult {
    /// `P y`.
    pub projected: Vec<C64>,
    /// `W_i = P†P h_i`.
    pub w: Vec<C64>,
    /// `‖P h_i‖²`.
    pub gain: f64,
}

pub fn postcode_cancel(p: &Projector, h_i: &[C64], y: &[C64]) -> PostcodeResult {
    let ph = p.apply(h_i);
    PostcodeResult {
        projected: p.apply(y),
        w: p.projection().mul_vec(h_i),
        gain: norm_sqr(&ph),
    }
}

/// `σ_ω² ‖P h_i‖² / σ_N²`.
pub fn postcode_snr(p: &Projector, h_i: &[C64], sigma_omega_sq: f64, sigma_n_sq: f64) -> f64 {
    sigma_omega_sq * norm_sqr(&p.apply(h_i)) / sigma_n_sq
}

/// `Σ log2(1 + σ_ω² λ_j² / σ_N²)`, the bound on any single projected stream.
pub fn stream_rate_bound(lambdas: &[f64], sigma_omega_sq: f64, sigma_n_sq: f64) -> f64 {
    lambdas
        .iter()
        .map(|l| (1.0 + sigma_omega_sq * l * l / sigma_n_sq).log2())
        .sum()
}

/// Monte Carlo SNR after projection and matched combining.
///
/// Each trial sends Gaussian symbols (`E|s|² = sigma_omega_sq`) on every
/// stream through the directions `dirs`, adds noise with per-quadrature
/// variance `sigma_n_sq`, projects, and combines along `P h_i`. The result is
/// the ratio of mean signal to mean noise power.
pub fn empirical_postcode_snr(
    p: &Projector,
    dirs: &[Vec<C64>],
    sigma_omega_sq: f64,
    sigma_n_sq: f64,
    trials: usize,
    seed: u64,
) -> Estimate {
    let i = p.stream;
    let ph = p.apply(&dirs[i]);
    let g = norm_sqr(&ph).sqrt();
    let comb: Vec<C64> = ph.iter().map(|z| z / g).collect();
    let k = dirs[i].len();
    let rows = par_trials(trials, seed, |r, _| {
        let s = rng::complex_gaussian_vec(r, sigma_omega_sq / 2.0, dirs.len());
        let mut interf = vec![C64::new(0.0, 0.0); k];
        for (j, d) in dirs.iter().enumerate() {
            if j != i {
                for (acc, x) in interf.iter_mut().zip(d) {
                    *acc += x * s[j];
                }
            }
        }
        let noise = rng::complex_gaussian_vec(r, sigma_n_sq, k);
        let sig: Vec<C64> = dirs[i].iter().map(|x| x * s[i]).collect();
        let rest: Vec<C64> = interf.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let sig_p = inner(&comb, &p.apply(&sig)).norm_sqr();
        let rest_p = inner(&comb, &p.apply(&rest)).norm_sqr();
        (sig_p, rest_p)
    });
    let a: Vec<f64> = rows.iter().map(|x| x.0).collect();
    let b: Vec<f64> = rows.iter().map(|x| x.1).collect();
    ratio_of_means(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecodeResult {
    pub transmitted: C64,
    /// Lattice shift `(k_x, k_p)`; zero for the naive precoder.
    pub class_index: (i64, i64),
    /// `|κ|² − |φ|²`.
    pub extra_variance: f64,
}

/// `κ = φ − γ`.
pub fn naive_precode(phi: C64, gamma: C64) -> PrecodeResult {
    let t = phi - gamma;
    PrecodeResult {
        transmitted: t,
        class_index: (0, 0),
        extra_variance: t.norm_sqr() - phi.norm_sqr(),
    }
}

/// Base symbols replicated on a square lattice of period `Λ` per quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceConstellation {
    pub base_points: Vec<C64>,
    pub lattice_period: f64,
    pub domain_halfwidth: f64,
}

impl EquivalenceConstellation {
    /// Four base points `±σ_ω ± iσ_ω` (spacing `2σ_ω`), `Λ = 4σ_ω`,
    /// `D_max = 4σ_γ`.
    pub fn standard(sigma_omega: f64, sigma_gamma: f64) -> Result<Self> {
        if !(sigma_omega > 0.0) || !(sigma_gamma >= 0.0) {
            return Err(invalid("sigma_omega must be positive and sigma_gamma >= 0"));
        }
        let s = sigma_omega;
        Ok(Self {
            base_points: vec![
                C64::new(s, s),
                C64::new(-s, s),
                C64::new(-s, -s),
                C64::new(s, -s),
            ],
            lattice_period: 4.0 * s,
            domain_halfwidth: 4.0 * sigma_gamma,
        })
    }

    pub fn min_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for (a, x) in self.base_points.iter().enumerate() {
            for y in &self.base_points[a + 1..] {
                d = d.min((x - y).norm());
            }
        }
        d
    }

    /// `EC_k φ = φ + Λ(k_x + i k_p)`.
    pub fn replica(&self, phi: C64, k: (i64, i64)) -> C64 {
        phi + C64::new(k.0 as f64, k.1 as f64) * self.lattice_period
    }

    /// Reduces `y` into the fundamental cell `[−Λ/2, Λ/2)²`.
    pub fn reduce(&self, y: C64) -> C64 {
        let l = self.lattice_period;
        let m = |v: f64| v - l * (v / l).round();
        C64::new(m(y.re), m(y.im))
    }

    /// Index of the base point nearest to `y` after lattice reduction.
    pub fn decode(&self, y: C64) -> usize {
        let r = self.reduce(y);
        let mut best = (0, f64::INFINITY);
        for (i, b) in self.base_points.iter().enumerate() {
            // Distance on the torus, so a point near the cell edge still finds
            // its base symbol.
            let d = self.reduce(r - b).norm_sqr();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Replicas of every base point within the domain, as
    /// `(k_x, k_p, base_index, point)`.
    pub fn replicas_in_domain(&self) -> Vec<(i64, i64, usize, C64)> {
        let kmax = (self.domain_halfwidth / self.lattice_period).ceil() as i64 + 1;
        let mut out = Vec::new();
        for kx in -kmax..=kmax {
            for kp in -kmax..=kmax {
                for (b, &phi) in self.base_points.iter().enumerate() {
                    let z = self.replica(phi, (kx, kp));
                    if z.re.abs() <= self.domain_halfwidth.max(self.lattice_period)
                        && z.im.abs() <= self.domain_halfwidth.max(self.lattice_period)
                    {
                        out.push((kx, kp, b, z));
                    }
                }
            }
        }
        out
    }
}

/// `α = σ_ω²/(σ_ω² + σ_N²)`.
pub fn mmse_alpha(sigma_omega_sq: f64, sigma_n_sq: f64) -> f64 {
    sigma_omega_sq / (sigma_omega_sq + sigma_n_sq)
}

/// Sends `EC_k φ − αγ` for the replica nearest to `αγ`.
pub fn sia_precode(
    phi: C64,
    gamma: C64,
    alpha: f64,
    ec: &EquivalenceConstellation,
) -> Result<PrecodeResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let target = gamma * alpha - phi;
    let l = ec.lattice_period;
    let k = ((target.re / l).round() as i64, (target.im / l).round() as i64);
    let t = ec.replica(phi, k) - gamma * alpha;
    Ok(PrecodeResult {
        transmitted: t,
        class_index: k,
        extra_variance: t.norm_sqr() - phi.norm_sqr(),
    })
}

/// Energy statistics of the two precoders over random interference draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecoderComparison {
    pub naive_energy: Estimate,
    pub sia_energy: Estimate,
    pub sia_max_energy: f64,
    /// Symbol errors after zero-noise decoding of `y = κ + γ`.
    pub decode_error_rate: f64,
}

/// `γ` has total variance `sigma_gamma²` (`E|γ|² = σ_γ²`); base symbols are
/// drawn uniformly. Decoding uses `α = 1`, the zero-noise MMSE scaling.
pub fn compare_precoders(
    ec: &EquivalenceConstellation,
    sigma_gamma: f64,
    trials: usize,
    seed: u64,
) -> Result<PrecoderComparison> {
    use rand::Rng;
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let m = ec.base_points.len();
    let rows: Vec<Result<(f64, f64, bool)>> = par_trials(trials, seed, |r, _| {
        let b = r.random_range(0..m);
        let phi = ec.base_points[b];
        let gamma = rng::complex_gaussian(r, sigma_gamma * sigma_gamma / 2.0);
        let naive = naive_precode(phi, gamma);
        let sia = sia_precode(phi, gamma, 1.0, ec)?;
        let y = sia.transmitted + gamma;
        Ok((
            naive.transmitted.norm_sqr(),
            sia.transmitted.norm_sqr(),
            ec.decode(y) != b,
        ))
    });
    let rows: Vec<(f64, f64, bool)> = rows.into_iter().collect::<Result<_>>()?;
    let naive: Vec<f64> = rows.iter().map(|x| x.0).collect();
    let sia: Vec<f64> = rows.iter().map(|x| x.1).collect();
    Ok(PrecoderComparison {
        naive_energy: mean_se(&naive),
        sia_energy: mean_se(&sia),
        sia_max_energy: sia.iter().copied().fold(0.0, f64::max),
        decode_error_rate: rows.iter().filter(|x| x.2).count() as f64 / trials as f64,
    })
}

/// Volume-ratio rate and the related quantities of the `α`-scaled decoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePacking {
    /// `(d/2) log2(1 + σ_ω²/σ_N²)` bits.
    pub rate_bits: f64,
    /// `(σ_N²/(σ_ω² + σ_N²))^{d/2}`.
    pub p: f64,
    /// Codebook size bound `1/p`.
    pub codebook_bound: f64,
    /// `σ_ω²σ_N²/(σ_ω² + σ_N²)`, squared radius of the decoding sphere.
    pub residual_variance: f64,
}

pub fn sphere_packing_capacity(sigma_w_sq: f64, sigma_n_sq: f64, d: usize) -> Result<SpherePacking> {
    if !(sigma_w_sq > 0.0) || !(sigma_n_sq > 0.0) || d == 0 {
        return Err(invalid("sphere packing needs positive variances and d >= 1"));
    }
    let r2 = sigma_w_sq * sigma_n_sq / (sigma_w_sq + sigma_n_sq);
    let half_d = d as f64 / 2.0;
    // log2 of the ball volume ratio (R/r)^d; the unit-ball constant cancels.
    let rate_bits = half_d * (sigma_w_sq / r2).ln() * LOG2_E;
    let p = (sigma_n_sq / (sigma_w_sq + sigma_n_sq)).powf(half_d);
    Ok(SpherePacking {
        rate_bits,
        p,
        codebook_bound: 1.0 / p,
        residual_variance: r2,
    })
}

/// Monte Carlo `E‖αy − x‖²` for real `x ~ N(0, σ_ω² I_d)`, `y = x + n`.
pub fn alpha_residual(sigma_w_sq: f64, sigma_n_sq: f64, d: usize, trials: usize, seed: u64) -> Estimate {
    let alpha = mmse_alpha(sigma_w_sq, sigma_n_sq);
    let (sw, sn) = (sigma_w_sq.sqrt(), sigma_n_sq.sqrt());
    let vals = par_trials(trials, seed, |r, _| {
        (0..d)
            .map(|_| {
                let x = sw * rng::normal(r);
                let y = x + sn * rng::normal(r);
                (alpha * y - x).powi(2)
            })
            .sum::<f64>()
    });
    mean_se(&vals)
}
