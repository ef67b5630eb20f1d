//! Permutation constellations over parallel sub-channels.
//!
//! Every sub-channel carries the same `2^R`-point base constellation, but
//! message `m` is sent as `base[P_i(m)]` on sub-channel `i` with `P_1` the
//! identity. A pair of messages that lands on neighbouring points of one
//! sub-channel can then be far apart on another, so no single weak
//! sub-channel decides the pairwise error.
//!
//! Coordinates are in noise-normalized units: the receiver noise on each
//! sub-channel has unit total complex variance. The normalized difference of
//! two codewords is `δ_i = (d_A,i − d_B,i)/√(σ''²/σ_N²)`, so
//! `(σ''²/2σ_N²) Σ g_i |δ_i|² = Σ g_i |d_A,i − d_B,i|²/2` is exactly the
//! squared Q-argument of binary ML detection.

use rand::seq::SliceRandom;

use crate::error::{invalid, Result};
use crate::linalg::C64;
use crate::rng;
use crate::stats::{mean_se, par_trials, q_function, Estimate};

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// Centered square (or 2:1 rectangular) grid with the given spacing.
    SquareGrid { spacing: f64 },
    Supplied(Vec<C64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PermutationKind {
    Identity,
    /// Independent uniform permutations for sub-channels `2..=l`.
    Random { seed: u64 },
    /// Grid map `(x, y) → ((2x + y) mod s, (x + 2y) mod s)` applied
    /// repeatedly; needs a square `s x s` grid with `s` coprime to 3.
    Designed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationConstellation {
    pub base: Vec<C64>,
    /// `perms[i][m]` is the base index used for message `m` on sub-channel `i`.
    pub perms: Vec<Vec<usize>>,
    pub bits: u32,
    /// `σ''²/σ_N²`, the scale that turns differences into `δ`.
    pub snr_scale: f64,
}

fn grid_points(bits: u32, spacing: f64) -> Vec<C64> {
    let cols = 1usize << bits.div_ceil(2);
    let rows = 1usize << (bits / 2);
    let cx = (cols as f64 - 1.0) / 2.0;
    let cy = (rows as f64 - 1.0) / 2.0;
    (0..cols * rows)
        .map(|m| {
            let (x, y) = (m % cols, m / cols);
            C64::new((x as f64 - cx) * spacing, (y as f64 - cy) * spacing)
        })
        .collect()
}

fn designed_map(bits: u32) -> Result<Vec<usize>> {
    if !bits.is_multiple_of(2) {
        return Err(invalid("designed permutation needs an even number of bits"));
    }
    let s = 1usize << (bits / 2);
    if s.is_multiple_of(3) {
        return Err(invalid("grid side must be coprime to 3"));
    }
    Ok((0..s * s)
        .map(|m| {
            let (x, y) = (m % s, m / s);
            let (u, v) = ((2 * x + y) % s, (x + 2 * y) % s);
            v * s + u
        })
        .collect())
}

pub fn build_constellation(
    l: usize,
    bits: u32,
    layout: &Layout,
    kind: PermutationKind,
) -> Result<PermutationConstellation> {
    if l == 0 {
        return Err(invalid("need at least one sub-channel"));
    }
    if bits == 0 || bits > 16 {
        return Err(invalid(format!("bits per sub-channel must be in 1..=16, got {bits}")));
    }
    let m = 1usize << bits;
    let base = match layout {
        Layout::SquareGrid { spacing } => {
            if !(*spacing > 0.0) {
                return Err(invalid("grid spacing must be positive"));
            }
            grid_points(bits, *spacing)
        }
        Layout::Supplied(points) => {
            if points.len() != m {
                return Err(invalid(format!(
                    "supplied constellation has {} points, expected {m}",
                    points.len()
                )));
            }
            points.clone()
        }
    };
    let identity: Vec<usize> = (0..m).collect();
    let mut perms = vec![identity.clone()];
    match kind {
        PermutationKind::Identity => perms.resize(l, identity),
        PermutationKind::Random { seed } => {
            let mut r = rng::seeded(seed);
            for _ in 1..l {
                let mut p = identity.clone();
                p.shuffle(&mut r);
                perms.push(p);
            }
        }
        PermutationKind::Designed => {
            let step = designed_map(bits)?;
            for i in 1..l {
                let prev: &Vec<usize> = &perms[i - 1];
                let next = prev.iter().map(|&k| step[k]).collect();
                perms.push(next);
            }
        }
    }
    Ok(PermutationConstellation {
        base,
        perms,
        bits,
        snr_scale: 1.0,
    })
}

/// Two sub-channels, 16 grid points each with unit spacing, related by the
/// designed map; the closest pair on the first sub-channel is at least twice
/// as far apart on the second.
pub fn designed_16_point_pair() -> PermutationConstellation {
    build_constellation(2, 4, &Layout::SquareGrid { spacing: 1.0 }, PermutationKind::Designed)
        .expect("valid preset")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodewordPair {
    pub d_a: Vec<C64>,
    pub d_b: Vec<C64>,
    pub deltas: Vec<C64>,
}

/// Which message pair the optimality function is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairPolicy {
    MinimalDistance,
    Messages(usize, usize),
}

impl PermutationConstellation {
    pub fn l(&self) -> usize {
        self.perms.len()
    }

    pub fn size(&self) -> usize {
        self.base.len()
    }

    /// Size of the product set over all sub-channels, `2^{lR}`.
    pub fn product_size(&self) -> f64 {
        (self.size() as f64).powi(self.l() as i32)
    }

    pub fn with_snr_scale(mut self, snr_scale: f64) -> Self {
        self.snr_scale = snr_scale;
        self
    }

    pub fn codeword(&self, m: usize) -> Vec<C64> {
        self.perms.iter().map(|p| self.base[p[m]]).collect()
    }

    pub fn pair(&self, a: usize, b: usize) -> CodewordPair {
        let d_a = self.codeword(a);
        let d_b = self.codeword(b);
        let s = self.snr_scale.sqrt();
        let deltas = d_a.iter().zip(&d_b).map(|(x, y)| (x - y) / s).collect();
        CodewordPair { d_a, d_b, deltas }
    }

    /// Smallest distance between distinct base points.
    pub fn min_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for a in 0..self.size() {
            for b in a + 1..self.size() {
                d = d.min((self.base[a] - self.base[b]).norm());
            }
        }
        d
    }

    /// Distance amplification: over message pairs at minimal distance on
    /// sub-channel 1, the smallest ratio of their distance on sub-channel `i`.
    pub fn achieved_u(&self, i: usize) -> f64 {
        let h = self.min_distance();
        let mut u = f64::INFINITY;
        for a in 0..self.size() {
            for b in a + 1..self.size() {
                let d1 = (self.base[self.perms[0][a]] - self.base[self.perms[0][b]]).norm();
                if (d1 - h).abs() <= 1e-12 * h {
                    let di = (self.base[self.perms[i][a]] - self.base[self.perms[i][b]]).norm();
                    u = u.min(di / h);
                }
            }
        }
        u
    }

    pub fn all_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.size()).flat_map(move |a| (a + 1..self.size()).map(move |b| (a, b)))
    }

    fn sum_sq(&self, a: usize, b: usize) -> f64 {
        self.pair(a, b).deltas.iter().map(|d| d.norm_sqr()).sum()
    }

    pub fn minimal_distance_pair(&self) -> (usize, usize) {
        let mut best = ((0, 1), f64::INFINITY);
        for (a, b) in self.all_pairs() {
            let s = self.sum_sq(a, b);
            if s < best.1 {
                best = ((a, b), s);
            }
        }
        best.0
    }

    pub fn reference_pair(&self, policy: PairPolicy) -> Result<CodewordPair> {
        let (a, b) = match policy {
            PairPolicy::MinimalDistance => self.minimal_distance_pair(),
            PairPolicy::Messages(a, b) => {
                if a >= self.size() || b >= self.size() || a == b {
                    return Err(invalid("reference pair must be two distinct messages"));
                }
                (a, b)
            }
        };
        Ok(self.pair(a, b))
    }

    /// `o = Σ (ν_Eve − |δ_i|²)` on the reference pair.
    pub fn optimality(&self, nu_eve: f64, policy: PairPolicy) -> Result<f64> {
        Ok(optimality_of(&self.reference_pair(policy)?.deltas, nu_eve))
    }

    /// Smallest optimality over all pairs when each pair's `ν_Eve` is tied to
    /// `rate_bits` through the rate constraint.
    pub fn worst_pair_optimality(&self, rate_bits: f64) -> (f64, (usize, usize)) {
        let mut best = (f64::INFINITY, (0, 1));
        for (a, b) in self.all_pairs() {
            let d = self.pair(a, b).deltas;
            let o = optimality_of(&d, nu_eve_for_rate(&d, rate_bits));
            if o < best.0 {
                best = (o, (a, b));
            }
        }
        best
    }

    /// Largest pairwise error probability over all message pairs at unit
    /// sub-channel gains.
    pub fn worst_pair_error(&self) -> f64 {
        let g = vec![1.0; self.l()];
        self.all_pairs()
            .map(|(a, b)| pairwise_error_prob(&self.pair(a, b), &g, self.snr_scale))
            .fold(0.0, f64::max)
    }

    /// Largest `c` with `|δ_{1…l}|^{2/l} ≥ c / l^{2R}` over all pairs.
    pub fn empirical_c(&self) -> f64 {
        let l = self.l() as f64;
        let scale = l.powf(2.0 * self.bits as f64);
        self.all_pairs()
            .map(|(a, b)| product_distance_sq(&self.pair(a, b).deltas).powf(1.0 / l) * scale)
            .fold(f64::INFINITY, f64::min)
    }

    /// Rows `(subchannel, symbol_index, x, p)`.
    pub fn export_rows(&self) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::with_capacity(self.l() * self.size());
        for i in 0..self.l() {
            for m in 0..self.size() {
                let z = self.base[self.perms[i][m]];
                out.push((i + 1, m, z.re, z.im));
            }
        }
        out
    }
}

pub fn optimality_of(deltas: &[C64], nu_eve: f64) -> f64 {
    deltas.iter().map(|d| nu_eve - d.norm_sqr()).sum()
}

/// `ν_Eve` satisfying `Σ log2(ν_Eve/|δ_i|²) = l R`, i.e. `2^R` times the
/// geometric mean of `|δ_i|²`.
pub fn nu_eve_for_rate(deltas: &[C64], rate_bits: f64) -> f64 {
    let l = deltas.len() as f64;
    let mean_log = deltas.iter().map(|d| d.norm_sqr().ln()).sum::<f64>() / l;
    (rate_bits * std::f64::consts::LN_2 + mean_log).exp()
}

/// `Q(√(o/2))`.
pub fn optimality_error(o: f64) -> f64 {
    q_function((o.max(0.0) / 2.0).sqrt())
}

/// `Π |δ_i|²`.
pub fn product_distance_sq(deltas: &[C64]) -> f64 {
    deltas.iter().map(|d| d.norm_sqr()).product()
}

/// `Q(√((σ''²/2σ_N²) Σ g_i |δ_i|²))` with `g_i = |F(T)_i|²`.
pub fn pairwise_error_prob(pair: &CodewordPair, gains: &[f64], snr_scale: f64) -> f64 {
    let s: f64 = pair
        .deltas
        .iter()
        .zip(gains)
        .map(|(d, g)| g * d.norm_sqr())
        .sum();
    q_function((snr_scale / 2.0 * s).sqrt())
}

/// Same bound with every gain replaced by the weakest one.
pub fn worst_case_error_prob(pair: &CodewordPair, gains: &[f64], snr_scale: f64) -> f64 {
    let gmin = gains.iter().copied().fold(f64::INFINITY, f64::min);
    pairwise_error_prob(pair, &vec![gmin; gains.len()], snr_scale)
}

/// Monte Carlo binary ML detection: sends `d_a` through gains `√g_i` with
/// unit complex noise and counts decisions for `d_b`.
pub fn monte_carlo_pep(pair: &CodewordPair, gains: &[f64], trials: usize, seed: u64) -> Estimate {
    let amp: Vec<f64> = gains.iter().map(|g| g.sqrt()).collect();
    let errs = par_trials(trials, seed, |r, _| {
        let mut da = 0.0;
        let mut db = 0.0;
        for i in 0..pair.d_a.len() {
            let y = pair.d_a[i] * amp[i] + rng::complex_gaussian(r, 0.5);
            da += (y - pair.d_a[i] * amp[i]).norm_sqr();
            db += (y - pair.d_b[i] * amp[i]).norm_sqr();
        }
        if db < da {
            1.0
        } else {
            0.0
        }
    });
    mean_se(&errs)
}

/// Average inverse product distance over ordered message pairs.
pub fn mean_inverse_product_distance(c: &PermutationConstellation) -> f64 {
    let m = c.size();
    let mut acc = 0.0;
    for a in 0..m {
        for b in 0..m {
            if a != b {
                acc += 1.0 / product_distance_sq(&c.pair(a, b).deltas);
            }
        }
    }
    acc / (m * (m - 1)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductDistanceStats {
    /// Mean over random permutations of the pair-averaged inverse product distance.
    pub mean_inverse: Estimate,
    /// `l^l R^l`.
    pub bound: f64,
    /// `(M − 1) ·` mean: per-symbol sum form.
    pub per_symbol: f64,
    /// `l^l R^l 2^{lR}`.
    pub per_symbol_bound: f64,
}

/// Draws `n_samples` sets of uniform permutations on `base`.
pub fn product_distance_stats(
    base: &[C64],
    bits: u32,
    l: usize,
    snr_scale: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ProductDistanceStats> {
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let layout = Layout::Supplied(base.to_vec());
    let vals: Vec<Result<f64>> = par_trials(n_samples, seed, |r, _| {
        use rand::Rng;
        let s: u64 = r.random();
        let c = build_constellation(l, bits, &layout, PermutationKind::Random { seed: s })?
            .with_snr_scale(snr_scale);
        Ok(mean_inverse_product_distance(&c))
    });
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let e = mean_se(&vals);
    let lf = l as f64;
    let bound = lf.powf(lf) * (bits as f64).powf(lf);
    let m = base.len() as f64;
    Ok(ProductDistanceStats {
        mean_inverse: e,
        bound,
        per_symbol: (m - 1.0) * e.mean,
        per_symbol_bound: bound * 2f64.powf(lf * bits as f64),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaOptimization {
    /// `(j, f(j), valid)` for `j = 1..=l`.
    pub values: Vec<(usize, f64, bool)>,
    /// Largest valid `j`.
    pub best_j: usize,
    pub value: f64,
    pub max_valid: f64,
}

/// Water-filling form of the constrained minimum over sub-channel gains.
///
/// For active set `1..=j` the level is `μ_j = (2^{Rl} Π_{i≤j} |δ_i|²)^{1/j}`
/// and the objective `f(j) = j μ_j − Σ_{i≤j} |δ_i|²`. A set is consistent when
/// `|δ_j|² ≤ μ_j ≤ |δ_{j+1}|²` (with `|δ_{l+1}| = ∞`).
pub fn delta_optimization(deltas: &[f64], bits: f64) -> Result<DeltaOptimization> {
    if deltas.is_empty() {
        return Err(invalid("need at least one delta"));
    }
    if deltas.iter().any(|d| !d.is_finite() || *d <= 0.0) {
        return Err(invalid("deltas must be positive and finite"));
    }
    if deltas.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("deltas must be sorted in nondecreasing order"));
    }
    let l = deltas.len();
    let lf = l as f64;
    let mut values = Vec::with_capacity(l);
    let mut log_prod = 0.0;
    let mut sum = 0.0;
    for j in 1..=l {
        let d2 = deltas[j - 1] * deltas[j - 1];
        log_prod += d2.ln();
        sum += d2;
        let jf = j as f64;
        let mu = ((bits * lf * std::f64::consts::LN_2 + log_prod) / jf).exp();
        let f = jf * mu - sum;
        let tol = 1e-12 * mu;
        let next = deltas.get(j).map_or(f64::INFINITY, |d| d * d);
        let valid = d2 <= mu + tol && mu <= next + tol;
        values.push((j, f, valid));
    }
    let best = values
        .iter()
        .rev()
        .find(|v| v.2)
        .copied()
        .ok_or_else(|| invalid("no consistent active set"))?;
    let max_valid = values
        .iter()
        .filter(|v| v.2)
        .map(|v| v.1)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DeltaOptimization {
        values,
        best_j: best.0,
        value: best.1,
        max_valid,
    })
}
