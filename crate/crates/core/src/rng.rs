//! Seeded random streams.
//!
//! Every stochastic routine takes a 64-bit seed. Monte Carlo loops derive one
//! ChaCha stream per trial from `(seed, trial)` so results do not depend on
//! how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, C64};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream number `stream` under master `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Circular complex Gaussian with variance `sigma_sq` on each quadrature.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma_sq: f64) -> C64 {
    let s = sigma_sq.sqrt();
    C64::new(s * normal(rng), s * normal(rng))
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, sigma_sq: f64, d: usize) -> Vec<C64> {
    (0..d).map(|_| complex_gaussian(rng, sigma_sq)).collect()
}

/// `rows x cols` matrix of i.i.d. entries with `E|a_ij|^2 = total_var`.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    total_var: f64,
) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, total_var / 2.0))
}
