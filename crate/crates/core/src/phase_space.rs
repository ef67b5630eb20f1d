//! Complex Gaussian phase-space vectors and the unitary DFT pair that stands
//! in for the continuous-variable Fourier operation.
//!
//! A sample `z = x + ip` carries the position quadrature in its real part and
//! momentum in its imaginary part. With variance `σ²` per quadrature,
//! `E|z|² = 2σ²`.

use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::linalg::{psd_eigen, CMatrix, C64};
use crate::rng;

/// Covariance of a [`CvVector`], `E[z z†]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// `2σ² I` with `σ²` per quadrature.
    Isotropic { sigma_sq: f64 },
    Full(CMatrix),
}

impl Covariance {
    pub fn to_matrix(&self, d: usize) -> CMatrix {
        match self {
            Covariance::Isotropic { sigma_sq } => {
                CMatrix::from_real_diag(&vec![2.0 * sigma_sq; d])
            }
            Covariance::Full(k) => k.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvVector {
    pub values: Vec<C64>,
    pub covariance: Covariance,
}

impl CvVector {
    pub fn new(values: Vec<C64>, sigma_sq: f64) -> Self {
        Self {
            values,
            covariance: Covariance::Isotropic { sigma_sq },
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn p(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        crate::linalg::norm_sqr(&self.values)
    }
}

/// `d` i.i.d. circular complex Gaussians with variance `sigma_sq` per quadrature.
pub fn sample_gaussian_cv(sigma_sq: f64, d: usize, seed: u64) -> Result<CvVector> {
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(invalid(format!("variance must be positive, got {sigma_sq}")));
    }
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let mut r = rng::seeded(seed);
    Ok(CvVector::new(rng::complex_gaussian_vec(&mut r, sigma_sq, d), sigma_sq))
}

/// Zero-mean circular Gaussian vector with `E[z z†] = k`.
pub fn sample_with_covariance(k: &CMatrix, seed: u64) -> Result<CvVector> {
    let root = covariance_root(k)?;
    let mut r = rng::seeded(seed);
    let w = rng::complex_gaussian_vec(&mut r, 0.5, k.rows());
    Ok(CvVector {
        values: root.mul_vec(&w),
        covariance: Covariance::Full(k.clone()),
    })
}

/// `L` with `L L† = k` for a Hermitian PSD `k`.
pub fn covariance_root(k: &CMatrix) -> Result<CMatrix> {
    if k.hermitian_error() > 1e-10 * k.frobenius_norm().max(1.0) {
        return Err(invalid("covariance must be Hermitian"));
    }
    let (w, v) = psd_eigen(k)?;
    let s: Vec<f64> = w.iter().map(|x| x.max(0.0).sqrt()).collect();
    Ok(v.matmul(&CMatrix::from_real_diag(&s)))
}

fn dft(values: &[C64], inverse: bool) -> Result<Vec<C64>> {
    if values.is_empty() {
        return Err(invalid("Fourier transform of an empty vector"));
    }
    let n = values.len();
    let mut planner = FftPlanner::<f64>::new();
    let plan = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut buf = values.to_vec();
    plan.process(&mut buf);
    let s = 1.0 / (n as f64).sqrt();
    for z in buf.iter_mut() {
        *z *= s;
    }
    Ok(buf)
}

/// Unitary forward DFT, `X_k = n^{-1/2} Σ_j x_j e^{-2πi jk/n}`.
pub fn fft(values: &[C64]) -> Result<Vec<C64>> {
    dft(values, false)
}

/// Unitary inverse DFT.
pub fn ifft(values: &[C64]) -> Result<Vec<C64>> {
    dft(values, true)
}

pub fn fft_cv(v: &CvVector) -> Result<CvVector> {
    Ok(CvVector {
        values: fft(&v.values)?,
        covariance: transform_cov(&v.covariance, v.len(), false)?,
    })
}

pub fn ifft_cv(v: &CvVector) -> Result<CvVector> {
    Ok(CvVector {
        values: ifft(&v.values)?,
        covariance: transform_cov(&v.covariance, v.len(), true)?,
    })
}

// F K F† for a full covariance; isotropic stays isotropic.
fn transform_cov(k: &Covariance, d: usize, inverse: bool) -> Result<Covariance> {
    match k {
        Covariance::Isotropic { .. } => Ok(k.clone()),
        Covariance::Full(m) => {
            let f = dft_matrix(d, inverse)?;
            Ok(Covariance::Full(f.matmul(m).matmul(&f.adjoint())))
        }
    }
}

/// Unitary DFT as an explicit matrix.
pub fn dft_matrix(d: usize, inverse: bool) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        let mut e = vec![C64::new(0.0, 0.0); d];
        e[j] = C64::new(1.0, 0.0);
        m.set_column(j, &dft(&e, inverse)?);
    }
    Ok(m)
}

/// `τ = Σ|F(d)_i|²`, the block energy after the transform.
pub fn squared_magnitude_tau(block: &[C64]) -> Result<f64> {
    Ok(crate::linalg::norm_sqr(&fft(block)?))
}
