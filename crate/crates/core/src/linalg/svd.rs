//! One-sided (Hestenes) Jacobi SVD for complex matrices.
//!
//! Column pairs are rotated until every pair is orthogonal to within
//! [`ORTH_TOL`] relative to the product of their norms. The rotated columns are
//! `σ_j u_j`, the accumulated rotations are `V`. Jacobi is slower than
//! Golub-Kahan but attains full relative accuracy on the small matrices used
//! here, and it is short enough to audit.

use super::{inner, CMatrix, C64, ZERO};
use crate::error::{invalid, Result};

const ORTH_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;
/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Full SVD `A = U diag(σ) V†` with `U` (m×m) and `V` (n×n) unitary.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    /// `min(m, n)` values, nonincreasing, exact zeros below the rank cutoff.
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn compute(a: &CMatrix) -> Result<Svd> {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Err(invalid("SVD of an empty matrix"));
        }
        if a.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("SVD input contains non-finite entries"));
        }
        if m < n {
            // A† = V Σ U†, so factor the adjoint and swap roles.
            let t = Self::compute_tall(&a.adjoint());
            let (mut u, mut v) = (t.v, t.u);
            fix_phases(&mut u, &mut v, m);
            return Ok(Svd {
                u,
                singular_values: t.singular_values,
                v,
            });
        }
        Ok(Self::compute_tall(a))
    }

    fn compute_tall(a: &CMatrix) -> Svd {
        let (m, n) = a.shape();
        let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.column(j)).collect();
        let mut vcols: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let mut e = vec![ZERO; n];
                e[j] = C64::new(1.0, 0.0);
                e
            })
            .collect();
        jacobi_sweeps(&mut cols, Some(&mut vcols));

        let mut order: Vec<(usize, f64)> = cols
            .iter()
            .enumerate()
            .map(|(j, c)| (j, super::norm_sqr(c).sqrt()))
            .collect();
        order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

        let smax = order[0].1;
        let cutoff = RANK_TOL * smax;
        let mut sv = Vec::with_capacity(n);
        let mut ucols: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut v = CMatrix::zeros(n, n);
        for (k, &(j, s)) in order.iter().enumerate() {
            v.set_column(k, &vcols[j]);
            if s > cutoff && s > 0.0 {
                sv.push(s);
                ucols.push(cols[j].iter().map(|z| z / s).collect());
            } else {
                sv.push(0.0);
            }
        }
        let rank = ucols.len();
        reorthonormalize(&mut ucols);
        complete_basis(&mut ucols, m);

        let mut u = CMatrix::zeros(m, m);
        for (k, col) in ucols.iter().enumerate() {
            u.set_column(k, col);
        }
        fix_phases(&mut u, &mut v, rank.max(n.min(m)));
        Svd {
            u,
            singular_values: sv,
            v,
        }
    }

    pub fn rank(&self) -> usize {
        self.singular_values.iter().filter(|&&s| s > 0.0).count()
    }

    /// `U Σ V†` with Σ the rectangular diagonal of the original shape.
    pub fn reconstruct(&self) -> CMatrix {
        let m = self.u.rows();
        let n = self.v.rows();
        let d: Vec<C64> = self
            .singular_values
            .iter()
            .map(|&s| C64::new(s, 0.0))
            .collect();
        self.u
            .matmul(&CMatrix::from_diag(m, n, &d))
            .matmul(&self.v.adjoint())
    }
}

/// Singular values only, nonincreasing. Skips accumulating `V`, for Monte
/// Carlo loops that only need the spectrum.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(invalid("SVD of an empty matrix"));
    }
    let a = if a.rows() < a.cols() {
        a.adjoint()
    } else {
        a.clone()
    };
    let mut cols: Vec<Vec<C64>> = (0..a.cols()).map(|j| a.column(j)).collect();
    jacobi_sweeps(&mut cols, None);
    let mut s: Vec<f64> = cols.iter().map(|c| super::norm_sqr(c).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    let cutoff = RANK_TOL * s[0];
    for x in s.iter_mut() {
        if *x <= cutoff {
            *x = 0.0;
        }
    }
    Ok(s)
}

fn jacobi_sweeps(cols: &mut [Vec<C64>], mut vcols: Option<&mut Vec<Vec<C64>>>) {
    let n = cols.len();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = super::norm_sqr(&cols[p]);
                let beta = super::norm_sqr(&cols[q]);
                let gamma = inner(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= ORTH_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let e = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cols, p, q, c, s, e);
                if let Some(v) = vcols.as_deref_mut() {
                    rotate(v, p, q, c, s, e);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

// a_p <- c a_p - s e* a_q ; a_q <- s e a_p + c a_q
fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, e: C64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    let se = e * s;
    let sec = e.conj() * s;
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = xp * c - sec * yq;
        *y = se * xp + yq * c;
    }
}

fn reorthonormalize(cols: &mut [Vec<C64>]) {
    for k in 0..cols.len() {
        for _ in 0..2 {
            for j in 0..k {
                let proj = inner(&cols[j], &cols[k]);
                let (head, tail) = cols.split_at_mut(k);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= proj * y;
                }
            }
        }
        let nrm = super::norm_sqr(&cols[k]).sqrt();
        for x in cols[k].iter_mut() {
            *x /= nrm;
        }
    }
}

/// Extends orthonormal `cols` to a basis of C^m using the standard basis
/// vectors with the largest residual after projection.
fn complete_basis(cols: &mut Vec<Vec<C64>>, m: usize) {
    while cols.len() < m {
        let mut best: Option<(f64, Vec<C64>)> = None;
        for i in 0..m {
            let mut e = vec![ZERO; m];
            e[i] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for c in cols.iter() {
                    let proj = inner(c, &e);
                    for (x, y) in e.iter_mut().zip(c) {
                        *x -= proj * y;
                    }
                }
            }
            let r = super::norm_sqr(&e);
            if best.as_ref().is_none_or(|b| r > b.0) {
                best = Some((r, e));
            }
        }
        let (r, mut e) = best.expect("m > 0");
        let nrm = r.sqrt();
        for x in e.iter_mut() {
            *x /= nrm;
        }
        cols.push(e);
    }
}

/// Makes the largest-magnitude entry of every left singular vector real and
/// positive, applying the same phase to the paired right vector.
fn fix_phases(u: &mut CMatrix, v: &mut CMatrix, paired: usize) {
    let m = u.rows();
    for j in 0..m {
        let col = u.column(j);
        let (k, _) = col
            .iter()
            .enumerate()
            .fold((0, -1.0), |b, (i, z)| if z.norm() > b.1 + 1e-13 { (i, z.norm()) } else { b });
        let z = col[k];
        if z.norm() == 0.0 {
            continue;
        }
        let ph = z.conj() / z.norm();
        let fixed: Vec<C64> = col.iter().map(|x| x * ph).collect();
        u.set_column(j, &fixed);
        if j < paired && j < v.cols() {
            let vc: Vec<C64> = v.column(j).iter().map(|x| x * ph).collect();
            v.set_column(j, &vc);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let svd = Svd::compute(&CMatrix::identity(2)).unwrap();
        assert_eq!(svd.singular_values, vec![1.0, 1.0]);
        assert!(svd.u.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        assert!(svd.v.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn diagonal_is_sorted() {
        let a = CMatrix::from_real_diag(&[1.0, 2.0]);
        let svd = Svd::compute(&a).unwrap();
        assert!((svd.singular_values[0] - 2.0).abs() < 1e-15);
        assert!((svd.singular_values[1] - 1.0).abs() < 1e-15);
        assert!(svd.reconstruct().max_abs_diff(&a) < 1e-15);
    }

    #[test]
    fn wide_and_tall_shapes_reconstruct() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0)],
            vec![c(0.4, -0.1), c(2.0, 0.0), c(0.7, 0.7)],
        ])
        .unwrap();
        for m in [a.clone(), a.adjoint()] {
            let svd = Svd::compute(&m).unwrap();
            assert_eq!(svd.u.rows(), m.rows());
            assert_eq!(svd.v.rows(), m.cols());
            assert!(svd.reconstruct().max_abs_diff(&m) < 1e-14);
            assert!(svd.u.unitarity_error() < 1e-14);
            assert!(svd.v.unitarity_error() < 1e-14);
        }
    }

    #[test]
    fn rank_deficient_gets_completed_basis() {
        let r = vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0)];
        let a = super::super::outer(&r, &r);
        let svd = Svd::compute(&a).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!(svd.u.unitarity_error() < 1e-13);
        assert!(svd.reconstruct().max_abs_diff(&a) < 1e-13);
    }

    #[test]
    fn phase_convention_makes_largest_entry_positive_real() {
        let a = CMatrix::from_rows(&[
            vec![c(0.0, 1.0), c(0.3, 0.0)],
            vec![c(0.2, -0.4), c(-1.0, 0.5)],
        ])
        .unwrap();
        let svd = Svd::compute(&a).unwrap();
        for j in 0..2 {
            let col = svd.u.column(j);
            let big = col
                .iter()
                .max_by(|x, y| x.norm().total_cmp(&y.norm()))
                .unwrap();
            assert!(big.im.abs() < 1e-14 && big.re > 0.0);
        }
        assert!(svd.reconstruct().max_abs_diff(&a) < 1e-14);
    }

    #[test]
    fn values_only_path_agrees() {
        let a = CMatrix::from_rows(&[
            vec![c(0.1, 1.0), c(0.3, 0.0), c(1.0, 1.0)],
            vec![c(0.2, -0.4), c(-1.0, 0.5), c(0.0, 0.2)],
        ])
        .unwrap();
        let full = Svd::compute(&a).unwrap().singular_values;
        let fast = singular_values(&a).unwrap();
        for (x, y) in full.iter().zip(&fast) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
