//! Dense complex helpers shared by the network and gain code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const J: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Symmetrizes `m` as (m + m^H)/2 before a Hermitian eigensolve.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eig(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eig(m);
    let scaled = CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, k| {
        vectors[(r, k)] * f(values[k])
    });
    scaled * vectors.adjoint()
}

/// Largest singular value squared, i.e. λ_max(S^H S).
pub fn max_gram_eigenvalue(s: &CMatrix) -> f64 {
    let g = s.ad_mul(s);
    hermitian_eigenvalues(&g).last().copied().unwrap_or(0.0)
}

pub fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|k| m.column(k).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse together with the 1-norm condition number measured against unit
/// scale, `max(‖A‖, 1)·‖A⁻¹‖`, so uniformly tiny matrices are flagged too.
pub fn inverse_with_condition(m: &CMatrix) -> Option<(CMatrix, f64)> {
    let inv = m.clone().lu().try_inverse()?;
    let cond = norm1(m).max(1.0) * norm1(&inv);
    if !cond.is_finite() {
        return None;
    }
    Some((inv, cond))
}

/// Rotates `v` so its first entry with non-negligible magnitude is real positive.
pub fn normalize_phase(v: &mut CVector) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-9 * scale).copied() {
        let rot = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= rot);
    }
}

/// Dominant eigenpair of a 2×2 Hermitian matrix [[p, q], [q*, r]].
pub fn dominant_eig2(p: f64, q: Complex64, r: f64) -> (f64, [Complex64; 2]) {
    let mean = 0.5 * (p + r);
    let half = 0.5 * (p - r);
    let rad = (half * half + q.norm_sqr()).sqrt();
    let lambda = mean + rad;
    if q.norm() <= 1e-300 {
        return if p >= r {
            (lambda, [ONE, ZERO])
        } else {
            (lambda, [ZERO, ONE])
        };
    }
    // (λ - r, q*) and (q, λ - p) both span the eigenspace; pick the larger one.
    let v1 = [c(lambda - r), q.conj()];
    let v2 = [q, c(lambda - p)];
    let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
    let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
    let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
    let n = n.sqrt();
    (lambda, [v[0] / n, v[1] / n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominant_eig2_matches_dense() {
        let q = Complex64::new(0.3, -0.7);
        let (lambda, v) = dominant_eig2(2.0, q, -1.0);
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0), q, q.conj(), c(-1.0)]);
        let vals = hermitian_eigenvalues(&m);
        assert!((lambda - vals[1]).abs() < 1e-14);
        let x = CVector::from_column_slice(&v);
        let r = &m * &x - &x * c(lambda);
        assert!(r.norm() < 1e-13);
    }

    #[test]
    fn dominant_eig2_diagonal() {
        let (l, v) = dominant_eig2(1.0, ZERO, 3.0);
        assert_eq!(l, 3.0);
        assert_eq!(v, [ZERO, ONE]);
    }

    #[test]
    fn phase_normalization_makes_first_entry_real() {
        let mut v = CVector::from_vec(vec![Complex64::new(0.0, 2.0), Complex64::new(1.0, 1.0)]);
        normalize_phase(&mut v);
        assert!(v[0].im.abs() < 1e-15 && v[0].re > 0.0);
        assert!((v[1] - Complex64::new(1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn condition_of_identity_is_one() {
        let (_, k) = inverse_with_condition(&identity(4)).unwrap();
        assert!((k - 1.0).abs() < 1e-15);
    }
}
