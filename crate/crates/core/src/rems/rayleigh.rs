//! Generalized Rayleigh quotients `4π‖F x‖² / xᴴ B x` with a 2×n field factor F.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{dominant_eig2, hermitian_eig, normalize_phase, CMatrix, CVector, ZERO};

/// Relative eigenvalue margin below which B counts as not positive definite.
pub const PD_MARGIN: f64 = 1e-12;

/// `B^{-1/2}` of a Hermitian positive-definite matrix.
pub fn inv_sqrt_pd(b: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eig(b);
    let lmax = vals.last().copied().unwrap_or(0.0);
    let lmin = vals.first().copied().unwrap_or(0.0);
    if !(lmax > 0.0) || lmin <= PD_MARGIN * lmax {
        return Err(Error::ActiveModel(format!(
            "power form is not positive definite (eigenvalues in [{lmin:.3e}, {lmax:.3e}])"
        )));
    }
    let mut scaled = vecs.clone();
    for (j, l) in vals.iter().enumerate() {
        let s = 1.0 / l.sqrt();
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    Ok(&scaled * vecs.adjoint())
}

#[derive(Debug, Clone)]
pub struct RayleighMax {
    /// Largest quotient value.
    pub value: f64,
    /// Maximizer with `x̂ᴴ B x̂ = 1`, first significant entry real positive.
    pub x: CVector,
}

/// Maximizes `4π‖F x‖² / xᴴ B x` given `W = F B^{-1/2}` (2×n) and `B^{-1/2}`.
///
/// `C = Wᴴ W` has rank ≤ 2, so its dominant eigenpair follows from the 2×2
/// matrix `W Wᴴ`: `λ = σ²`, `c₁ = Wᴴ u / σ`.
pub fn maximize_factored(w: &CMatrix, b_inv_sqrt: &CMatrix) -> RayleighMax {
    debug_assert_eq!(w.nrows(), 2);
    let mut p = 0.0;
    let mut r = 0.0;
    let mut q = ZERO;
    for k in 0..w.ncols() {
        let (w0, w1) = (w[(0, k)], w[(1, k)]);
        p += w0.norm_sqr();
        r += w1.norm_sqr();
        q += w0 * w1.conj();
    }
    let (sigma2, u) = dominant_eig2(p, q, r);
    let mut x = if sigma2 > 0.0 {
        let sigma = sigma2.sqrt();
        let c1 = CVector::from_fn(w.ncols(), |k, _| (w[(0, k)].conj() * u[0] + w[(1, k)].conj() * u[1]) / sigma);
        b_inv_sqrt * c1
    } else {
        // No field in this direction: every excitation is optimal.
        b_inv_sqrt.column(0).into_owned()
    };
    normalize_phase(&mut x);
    RayleighMax {
        value: 4.0 * PI * sigma2.max(0.0),
        x,
    }
}

/// Convenience wrapper taking F and B directly.
pub fn maximize(f: &CMatrix, b: &CMatrix) -> Result<RayleighMax> {
    if f.nrows() != 2 || f.ncols() != b.nrows() || !b.is_square() {
        return Err(Error::Precondition(format!(
            "field factor {}×{} does not match a {}×{} power form",
            f.nrows(),
            f.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let bis = inv_sqrt_pd(b)?;
    Ok(maximize_factored(&(f * &bis), &bis))
}

/// `4π‖F x‖² / xᴴ B x`.
pub fn quotient(f: &CMatrix, b: &CMatrix, x: &CVector) -> f64 {
    let num = (f * x).norm_squared();
    let den = x.dotc(&(b * x)).re;
    4.0 * PI * num / den
}
