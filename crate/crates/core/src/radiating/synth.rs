//! Synthetic planar array that is lossless (or uniformly lossy) by construction.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{gram_of, AngularGrid, FarFieldPattern, RadiatingStructure};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_fn, identity, ZERO};
use crate::netcalc::WaveContext;

/// Spectral headroom kept below 1 so downstream Rayleigh denominators stay definite.
const HEADROOM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// Aperture-like field of an x-directed slot/patch: `(cos φ, -cos θ sin φ)`.
    #[default]
    LinearX,
    Theta,
    Phi,
}

impl Polarization {
    fn basis(self, theta: f64, phi: f64) -> [f64; 2] {
        match self {
            Polarization::LinearX => [phi.cos(), -theta.cos() * phi.sin()],
            Polarization::Theta => [1.0, 0.0],
            Polarization::Phi => [0.0, 1.0],
        }
    }
}

/// Element pattern `cos^q θ` on the front hemisphere, zero behind the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElementModel {
    pub exponent: f64,
    pub polarization: Polarization,
}

impl Default for ElementModel {
    fn default() -> Self {
        Self {
            exponent: 1.0,
            polarization: Polarization::LinearX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySpec {
    pub rows: usize,
    pub cols: usize,
    /// Element pitch in wavelengths.
    pub spacing: f64,
    pub element: ElementModel,
    /// Radiation efficiency in (0, 1].
    pub efficiency: f64,
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            spacing: 0.25,
            element: ElementModel::default(),
            efficiency: 1.0,
        }
    }
}

/// Element centres in wavelengths; the array lies in the xy-plane with
/// broadside along θ = 0. Row-major port order.
pub fn element_positions(rows: usize, cols: usize, spacing: f64) -> Vec<[f64; 2]> {
    let cx = (cols as f64 - 1.0) / 2.0;
    let cy = (rows as f64 - 1.0) / 2.0;
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| [(c as f64 - cx) * spacing, (r as f64 - cy) * spacing]))
        .collect()
}

/// Builds patterns from the element model, scales them so the Gram stays
/// strictly below identity, and closes the energy balance with the
/// Hermitian root `S_RR = (I - P)^{1/2}`; finally applies the efficiency.
/// The result satisfies `Gram = η (I - S_RRᴴ S_RR)` on `grid`.
pub fn synthesize_array(spec: &ArraySpec, ctx: &WaveContext, grid: Arc<AngularGrid>) -> Result<RadiatingStructure> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::Precondition("array needs at least one element".into()));
    }
    if !(spec.spacing > 0.0 && spec.spacing.is_finite()) {
        return Err(Error::Precondition(format!("spacing must be positive, got {}", spec.spacing)));
    }
    if !(spec.element.exponent >= 0.0 && spec.element.exponent.is_finite()) {
        return Err(Error::Precondition("element exponent must be >= 0".into()));
    }
    if !(spec.efficiency > 0.0 && spec.efficiency <= 1.0) {
        return Err(Error::Precondition(format!(
            "efficiency must lie in (0, 1], got {}",
            spec.efficiency
        )));
    }
    if (grid.total_weight() - 4.0 * PI).abs() > 1e-4 {
        return Err(Error::Precondition("grid too coarse for pattern integration".into()));
    }

    let q = spec.element.exponent;
    let pol = spec.element.polarization;
    let raw: Vec<FarFieldPattern> = element_positions(spec.rows, spec.cols, spec.spacing)
        .into_iter()
        .map(|[x, y]| {
            FarFieldPattern::from_fn(grid.clone(), |theta, phi| {
                let ct = theta.cos();
                if ct < -1e-12 {
                    return [ZERO; 2];
                }
                let amp = ct.max(0.0).powf(q);
                let st = theta.sin();
                let phase = 2.0 * PI * (x * st * phi.cos() + y * st * phi.sin());
                let e = Complex64::from_polar(amp, phase);
                let [bt, bp] = pol.basis(theta, phi);
                [e * bt, e * bp]
            })
        })
        .collect::<Result<_>>()?;

    let p_raw = gram_of(&raw)?;
    let eig = hermitian_eigenvalues(&p_raw);
    let lmax = *eig.last().expect("non-empty");
    if !(lmax > 0.0) {
        return Err(Error::Precondition("element patterns carry no power".into()));
    }
    if eig[0] < 1e-10 * lmax {
        log::warn!(
            "synthetic array Gram is numerically rank deficient (λmin/λmax = {:.2e})",
            eig[0] / lmax
        );
    }

    let scale = ((1.0 - HEADROOM) / lmax).sqrt();
    let p = &p_raw * Complex64::new(scale * scale, 0.0);
    let m = p.nrows();
    let s_rr = hermitian_fn(&(identity(m) - p), |x| x.max(0.0).sqrt());
    let eta = spec.efficiency.sqrt();
    let patterns = raw.iter().map(|r| r.scaled(scale * eta)).collect();
    RadiatingStructure::new(s_rr, patterns, *ctx)
}

/// Matched, uncoupled variant: the element patterns are orthonormalized
/// (`P_raw^{-1/2}` mixing), so `S_RR = 0` and `Gram = η (1 - ε) I`. Each port
/// then drives one far-field mode of the array aperture.
pub fn synthesize_decoupled(spec: &ArraySpec, ctx: &WaveContext, grid: Arc<AngularGrid>) -> Result<RadiatingStructure> {
    let coupled = synthesize_array(&ArraySpec { efficiency: 1.0, ..*spec }, ctx, grid.clone())?;
    let p = coupled.gram();
    let eig = hermitian_eigenvalues(p);
    let lmax = *eig.last().expect("non-empty");
    if eig[0] < 1e-12 * lmax {
        return Err(Error::Precondition(
            "element patterns are linearly dependent; cannot orthonormalize".into(),
        ));
    }
    let mix = hermitian_fn(p, |x| 1.0 / x.sqrt());
    let scale = ((1.0 - HEADROOM) * spec.efficiency).sqrt();
    let m = p.nrows();
    let patterns = (0..m)
        .map(|k| {
            let values = (0..grid.len())
                .map(|node| {
                    let mut e = [ZERO; 2];
                    for (j, pat) in coupled.patterns().iter().enumerate() {
                        let [a, b] = pat.at(node);
                        e[0] += a * mix[(j, k)] * scale;
                        e[1] += b * mix[(j, k)] * scale;
                    }
                    e
                })
                .collect();
            FarFieldPattern::new(grid.clone(), values)
        })
        .collect::<Result<_>>()?;
    RadiatingStructure::new(crate::linalg::CMatrix::zeros(m, m), patterns, *ctx)
}
