//! Far-field patterns on a sampled sphere and the radiating structure
//! (port coupling plus one embedded pattern per port).
//!
//! Patterns are stored as outgoing power-wave fields `E / sqrt(Z0)` in the
//! (θ̂, φ̂) basis, so `‖e‖²` integrated over the sphere is radiated power.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, identity, CMatrix, CVector, ZERO};
use crate::netcalc::{PortSpec, WaveContext};

mod pattern_csv;
mod synth;
mod touchstone;

pub use pattern_csv::{load_patterns, parse_patterns, write_patterns, LoadedPatterns};
pub use synth::{element_positions, synthesize_array, synthesize_decoupled, ArraySpec, ElementModel, Polarization};
pub use touchstone::{format_touchstone, load_touchstone, parse_touchstone, write_touchstone, DataFormat, Touchstone};

/// Slack allowed when checking `Gram ⪯ I - S_RRᴴ S_RR`.
pub const PASSIVITY_TOL: f64 = 1e-6;

/// Uniform θ/φ grid over the full sphere with exact cell-area weights.
///
/// Node (i, j) sits at θ = i·h, φ = j·h. Its weight is the solid angle of
/// the band `[θ - h/2, θ + h/2] ∩ [0, π]` times Δφ, so the weights sum to 4π
/// up to rounding. Pole rows repeat the pole once per φ with tiny weights.
#[derive(Debug, Clone)]
pub struct AngularGrid {
    step_deg: f64,
    n_theta: usize,
    n_phi: usize,
    row_weight: Vec<f64>,
}

impl PartialEq for AngularGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_theta == other.n_theta && self.n_phi == other.n_phi
    }
}

impl AngularGrid {
    pub fn new(step_deg: f64) -> Result<Self> {
        let per_half = 180.0 / step_deg;
        if !(step_deg > 0.0) || (per_half - per_half.round()).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "grid step must divide 180°, got {step_deg}°"
            )));
        }
        let n = per_half.round() as usize;
        let h = step_deg.to_radians();
        let dphi = 2.0 * PI / (2 * n) as f64;
        let row_weight = (0..=n)
            .map(|i| {
                let t = i as f64 * h;
                let lo = (t - h / 2.0).max(0.0);
                let hi = (t + h / 2.0).min(PI);
                dphi * (lo.cos() - hi.cos())
            })
            .collect();
        Ok(Self {
            step_deg,
            n_theta: n + 1,
            n_phi: 2 * n,
            row_weight,
        })
    }

    /// 1° × 1° integration grid.
    pub fn standard() -> Self {
        Self::new(1.0).expect("1° divides 180°")
    }

    pub fn step_deg(&self) -> f64 {
        self.step_deg
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i_theta: usize, i_phi: usize) -> usize {
        i_theta * self.n_phi + i_phi
    }

    pub fn indices(&self, node: usize) -> (usize, usize) {
        (node / self.n_phi, node % self.n_phi)
    }

    /// (θ, φ) in radians.
    pub fn angles(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.indices(node);
        let h = self.step_deg.to_radians();
        (i as f64 * h, j as f64 * h)
    }

    /// (θ, φ) in degrees.
    pub fn angles_deg(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.indices(node);
        (i as f64 * self.step_deg, j as f64 * self.step_deg)
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.row_weight[node / self.n_phi]
    }

    pub fn total_weight(&self) -> f64 {
        self.row_weight.iter().sum::<f64>() * self.n_phi as f64
    }

    /// Nearest node to a direction given in degrees, plus the snapping
    /// distance `max(|Δθ|, |Δφ|)` in degrees.
    pub fn nearest(&self, theta_deg: f64, phi_deg: f64) -> Result<(usize, f64)> {
        if !(0.0..=180.0 + 1e-9).contains(&theta_deg) || !phi_deg.is_finite() {
            return Err(Error::Precondition(format!(
                "direction (θ={theta_deg}°, φ={phi_deg}°) is off the sphere"
            )));
        }
        let i = ((theta_deg / self.step_deg).round() as usize).min(self.n_theta - 1);
        let phi = phi_deg.rem_euclid(360.0);
        let jf = (phi / self.step_deg).round();
        let j = jf as usize % self.n_phi;
        let dt = (theta_deg - i as f64 * self.step_deg).abs();
        let dp = (phi - jf * self.step_deg).abs();
        Ok((self.node(i, j), dt.max(dp)))
    }

    /// Nodes with θ ≤ `max_theta_deg` on a coarser sub-lattice of spacing
    /// `step_deg`, ordered by (θ, φ).
    pub fn subset(&self, step_deg: f64, max_theta_deg: f64) -> Result<Vec<usize>> {
        let ratio = step_deg / self.step_deg;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "map step {step_deg}° is not a multiple of the grid step {}°",
                self.step_deg
            )));
        }
        let r = ratio.round() as usize;
        let mut nodes = Vec::new();
        for i in (0..self.n_theta).step_by(r) {
            if i as f64 * self.step_deg > max_theta_deg + 1e-9 {
                break;
            }
            for j in (0..self.n_phi).step_by(r) {
                nodes.push(self.node(i, j));
            }
        }
        Ok(nodes)
    }

    /// Upper hemisphere θ ≤ 90° at the given step.
    pub fn hemisphere(&self, step_deg: f64) -> Result<Vec<usize>> {
        self.subset(step_deg, 90.0)
    }
}

/// Sampled (θ̂, φ̂) field of one port on a shared grid.
#[derive(Debug, Clone)]
pub struct FarFieldPattern {
    grid: Arc<AngularGrid>,
    values: Vec<[Complex64; 2]>,
}

impl FarFieldPattern {
    pub fn new(grid: Arc<AngularGrid>, values: Vec<[Complex64; 2]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "pattern has {} samples, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().flatten().any(|z| !z.is_finite()) {
            return Err(Error::Precondition("pattern contains non-finite samples".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<AngularGrid>, f: impl Fn(f64, f64) -> [Complex64; 2]) -> Result<Self> {
        let values = (0..grid.len())
            .map(|n| {
                let (t, p) = grid.angles(n);
                f(t, p)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<AngularGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[[Complex64; 2]] {
        &self.values
    }

    pub fn at(&self, node: usize) -> [Complex64; 2] {
        self.values[node]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|[a, b]| [a * k, b * k]).collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        l2_inner(self, self).expect("same grid").re
    }
}

/// `∑ w · pᴴ q` over all grid nodes.
pub fn l2_inner(p: &FarFieldPattern, q: &FarFieldPattern) -> Result<Complex64> {
    if p.grid != q.grid {
        return Err(Error::GridMismatch);
    }
    let g = &p.grid;
    let mut acc = ZERO;
    for (i, w) in g.row_weight.iter().enumerate() {
        let mut row = ZERO;
        for n in i * g.n_phi..(i + 1) * g.n_phi {
            let [a, b] = p.values[n];
            let [c, d] = q.values[n];
            row += a.conj() * c + b.conj() * d;
        }
        acc += row * *w;
    }
    Ok(acc)
}

/// Gram matrix `P_mn = ⟨e_m, e_n⟩` of a pattern set.
pub fn gram_of(patterns: &[FarFieldPattern]) -> Result<CMatrix> {
    let Some(first) = patterns.first() else {
        return Ok(CMatrix::zeros(0, 0));
    };
    if patterns.iter().any(|p| p.grid != first.grid) {
        return Err(Error::GridMismatch);
    }
    let g = &first.grid;
    // Weighted sample matrix A (2·nodes × M) so that P = Aᴴ A.
    let rows = 2 * g.len();
    let a = CMatrix::from_fn(rows, patterns.len(), |r, m| {
        let node = r / 2;
        patterns[m].values[node][r % 2] * g.weight(node).sqrt()
    });
    let p = a.ad_mul(&a);
    Ok((&p + p.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Antenna array: coupling `S_RR` at the ports and per-port far fields.
#[derive(Debug, Clone)]
pub struct RadiatingStructure {
    s_rr: CMatrix,
    patterns: Vec<FarFieldPattern>,
    gram: CMatrix,
    ports: Vec<PortSpec>,
    ctx: WaveContext,
}

impl RadiatingStructure {
    /// Validates shapes and passivity; ports are referenced to `ctx.r0`.
    pub fn new(s_rr: CMatrix, patterns: Vec<FarFieldPattern>, ctx: WaveContext) -> Result<Self> {
        let m = s_rr.nrows();
        if m == 0 || s_rr.ncols() != m || patterns.len() != m {
            return Err(Error::Precondition(format!(
                "coupling matrix is {}×{} with {} patterns",
                s_rr.nrows(),
                s_rr.ncols(),
                patterns.len()
            )));
        }
        if s_rr.iter().any(|z| !z.is_finite()) {
            return Err(Error::Precondition("coupling matrix has non-finite entries".into()));
        }
        let gram = gram_of(&patterns)?;
        let slack = identity(m) - s_rr.ad_mul(&s_rr) - &gram;
        let lmin = hermitian_eigenvalues(&slack)[0];
        if lmin < -PASSIVITY_TOL {
            return Err(Error::NonPassiveStructure { excess: -lmin });
        }
        let ports = (0..m).map(|k| PortSpec::real(ctx.r0, format!("ant-{}", k + 1))).collect();
        Ok(Self {
            s_rr,
            patterns,
            gram,
            ports,
            ctx,
        })
    }

    pub fn s_rr(&self) -> &CMatrix {
        &self.s_rr
    }

    pub fn patterns(&self) -> &[FarFieldPattern] {
        &self.patterns
    }

    /// L² Gram of the patterns, Hermitian.
    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn ports(&self) -> &[PortSpec] {
        &self.ports
    }

    pub fn context(&self) -> &WaveContext {
        &self.ctx
    }

    pub fn port_count(&self) -> usize {
        self.s_rr.nrows()
    }

    pub fn grid(&self) -> &Arc<AngularGrid> {
        self.patterns[0].grid()
    }

    /// 2×M slice of the transmitting operator at one direction.
    pub fn field_matrix(&self, node: usize) -> CMatrix {
        CMatrix::from_fn(2, self.port_count(), |p, m| self.patterns[m].values[node][p])
    }

    /// Far field produced by incident port waves `a_R`.
    pub fn radiate(&self, a_r: &CVector) -> FarFieldPattern {
        let values = (0..self.grid().len())
            .map(|n| {
                let mut e = [ZERO; 2];
                for (m, p) in self.patterns.iter().enumerate() {
                    e[0] += p.values[n][0] * a_r[m];
                    e[1] += p.values[n][1] * a_r[m];
                }
                e
            })
            .collect();
        FarFieldPattern {
            grid: self.grid().clone(),
            values,
        }
    }
}
