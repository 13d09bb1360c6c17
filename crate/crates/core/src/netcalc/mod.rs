//! Multiport scattering-parameter algebra.
//!
//! Waves follow the power-wave convention: for a port with reference
//! impedance `Z = R + jX`,
//!
//! ```text
//! a = (v + Z i) / (2 sqrt(R)),   b = (v - Z* i) / (2 sqrt(R))
//! ```
//!
//! so that `|a|^2 - |b|^2` is the power accepted by the port.

mod circuit;

pub use circuit::{BlockId, Circuit};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, ONE, ZERO};

/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Tolerance on singular values used by [`classify`].
pub const CLASSIFY_TOL: f64 = 1e-9;
/// Interconnect reductions with a larger 1-norm condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Frequency-dependent free-space constants plus the circuit reference resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveContext {
    pub frequency: f64,
    pub wavenumber: f64,
    pub wavelength: f64,
    pub free_space_impedance: f64,
    pub r0: f64,
}

impl WaveContext {
    pub fn new(frequency: f64, r0: f64) -> Result<Self> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::Precondition(format!(
                "frequency must be positive, got {frequency}"
            )));
        }
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::Precondition(format!(
                "reference resistance must be positive, got {r0}"
            )));
        }
        let speed = (MU0 * EPS0).sqrt();
        Ok(Self {
            frequency,
            wavenumber: 2.0 * PI * frequency * speed,
            wavelength: 1.0 / (speed * frequency),
            free_space_impedance: (MU0 / EPS0).sqrt(),
            r0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortSpec {
    pub z_ref: Complex64,
    pub label: String,
}

impl PortSpec {
    pub fn new(z_ref: Complex64, label: impl Into<String>) -> Self {
        Self {
            z_ref,
            label: label.into(),
        }
    }

    pub fn real(r: f64, label: impl Into<String>) -> Self {
        Self::new(c(r), label)
    }

    fn same_reference(&self, other: &PortSpec) -> bool {
        let scale = self.z_ref.norm().max(other.z_ref.norm());
        (self.z_ref - other.z_ref).norm() <= 1e-12 * scale
    }
}

/// Scattering matrix together with its port references and frequency.
#[derive(Debug, Clone)]
pub struct MultiportNetwork {
    s: CMatrix,
    ports: Vec<PortSpec>,
    ctx: WaveContext,
}

impl MultiportNetwork {
    pub fn new(s: CMatrix, ports: Vec<PortSpec>, ctx: WaveContext) -> Result<Self> {
        if s.nrows() != s.ncols() || s.nrows() == 0 {
            return Err(Error::Precondition(format!(
                "scattering matrix must be square and non-empty, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        if ports.len() != s.nrows() {
            return Err(Error::Precondition(format!(
                "{} port specs for a {}-port matrix",
                ports.len(),
                s.nrows()
            )));
        }
        if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Precondition("non-finite scattering entry".into()));
        }
        check_references(&ports)?;
        Ok(Self { s, ports, ctx })
    }

    /// Network whose ports all share one real reference resistance.
    pub fn with_reference(s: CMatrix, r_ref: f64, ctx: WaveContext) -> Result<Self> {
        let ports = (0..s.nrows())
            .map(|k| PortSpec::real(r_ref, format!("p{}", k + 1)))
            .collect();
        Self::new(s, ports, ctx)
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    pub fn into_s(self) -> CMatrix {
        self.s
    }

    pub fn ports(&self) -> &[PortSpec] {
        &self.ports
    }

    pub fn context(&self) -> &WaveContext {
        &self.ctx
    }

    pub fn port_count(&self) -> usize {
        self.ports.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.s[(i, j)]
    }

    pub fn relabel(mut self, labels: &[&str]) -> Self {
        for (p, l) in self.ports.iter_mut().zip(labels) {
            p.label = (*l).to_string();
        }
        self
    }

    /// Reorders ports so that new port `k` is old port `order[k]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let n = self.port_count();
        let mut seen = vec![false; n];
        for &o in order {
            if o >= n || std::mem::replace(&mut seen[o], true) {
                return Err(Error::Precondition(format!(
                    "{order:?} is not a permutation of 0..{n}"
                )));
            }
        }
        if order.len() != n {
            return Err(Error::Precondition(format!(
                "{order:?} is not a permutation of 0..{n}"
            )));
        }
        let s = CMatrix::from_fn(n, n, |i, j| self.s[(order[i], order[j])]);
        let ports = order.iter().map(|&o| self.ports[o].clone()).collect();
        Ok(Self {
            s,
            ports,
            ctx: self.ctx,
        })
    }

    /// Block-diagonal stack of unconnected networks; ports keep their order.
    pub fn stack(networks: &[&MultiportNetwork]) -> Result<Self> {
        let first = networks
            .first()
            .ok_or_else(|| Error::Precondition("cannot stack zero networks".into()))?;
        let n: usize = networks.iter().map(|m| m.port_count()).sum();
        let mut s = CMatrix::zeros(n, n);
        let mut ports = Vec::with_capacity(n);
        let mut offset = 0;
        for net in networks {
            if (net.ctx.frequency - first.ctx.frequency).abs() > 1e-9 * first.ctx.frequency {
                return Err(Error::Precondition(
                    "stacked networks are characterized at different frequencies".into(),
                ));
            }
            let k = net.port_count();
            s.view_mut((offset, offset), (k, k)).copy_from(&net.s);
            ports.extend(net.ports.iter().cloned());
            offset += k;
        }
        Ok(Self {
            s,
            ports,
            ctx: first.ctx,
        })
    }
}

fn check_references(ports: &[PortSpec]) -> Result<()> {
    match ports.iter().find(|p| !(p.z_ref.re > 0.0) || !p.z_ref.im.is_finite()) {
        Some(p) => Err(Error::Precondition(format!(
            "port '{}' has reference impedance {} with non-positive real part",
            p.label, p.z_ref
        ))),
        None => Ok(()),
    }
}

/// Converts an impedance matrix to scattering parameters at the given references.
pub fn convert_z_s(z: &CMatrix, ports: Vec<PortSpec>, ctx: WaveContext) -> Result<MultiportNetwork> {
    let n = z.nrows();
    if z.ncols() != n || ports.len() != n {
        return Err(Error::Precondition("impedance matrix and port list disagree".into()));
    }
    check_references(&ports)?;
    let g = CMatrix::from_diagonal(&ports.iter().map(|p| p.z_ref).collect::<Vec<_>>().into());
    let g_conj = g.map(|x| x.conj());
    let f: Vec<f64> = ports.iter().map(|p| 0.5 / p.z_ref.re.sqrt()).collect();
    let denom = (z + &g)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateNetwork("Z + Z_ref is singular".into()))?;
    let inner = (z - g_conj) * denom;
    let s = CMatrix::from_fn(n, n, |i, j| inner[(i, j)] * (f[i] / f[j]));
    MultiportNetwork::new(s, ports, ctx)
}

/// Impedance matrix of a network; fails for networks without one (e.g. an open).
pub fn s_to_z(net: &MultiportNetwork) -> Result<CMatrix> {
    let n = net.port_count();
    let f: Vec<f64> = net.ports.iter().map(|p| 0.5 / p.z_ref.re.sqrt()).collect();
    let sp = CMatrix::from_fn(n, n, |i, j| net.s[(i, j)] * (f[j] / f[i]));
    let g: Vec<Complex64> = net.ports.iter().map(|p| p.z_ref).collect();
    let inv = (linalg::identity(n) - &sp)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateNetwork("I - S is singular".into()))?;
    let rhs = CMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { g[i].conj() } else { ZERO };
        diag + sp[(i, j)] * g[j]
    });
    Ok(inv * rhs)
}

/// Re-expresses the same physical network at new reference impedances.
pub fn renormalize(net: &MultiportNetwork, new_ports: Vec<PortSpec>) -> Result<MultiportNetwork> {
    let n = net.port_count();
    if new_ports.len() != n {
        return Err(Error::Precondition(format!(
            "{} new references for a {}-port network",
            new_ports.len(),
            n
        )));
    }
    check_references(&new_ports)?;
    // Per port: a2 = alpha a1 + beta b1, b2 = gamma a1 + delta b1.
    let mut alpha = vec![ZERO; n];
    let mut beta = vec![ZERO; n];
    let mut gamma = vec![ZERO; n];
    let mut delta = vec![ZERO; n];
    for k in 0..n {
        let z1 = net.ports[k].z_ref;
        let z2 = new_ports[k].z_ref;
        let scale = c(0.5 / (z1.re * z2.re).sqrt());
        alpha[k] = (z1.conj() + z2) * scale;
        beta[k] = (z1 - z2) * scale;
        gamma[k] = (z1.conj() - z2.conj()) * scale;
        delta[k] = (z1 + z2.conj()) * scale;
    }
    let left = CMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { alpha[i] } else { ZERO };
        d + beta[i] * net.s[(i, j)]
    });
    let right = CMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { gamma[i] } else { ZERO };
        d + delta[i] * net.s[(i, j)]
    });
    let inv = left
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateNetwork("singular renormalization".into()))?;
    MultiportNetwork::new(right * inv, new_ports, net.ctx)
}

/// Joins port pairs (`a_p = b_q`, `a_q = b_p`) and returns the network seen
/// at the remaining ports, in their original order.
pub fn interconnect(net: &MultiportNetwork, pairs: &[(usize, usize)]) -> Result<MultiportNetwork> {
    let n = net.port_count();
    let mut role = vec![None::<usize>; n];
    for (k, &(p, q)) in pairs.iter().enumerate() {
        for port in [p, q] {
            if port >= n {
                return Err(Error::InvalidPort { port, count: n });
            }
            if role[port].is_some() {
                return Err(Error::Precondition(format!("port {port} is joined twice")));
            }
            role[port] = Some(k);
        }
        if p == q {
            return Err(Error::Precondition(format!("port {p} joined to itself")));
        }
        if !net.ports[p].same_reference(&net.ports[q]) {
            return Err(Error::Precondition(format!(
                "ports {p} ({}) and {q} ({}) have different reference impedances",
                net.ports[p].z_ref, net.ports[q].z_ref
            )));
        }
    }
    let external: Vec<usize> = (0..n).filter(|&k| role[k].is_none()).collect();
    let internal: Vec<usize> = pairs.iter().flat_map(|&(p, q)| [p, q]).collect();
    if external.is_empty() {
        return Err(Error::Precondition("interconnect leaves no external port".into()));
    }
    let ne = external.len();
    let ni = internal.len();

    // a_I = P b_I with P swapping partners; (I - P S_II) a_I = P S_IE a_E.
    let partner = |k: usize| if k.is_multiple_of(2) { k + 1 } else { k - 1 };
    let system = CMatrix::from_fn(ni, ni, |i, j| {
        let d = if i == j { ONE } else { ZERO };
        d - net.s[(internal[partner(i)], internal[j])]
    });
    let rhs = CMatrix::from_fn(ni, ne, |i, j| net.s[(internal[partner(i)], external[j])]);
    let (inv, cond) = linalg::inverse_with_condition(&system)
        .ok_or(Error::IllConditionedInterconnect { cond: f64::INFINITY })?;
    if cond > MAX_CONDITION {
        return Err(Error::IllConditionedInterconnect { cond });
    }
    let a_internal = inv * rhs;
    let s_ei = CMatrix::from_fn(ne, ni, |i, j| net.s[(external[i], internal[j])]);
    let s_ee = CMatrix::from_fn(ne, ne, |i, j| net.s[(external[i], external[j])]);
    let s = s_ee + s_ei * a_internal;
    let ports = external.iter().map(|&k| net.ports[k].clone()).collect();
    MultiportNetwork::new(s, ports, net.ctx)
}

/// Terminates `port` in a load with the given reflection coefficient
/// (referred to that port's reference impedance).
pub fn terminate(net: &MultiportNetwork, port: usize, reflection: Complex64) -> Result<MultiportNetwork> {
    let n = net.port_count();
    if port >= n {
        return Err(Error::InvalidPort { port, count: n });
    }
    if reflection.norm() > 1.0 + 1e-9 {
        return Err(Error::Precondition(format!(
            "termination |reflection| = {} exceeds 1",
            reflection.norm()
        )));
    }
    if n == 1 {
        return Err(Error::Precondition("terminating the only port".into()));
    }
    let loop_gain = ONE - net.s[(port, port)] * reflection;
    if loop_gain.norm() < 1.0 / MAX_CONDITION {
        return Err(Error::IllConditionedInterconnect {
            cond: 1.0 / loop_gain.norm(),
        });
    }
    let keep: Vec<usize> = (0..n).filter(|&k| k != port).collect();
    let factor = reflection / loop_gain;
    let s = CMatrix::from_fn(n - 1, n - 1, |i, j| {
        let (i, j) = (keep[i], keep[j]);
        net.s[(i, j)] + net.s[(i, port)] * factor * net.s[(port, j)]
    });
    let ports = keep.iter().map(|&k| net.ports[k].clone()).collect();
    MultiportNetwork::new(s, ports, net.ctx)
}

/// Physical-property classification with measured deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub passive: bool,
    pub lossless: bool,
    pub reciprocal: bool,
    /// λ_max(S^H S) − 1; positive values indicate power gain.
    pub passivity_excess: f64,
    /// ‖S^H S − I‖₂.
    pub lossless_deviation: f64,
    /// max |S_ij − S_ji|.
    pub reciprocity_deviation: f64,
}

pub fn classify(net: &MultiportNetwork) -> Classification {
    let s = &net.s;
    let gram = s.ad_mul(s);
    let eig = linalg::hermitian_eigenvalues(&gram);
    let lmax = eig.last().copied().unwrap_or(0.0);
    let lmin = eig.first().copied().unwrap_or(0.0);
    let passivity_excess = lmax - 1.0;
    let lossless_deviation = (lmax - 1.0).abs().max((lmin - 1.0).abs());
    let reciprocity_deviation = (s - s.transpose())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Classification {
        passive: passivity_excess <= CLASSIFY_TOL,
        lossless: lossless_deviation <= CLASSIFY_TOL,
        reciprocal: reciprocity_deviation <= CLASSIFY_TOL,
        passivity_excess,
        lossless_deviation,
        reciprocity_deviation,
    }
}
