//! The assembled transmitter: PA frontend, tuning network and radiating
//! structure, with its signal-flow solution, power metrics and gains.
//!
//! Wave naming at the two interfaces: `a_T` enters the tuning network from
//! the PAs and `b_T` returns; `a_R` enters the antennas and `b_R` returns.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::components::{frontend_matrices, FrontendMatrices};
use crate::error::{Error, Result};
use crate::linalg::{c, identity, inverse_with_condition, CMatrix, CVector};
use crate::netcalc::{classify, MultiportNetwork, WaveContext, MAX_CONDITION};
use crate::radiating::{FarFieldPattern, RadiatingStructure};

mod map;
pub mod rayleigh;

pub use map::{gain_map, write_gain_map, GainMap, MapHole, MapRow};

/// Powers below this are treated as zero when forming ratios (W).
pub const POWER_FLOOR: f64 = 1e-18;

/// PA Thévenin output impedances.
#[derive(Debug, Clone, PartialEq)]
pub struct RfFrontend {
    z_tx: Vec<Complex64>,
}

impl RfFrontend {
    pub fn new(z_tx: Vec<Complex64>) -> Result<Self> {
        if z_tx.is_empty() {
            return Err(Error::Precondition("frontend needs at least one PA".into()));
        }
        if let Some(z) = z_tx.iter().find(|z| !(z.re > 0.0) || !z.is_finite()) {
            return Err(Error::Precondition(format!(
                "PA output impedance {z} must have positive real part"
            )));
        }
        Ok(Self { z_tx })
    }

    pub fn uniform(n: usize, z: Complex64) -> Result<Self> {
        Self::new(vec![z; n])
    }

    pub fn z_tx(&self) -> &[Complex64] {
        &self.z_tx
    }

    pub fn len(&self) -> usize {
        self.z_tx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_tx.is_empty()
    }

    /// `P_A = ¼ Σ |v_i|² / Re Z_i`.
    pub fn available_power(&self, v: &CVector) -> f64 {
        self.z_tx.iter().zip(v.iter()).map(|(z, v)| v.norm_sqr() / z.re).sum::<f64>() / 4.0
    }
}

/// Tuning network with its first `n` ports facing the PAs.
#[derive(Debug, Clone)]
pub struct TuningNetwork {
    net: MultiportNetwork,
    n: usize,
    passivity_excess: f64,
}

impl TuningNetwork {
    pub fn new(net: MultiportNetwork, pa_ports: usize) -> Result<Self> {
        if pa_ports == 0 || pa_ports >= net.port_count() {
            return Err(Error::Precondition(format!(
                "cannot split a {}-port tuning network into {pa_ports} PA ports plus antenna ports",
                net.port_count()
            )));
        }
        let r0 = net.context().r0;
        if net.ports().iter().any(|p| (p.z_ref - c(r0)).norm() > 1e-12 * r0) {
            return Err(Error::Precondition(format!(
                "tuning network ports must all be referenced to {r0} Ω"
            )));
        }
        let passivity_excess = classify(&net).passivity_excess;
        if passivity_excess > 1e-9 {
            log::warn!("tuning network is active (excess {passivity_excess:.3e})");
        }
        Ok(Self {
            net,
            n: pa_ports,
            passivity_excess,
        })
    }

    /// `[[0, I], [I, 0]]`: PA i wired straight to antenna i.
    pub fn feedthrough(n: usize, ctx: WaveContext) -> Result<Self> {
        let mut s = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            s[(i, n + i)] = c(1.0);
            s[(n + i, i)] = c(1.0);
        }
        Self::new(MultiportNetwork::with_reference(s, ctx.r0, ctx)?, n)
    }

    pub fn network(&self) -> &MultiportNetwork {
        &self.net
    }

    pub fn pa_ports(&self) -> usize {
        self.n
    }

    pub fn antenna_ports(&self) -> usize {
        self.net.port_count() - self.n
    }

    pub fn passivity_excess(&self) -> f64 {
        self.passivity_excess
    }

    fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> CMatrix {
        self.net.s().view((rows.start, cols.start), (rows.len(), cols.len())).into_owned()
    }

    pub fn s_tt(&self) -> CMatrix {
        self.block(0..self.n, 0..self.n)
    }

    pub fn s_tr(&self) -> CMatrix {
        let total = self.net.port_count();
        self.block(0..self.n, self.n..total)
    }

    pub fn s_rt(&self) -> CMatrix {
        let total = self.net.port_count();
        self.block(self.n..total, 0..self.n)
    }

    pub fn s_rr(&self) -> CMatrix {
        let total = self.net.port_count();
        self.block(self.n..total, self.n..total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GainLevel {
    /// Whole transmitter, normalized by PA available power.
    Rems,
    /// Tuning network plus antennas, normalized by accepted power `P_T`.
    Tuning,
    /// Antennas alone, normalized by accepted power `P_R`.
    Radiating,
}

impl GainLevel {
    pub const ALL: [GainLevel; 3] = [GainLevel::Rems, GainLevel::Tuning, GainLevel::Radiating];
}

#[derive(Debug, Clone)]
pub struct RemsModel {
    frontend: RfFrontend,
    tuning: TuningNetwork,
    radiating: Arc<RadiatingStructure>,
}

impl RemsModel {
    pub fn new(frontend: RfFrontend, tuning: TuningNetwork, radiating: Arc<RadiatingStructure>) -> Result<Self> {
        if frontend.len() != tuning.pa_ports() {
            return Err(Error::Precondition(format!(
                "{} PAs but the tuning network has {} PA-side ports",
                frontend.len(),
                tuning.pa_ports()
            )));
        }
        if tuning.antenna_ports() != radiating.port_count() {
            return Err(Error::Precondition(format!(
                "tuning network drives {} antenna ports, structure has {}",
                tuning.antenna_ports(),
                radiating.port_count()
            )));
        }
        let (rt, rr) = (tuning.network().context().r0, radiating.context().r0);
        if (rt - rr).abs() > 1e-12 * rr {
            return Err(Error::Precondition(format!(
                "tuning network at {rt} Ω, radiating structure at {rr} Ω"
            )));
        }
        Ok(Self {
            frontend,
            tuning,
            radiating,
        })
    }

    pub fn frontend(&self) -> &RfFrontend {
        &self.frontend
    }

    pub fn tuning(&self) -> &TuningNetwork {
        &self.tuning
    }

    pub fn radiating(&self) -> &Arc<RadiatingStructure> {
        &self.radiating
    }

    pub fn context(&self) -> &WaveContext {
        self.radiating.context()
    }

    pub fn r0(&self) -> f64 {
        self.context().r0
    }

    pub fn pa_count(&self) -> usize {
        self.frontend.len()
    }

    pub fn antenna_count(&self) -> usize {
        self.radiating.port_count()
    }

    /// Nearest grid node to a direction in degrees, with snap distance.
    pub fn node_for(&self, theta_deg: f64, phi_deg: f64) -> Result<(usize, f64)> {
        self.radiating.grid().nearest(theta_deg, phi_deg)
    }
}

fn checked_inverse(m: &CMatrix) -> Result<CMatrix> {
    match inverse_with_condition(m) {
        Some((inv, cond)) if cond <= MAX_CONDITION => Ok(inv),
        Some((_, cond)) => Err(Error::ResonantModel { cond }),
        None => Err(Error::ResonantModel { cond: f64::INFINITY }),
    }
}

/// Linear maps of the assembled model, computed once.
#[derive(Debug, Clone)]
pub struct Operators {
    pub l1: CMatrix,
    pub l2: CMatrix,
    pub l3: CMatrix,
    pub frontend: FrontendMatrices,
    /// `b_T = G_aT_bT a_T`.
    pub g_at_bt: CMatrix,
    /// `a_R = G_aT_aR a_T`; the far-field operator is `S_FR G_aT_aR`.
    pub g_at_ar: CMatrix,
    /// `a_T = G_v_aT v_Tx`.
    pub g_v_at: CMatrix,
    /// `a_R = H v_Tx`; the far-field operator is `S_FR H`.
    pub h_v_ar: CMatrix,
    radiating: Arc<RadiatingStructure>,
    z_tx: Vec<Complex64>,
}

impl Operators {
    pub fn assemble(model: &RemsModel) -> Result<Self> {
        let t = &model.tuning;
        let (s_tt, s_tr, s_rt, s_trr) = (t.s_tt(), t.s_tr(), t.s_rt(), t.s_rr());
        let s_rr = model.radiating.s_rr();
        let n = model.pa_count();
        let m = model.antenna_count();
        let fe = frontend_matrices(model.frontend.z_tx(), model.r0())?;

        let l2 = &s_trr * s_rr;
        let inv_l2 = checked_inverse(&(identity(m) - &l2))?;
        let g_at_ar = &inv_l2 * &s_rt;
        let l1 = &fe.s_rf * &s_tt;
        let l3 = &fe.s_rf * &s_tr * s_rr * &g_at_ar;
        let g_at_bt = &s_tt + &s_tr * s_rr * &g_at_ar;
        let g_v_at = checked_inverse(&(identity(n) - &l1 - &l3))? * &fe.k;
        let h_v_ar = &g_at_ar * &g_v_at;
        Ok(Self {
            l1,
            l2,
            l3,
            frontend: fe,
            g_at_bt,
            g_at_ar,
            g_v_at,
            h_v_ar,
            radiating: model.radiating.clone(),
            z_tx: model.frontend.z_tx().to_vec(),
        })
    }

    pub fn radiating(&self) -> &Arc<RadiatingStructure> {
        &self.radiating
    }

    /// Maps the level's excitation to antenna incident waves `a_R`.
    pub fn to_antennas(&self, level: GainLevel) -> CMatrix {
        match level {
            GainLevel::Rems => self.h_v_ar.clone(),
            GainLevel::Tuning => self.g_at_ar.clone(),
            GainLevel::Radiating => identity(self.radiating.port_count()),
        }
    }

    /// 2×n factor with `a_F(node) = F x` for the level's excitation x.
    pub fn field_factor(&self, level: GainLevel, node: usize) -> CMatrix {
        let f = self.radiating.field_matrix(node);
        match level {
            GainLevel::Rems => f * &self.h_v_ar,
            GainLevel::Tuning => f * &self.g_at_ar,
            GainLevel::Radiating => f,
        }
    }

    /// Hermitian form B with `x^H B x` the level's reference power.
    pub fn power_form(&self, level: GainLevel) -> CMatrix {
        match level {
            GainLevel::Rems => {
                let n = self.z_tx.len();
                CMatrix::from_fn(n, n, |i, j| if i == j { c(0.25 / self.z_tx[i].re) } else { c(0.0) })
            }
            GainLevel::Tuning => identity(self.g_at_bt.ncols()) - self.g_at_bt.ad_mul(&self.g_at_bt),
            GainLevel::Radiating => {
                let s = self.radiating.s_rr();
                identity(s.ncols()) - s.ad_mul(s)
            }
        }
    }

    /// All interface waves for an excitation at `level`.
    pub fn waves(&self, level: GainLevel, x: &CVector) -> Waves {
        let s_rr = self.radiating.s_rr();
        match level {
            GainLevel::Rems | GainLevel::Tuning => {
                let a_t = if level == GainLevel::Rems { &self.g_v_at * x } else { x.clone() };
                let b_t = &self.g_at_bt * &a_t;
                let a_r = &self.g_at_ar * &a_t;
                let b_r = s_rr * &a_r;
                Waves {
                    v_tx: (level == GainLevel::Rems).then(|| x.clone()),
                    a_t: Some(a_t),
                    b_t: Some(b_t),
                    a_r,
                    b_r,
                }
            }
            GainLevel::Radiating => Waves {
                v_tx: None,
                a_t: None,
                b_t: None,
                b_r: s_rr * x,
                a_r: x.clone(),
            },
        }
    }

    /// Gain and power breakdown of excitation `x` at `level` toward `node`.
    pub fn gain_at(&self, level: GainLevel, x: &CVector, node: usize) -> Result<GainResult> {
        let expected = match level {
            GainLevel::Radiating => self.radiating.port_count(),
            _ => self.z_tx.len(),
        };
        if x.len() != expected {
            return Err(Error::Precondition(format!(
                "{level:?} excitation needs {expected} entries, got {}",
                x.len()
            )));
        }
        let w = self.waves(level, x);
        let powers = PowerMetrics::from_waves(&w, &self.z_tx, &self.radiating);
        let f = self.radiating.field_matrix(node);
        let intensity = (f * &w.a_r).norm_squared();
        let reference = match level {
            GainLevel::Rems => powers.p_a,
            GainLevel::Tuning => powers.p_t,
            GainLevel::Radiating => Some(powers.p_r),
        }
        .unwrap_or(0.0);
        if !(reference > 0.0) {
            return Err(Error::DegenerateExcitation(format!(
                "{level:?} reference power is {reference:.3e} W"
            )));
        }
        Ok(GainResult {
            level,
            gain: 4.0 * PI * intensity / reference,
            intensity,
            excitation: x.clone(),
            directivity: ratio(4.0 * PI * intensity, powers.p_f),
            powers,
        })
    }

    /// Rayleigh-optimal gain at `node`; see [`rayleigh::maximize_factored`].
    pub fn maximize_gain(&self, level: GainLevel, node: usize) -> Result<GainResult> {
        let solver = LevelSolver::new(self, level)?;
        solver.maximize(self, node)
    }
}

/// Per-level precomputation `Q = H B^{-1/2}` shared across directions.
#[derive(Debug, Clone)]
pub struct LevelSolver {
    pub level: GainLevel,
    b_inv_sqrt: CMatrix,
    q: CMatrix,
}

impl LevelSolver {
    pub fn new(ops: &Operators, level: GainLevel) -> Result<Self> {
        let b_inv_sqrt = rayleigh::inv_sqrt_pd(&ops.power_form(level))?;
        let q = match level {
            GainLevel::Radiating => b_inv_sqrt.clone(),
            _ => ops.to_antennas(level) * &b_inv_sqrt,
        };
        Ok(Self { level, b_inv_sqrt, q })
    }

    /// Maximal gain only (no breakdown), the optimizer's hot path.
    pub fn max_gain(&self, ops: &Operators, node: usize) -> f64 {
        rayleigh::maximize_factored(&(ops.radiating.field_matrix(node) * &self.q), &self.b_inv_sqrt).value
    }

    pub fn maximize(&self, ops: &Operators, node: usize) -> Result<GainResult> {
        let w = ops.radiating.field_matrix(node) * &self.q;
        let best = rayleigh::maximize_factored(&w, &self.b_inv_sqrt);
        let mut result = ops.gain_at(self.level, &best.x, node)?;
        // Keep the closed-form value; the breakdown is recomputed from x̂.
        result.gain = best.value;
        Ok(result)
    }
}

/// Waves at both interfaces; PA-side entries exist only when defined by the level.
#[derive(Debug, Clone)]
pub struct Waves {
    pub v_tx: Option<CVector>,
    pub a_t: Option<CVector>,
    pub b_t: Option<CVector>,
    pub a_r: CVector,
    pub b_r: CVector,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den >= POWER_FLOOR).then(|| num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerMetrics {
    pub p_a: Option<f64>,
    pub p_t: Option<f64>,
    pub p_r: f64,
    pub p_f: f64,
    pub eta_matching: Option<f64>,
    pub eta_tuning: Option<f64>,
    pub eta_radiating: Option<f64>,
}

impl PowerMetrics {
    fn from_waves(w: &Waves, z_tx: &[Complex64], radiating: &RadiatingStructure) -> Self {
        let p_a = w
            .v_tx
            .as_ref()
            .map(|v| z_tx.iter().zip(v.iter()).map(|(z, v)| v.norm_sqr() / z.re).sum::<f64>() / 4.0);
        let p_t = match (&w.a_t, &w.b_t) {
            (Some(a), Some(b)) => Some(a.norm_squared() - b.norm_squared()),
            _ => None,
        };
        let p_r = w.a_r.norm_squared() - w.b_r.norm_squared();
        let p_f = w.a_r.dotc(&(radiating.gram() * &w.a_r)).re;
        Self {
            p_a,
            p_t,
            p_r,
            p_f,
            eta_matching: p_a.zip(p_t).and_then(|(a, t)| ratio(t, a)),
            eta_tuning: p_t.and_then(|t| ratio(p_r, t)),
            eta_radiating: ratio(p_f, p_r),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GainResult {
    pub level: GainLevel,
    /// Linear gain.
    pub gain: f64,
    /// Radiation intensity at the node (W/sr).
    pub intensity: f64,
    pub excitation: CVector,
    pub powers: PowerMetrics,
    pub directivity: Option<f64>,
}

/// Direct solution of the joint frontend/tuning/antenna relations.
#[derive(Debug, Clone)]
pub struct SolvedState {
    pub v_tx: CVector,
    pub a_t: CVector,
    pub b_t: CVector,
    pub a_r: CVector,
    pub b_r: CVector,
    pub a_f: FarFieldPattern,
    pub v_t: CVector,
    pub i_t: CVector,
    pub v_r: CVector,
    pub i_r: CVector,
}

/// Solves the stacked system in `[a_T, b_T, a_R, b_R]`:
///
/// ```text
/// a_T − S_RF b_T            = K v
/// b_T − S_TT a_T − S_TR b_R = 0
/// a_R − S_RT a_T − S_TRR b_R = 0
/// b_R − S_RR a_R            = 0
/// ```
pub fn solve_state(model: &RemsModel, v_tx: &CVector) -> Result<SolvedState> {
    let n = model.pa_count();
    let m = model.antenna_count();
    if v_tx.len() != n {
        return Err(Error::Precondition(format!("expected {n} PA voltages, got {}", v_tx.len())));
    }
    let fe = frontend_matrices(model.frontend.z_tx(), model.r0())?;
    let t = &model.tuning;
    let dim = 2 * n + 2 * m;
    let (at, bt, ar, br) = (0, n, 2 * n, 2 * n + m);
    let mut a = identity(dim);
    let mut set = |r0: usize, c0: usize, blk: &CMatrix| {
        for i in 0..blk.nrows() {
            for j in 0..blk.ncols() {
                a[(r0 + i, c0 + j)] -= blk[(i, j)];
            }
        }
    };
    set(at, bt, &fe.s_rf);
    set(bt, at, &t.s_tt());
    set(bt, br, &t.s_tr());
    set(ar, at, &t.s_rt());
    set(ar, br, &t.s_rr());
    set(br, ar, model.radiating.s_rr());
    let mut rhs = CVector::zeros(dim);
    rhs.rows_mut(at, n).copy_from(&(&fe.k * v_tx));

    let (inv, cond) = inverse_with_condition(&a).ok_or(Error::ResonantModel { cond: f64::INFINITY })?;
    if cond > MAX_CONDITION {
        return Err(Error::ResonantModel { cond });
    }
    let x = inv * rhs;
    let a_t = x.rows(at, n).into_owned();
    let b_t = x.rows(bt, n).into_owned();
    let a_r = x.rows(ar, m).into_owned();
    let b_r = x.rows(br, m).into_owned();
    let sr = model.r0().sqrt();
    Ok(SolvedState {
        v_tx: v_tx.clone(),
        v_t: (&a_t + &b_t) * c(sr),
        i_t: (&a_t - &b_t) / c(sr),
        v_r: (&a_r + &b_r) * c(sr),
        i_r: (&a_r - &b_r) / c(sr),
        a_f: model.radiating.radiate(&a_r),
        a_t,
        b_t,
        a_r,
        b_r,
    })
}

/// Powers and efficiency chain of a solved state.
pub fn power_metrics(state: &SolvedState, model: &RemsModel) -> PowerMetrics {
    let w = Waves {
        v_tx: Some(state.v_tx.clone()),
        a_t: Some(state.a_t.clone()),
        b_t: Some(state.b_t.clone()),
        a_r: state.a_r.clone(),
        b_r: state.b_r.clone(),
    };
    PowerMetrics::from_waves(&w, model.frontend.z_tx(), &model.radiating)
}

/// `|a_θ|² + |a_φ|²` at a node (W/sr).
pub fn radiation_intensity(a_f: &FarFieldPattern, node: usize) -> f64 {
    let [a, b] = a_f.at(node);
    a.norm_sqr() + b.norm_sqr()
}

/// Linear gain to dBi; non-positive values map to −∞.
pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        10.0 * x.log10()
    } else {
        f64::NEG_INFINITY
    }
}
