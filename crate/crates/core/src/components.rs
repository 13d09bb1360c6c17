//! Scattering models of the circuit elements used by the tile architecture.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, ONE, ZERO};
use crate::netcalc::{classify, MultiportNetwork, PortSpec, WaveContext};

/// Passivity slack allowed for measured switch data.
pub const SWITCH_PASSIVITY_TOL: f64 = 1e-6;

/// Ideal lossless line of characteristic impedance `zc`, referenced to `zc`.
///
/// `length` is in wavelengths.
pub fn transmission_line(zc: f64, length: f64, ctx: &WaveContext) -> Result<MultiportNetwork> {
    if !(zc > 0.0 && zc.is_finite()) {
        return Err(Error::Precondition(format!("line impedance must be positive, got {zc}")));
    }
    if !(length >= 0.0 && length.is_finite()) {
        return Err(Error::Precondition(format!("line length must be non-negative, got {length}")));
    }
    let t = Complex64::from_polar(1.0, -2.0 * PI * length);
    let s = CMatrix::from_row_slice(2, 2, &[ZERO, t, t, ZERO]);
    MultiportNetwork::new(
        s,
        vec![PortSpec::real(zc, "line-a"), PortSpec::real(zc, "line-b")],
        *ctx,
    )
}

/// Ideal parallel node joining ports of the given (real) reference impedances.
///
/// With `Y_i = 1/Z_i`: `S_ij = 2 sqrt(Y_i Y_j) / sum(Y) - δ_ij`.
pub fn junction(port_impedances: &[f64], ctx: &WaveContext) -> Result<MultiportNetwork> {
    if port_impedances.len() < 2 {
        return Err(Error::Precondition("a junction needs at least two ports".into()));
    }
    if let Some(z) = port_impedances.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
        return Err(Error::Precondition(format!("junction impedance must be positive, got {z}")));
    }
    let y: Vec<f64> = port_impedances.iter().map(|z| 1.0 / z).collect();
    let total: f64 = y.iter().sum();
    let n = y.len();
    let s = CMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        c(2.0 * (y[i] * y[j]).sqrt() / total - d)
    });
    let ports = port_impedances
        .iter()
        .enumerate()
        .map(|(k, &z)| PortSpec::real(z, format!("node-{k}")))
        .collect();
    MultiportNetwork::new(s, ports, *ctx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchState {
    On,
    Off,
}

/// Figures of merit of an SPST switch; all losses in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwitchParams {
    pub insertion_loss_db: f64,
    pub isolation_db: f64,
    pub return_loss_on_db: f64,
    pub return_loss_off_db: f64,
    /// On-state transmission phase (rad).
    pub transmission_phase: f64,
    /// Reference resistance the figures are quoted at (Ω).
    pub reference: f64,
}

impl Default for SwitchParams {
    fn default() -> Self {
        Self {
            insertion_loss_db: 0.8,
            isolation_db: 20.0,
            return_loss_on_db: 15.0,
            return_loss_off_db: 0.5,
            transmission_phase: 0.0,
            reference: 50.0,
        }
    }
}

impl SwitchParams {
    pub fn ideal() -> Self {
        Self {
            insertion_loss_db: 0.0,
            isolation_db: f64::INFINITY,
            return_loss_on_db: f64::INFINITY,
            return_loss_off_db: 0.0,
            transmission_phase: 0.0,
            reference: 50.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let losses = [
            ("insertion loss", self.insertion_loss_db),
            ("isolation", self.isolation_db),
            ("on-state return loss", self.return_loss_on_db),
            ("off-state return loss", self.return_loss_off_db),
        ];
        for (name, v) in losses {
            if v.is_nan() || v < 0.0 {
                return Err(Error::UnphysicalSwitch(format!("{name} must be >= 0 dB, got {v}")));
            }
        }
        if !(self.reference > 0.0 && self.reference.is_finite()) || !self.transmission_phase.is_finite() {
            return Err(Error::UnphysicalSwitch("invalid reference or phase".into()));
        }
        Ok(())
    }
}

/// Source of the two switch-state scattering matrices.
#[derive(Debug, Clone)]
pub enum SwitchModel {
    Parametric(SwitchParams),
    /// Characterized 2-ports, e.g. loaded from Touchstone files.
    Measured {
        on: MultiportNetwork,
        off: MultiportNetwork,
    },
}

impl Default for SwitchModel {
    fn default() -> Self {
        SwitchModel::Parametric(SwitchParams::default())
    }
}

impl SwitchModel {
    pub fn ideal() -> Self {
        SwitchModel::Parametric(SwitchParams::ideal())
    }

    /// Checks both state matrices for size and passivity.
    pub fn measured(on: MultiportNetwork, off: MultiportNetwork) -> Result<Self> {
        for (name, net) in [("on", &on), ("off", &off)] {
            if net.port_count() != 2 {
                return Err(Error::UnphysicalSwitch(format!(
                    "{name}-state data has {} ports, expected 2",
                    net.port_count()
                )));
            }
            let excess = classify(net).passivity_excess;
            if excess > SWITCH_PASSIVITY_TOL {
                return Err(Error::UnphysicalSwitch(format!(
                    "{name}-state matrix is active (excess {excess:.3e})"
                )));
            }
        }
        Ok(SwitchModel::Measured { on, off })
    }
}

fn db_to_mag(db: f64) -> f64 {
    10f64.powf(-db / 20.0)
}

/// Symmetric 2-port [[r, t], [t, r]] with r in quadrature to t; its singular
/// values are both sqrt(|r|² + |t|²), so |r| is clipped to keep that ≤ 1.
fn quadrature_two_port(t: Complex64, r_mag: f64, r_phase: f64) -> CMatrix {
    let r_mag = r_mag.min((1.0 - t.norm_sqr()).max(0.0).sqrt());
    let r = Complex64::from_polar(r_mag, r_phase);
    CMatrix::from_row_slice(2, 2, &[r, t, t, r])
}

/// 2-port scattering matrix of a switch in the given state.
pub fn switch_two_port(model: &SwitchModel, state: SwitchState, ctx: &WaveContext) -> Result<MultiportNetwork> {
    match model {
        SwitchModel::Parametric(p) => {
            p.validate()?;
            let phi = p.transmission_phase;
            // On: series-reactance-like reflection at +90° from transmission.
            // Off: open-like reflection, capacitive leakage at +90°.
            let s = match state {
                SwitchState::On => quadrature_two_port(
                    Complex64::from_polar(db_to_mag(p.insertion_loss_db), phi),
                    db_to_mag(p.return_loss_on_db),
                    phi + FRAC_PI_2,
                ),
                SwitchState::Off => quadrature_two_port(
                    Complex64::from_polar(db_to_mag(p.isolation_db), phi + FRAC_PI_2),
                    db_to_mag(p.return_loss_off_db),
                    phi,
                ),
            };
            MultiportNetwork::new(
                s,
                vec![PortSpec::real(p.reference, "sw-a"), PortSpec::real(p.reference, "sw-b")],
                *ctx,
            )
        }
        SwitchModel::Measured { on, off } => Ok(match state {
            SwitchState::On => on.clone(),
            SwitchState::Off => off.clone(),
        }),
    }
}

/// Diagonal frontend operators `K = (Z_Tx + R0 I)^-1 sqrt(R0)` and
/// `S_RF = (Z_Tx + R0 I)^-1 (Z_Tx - R0 I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontendMatrices {
    pub k: CMatrix,
    pub s_rf: CMatrix,
}

pub fn frontend_matrices(z_tx: &[Complex64], r0: f64) -> Result<FrontendMatrices> {
    if let Some(z) = z_tx.iter().find(|z| !(z.re > 0.0)) {
        return Err(Error::Precondition(format!(
            "PA output impedance {z} must have positive real part"
        )));
    }
    let n = z_tx.len();
    let k = CMatrix::from_fn(n, n, |i, j| if i == j { c(r0.sqrt()) / (z_tx[i] + r0) } else { ZERO });
    let s_rf = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (z_tx[i] - r0) / (z_tx[i] + r0)
        } else {
            ZERO
        }
    });
    Ok(FrontendMatrices { k, s_rf })
}

/// Impedance seen looking into a 1-port with reflection `gamma` at real reference `r`.
pub fn reflection_to_impedance(gamma: Complex64, r: f64) -> Complex64 {
    (ONE + gamma) / (ONE - gamma) * r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcalc::{interconnect, terminate};
    use proptest::prelude::*;

    fn ctx() -> WaveContext {
        WaveContext::new(12e9, 50.0).unwrap()
    }

    #[test]
    fn line_examples() {
        let zero = transmission_line(50.0, 0.0, &ctx()).unwrap();
        assert_eq!(zero.s(), &CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]));
        let eighth = transmission_line(50.0, 0.125, &ctx()).unwrap();
        assert!((eighth.get(1, 0) - Complex64::from_polar(1.0, -PI / 4.0)).norm() < 1e-15);
        let half = transmission_line(50.0, 0.5, &ctx()).unwrap();
        assert!((half.get(1, 0) + ONE).norm() < 1e-15);
        assert!(transmission_line(-1.0, 0.1, &ctx()).is_err());
        assert!(transmission_line(50.0, -0.1, &ctx()).is_err());
    }

    #[test]
    fn lines_cascade_additively() {
        for (l1, l2) in [(0.1, 0.125), (0.3, 0.45), (0.0, 0.77)] {
            let a = transmission_line(50.0, l1, &ctx()).unwrap();
            let b = transmission_line(50.0, l2, &ctx()).unwrap();
            let ab = interconnect(&MultiportNetwork::stack(&[&a, &b]).unwrap(), &[(1, 2)]).unwrap();
            let direct = transmission_line(50.0, l1 + l2, &ctx()).unwrap();
            assert!((ab.s() - direct.s()).norm() < 1e-12);
        }
    }

    #[test]
    fn line_and_junction_are_lossless_reciprocal() {
        let l = classify(&transmission_line(35.0, 0.37, &ctx()).unwrap());
        assert!(l.lossless_deviation < 1e-12 && l.reciprocity_deviation < 1e-12);
        let mut z = vec![50.0 / 16.0];
        z.extend(std::iter::repeat_n(50.0, 16));
        let j = classify(&junction(&z, &ctx()).unwrap());
        assert!(j.lossless_deviation < 1e-12 && j.reciprocity_deviation < 1e-12);
        let k = classify(&junction(&[10.0, 33.0, 71.0, 50.0], &ctx()).unwrap());
        assert!(k.lossless_deviation < 1e-12);
    }

    #[test]
    fn equal_three_port_junction() {
        let j = junction(&[50.0; 3], &ctx()).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k { -1.0 / 3.0 } else { 2.0 / 3.0 };
                assert!((j.get(i, k) - c(expect)).norm() < 1e-15);
            }
        }
        let wire = junction(&[50.0; 2], &ctx()).unwrap();
        assert!((wire.get(0, 1) - ONE).norm() < 1e-15 && wire.get(0, 0).norm() < 1e-15);
    }

    #[test]
    fn splitter_feed_is_matched_at_one_sixteenth_impedance() {
        let mut z = vec![50.0 / 16.0];
        z.extend(std::iter::repeat_n(50.0, 16));
        let j = junction(&z, &ctx()).unwrap();
        assert!(j.get(0, 0).norm() < 1e-12);
        // Power splits equally: |S_k0|² = 1/16.
        assert!((j.get(5, 0).norm_sqr() - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn ideal_switch_states() {
        let m = SwitchModel::ideal();
        let on = switch_two_port(&m, SwitchState::On, &ctx()).unwrap();
        assert!((on.s() - CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])).norm() < 1e-15);
        let off = switch_two_port(&m, SwitchState::Off, &ctx()).unwrap();
        assert!((off.s() - CMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn default_switch_magnitudes() {
        let m = SwitchModel::default();
        let on = switch_two_port(&m, SwitchState::On, &ctx()).unwrap();
        assert!((on.get(1, 0).norm() - 10f64.powf(-0.8 / 20.0)).abs() < 1e-15);
        assert!((on.get(1, 0).norm() - 0.912).abs() < 1e-3);
        assert!((on.get(0, 0).norm() - 10f64.powf(-0.75)).abs() < 1e-15);
        let off = switch_two_port(&m, SwitchState::Off, &ctx()).unwrap();
        assert!((off.get(1, 0).norm() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn attenuating_switch_is_passive_not_lossless() {
        let on = switch_two_port(&SwitchModel::default(), SwitchState::On, &ctx()).unwrap();
        let k = classify(&on);
        // Singular values are both sqrt(|t|² + |r|²).
        let t2 = 10f64.powf(-0.08);
        let r2 = 10f64.powf(-1.5);
        assert!(k.passive && !k.lossless && k.reciprocal);
        assert!((k.passivity_excess - (t2 + r2 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn reflection_clipped_to_stay_passive() {
        let p = SwitchParams {
            insertion_loss_db: 0.1,
            return_loss_on_db: 1.0,
            ..SwitchParams::default()
        };
        let on = switch_two_port(&SwitchModel::Parametric(p), SwitchState::On, &ctx()).unwrap();
        assert!(classify(&on).passivity_excess <= 1e-12);
    }

    #[test]
    fn negative_loss_is_unphysical() {
        let p = SwitchParams {
            insertion_loss_db: -1.0,
            ..SwitchParams::default()
        };
        assert!(matches!(
            switch_two_port(&SwitchModel::Parametric(p), SwitchState::On, &ctx()),
            Err(Error::UnphysicalSwitch(_))
        ));
        let active = MultiportNetwork::with_reference(CMatrix::identity(2, 2) * c(1.1), 50.0, ctx()).unwrap();
        let fine = switch_two_port(&SwitchModel::default(), SwitchState::Off, &ctx()).unwrap();
        assert!(SwitchModel::measured(fine.clone(), active).is_err());
        assert!(SwitchModel::measured(fine.clone(), fine).is_ok());
    }

    #[test]
    fn frontend_examples() {
        let f = frontend_matrices(&[c(50.0)], 50.0).unwrap();
        assert!((f.k[(0, 0)] - c(50f64.sqrt() / 100.0)).norm() < 1e-16);
        assert!((f.k[(0, 0)].re - 0.070711).abs() < 1e-6);
        assert_eq!(f.s_rf[(0, 0)], ZERO);
        let tile = frontend_matrices(&[c(50.0 / 16.0)], 50.0 / 16.0).unwrap();
        assert_eq!(tile.s_rf[(0, 0)], ZERO);
        let g = frontend_matrices(&[c(100.0), c(50.0)], 50.0).unwrap();
        assert!((g.s_rf[(0, 0)] - c(1.0 / 3.0)).norm() < 1e-16);
        assert!((g.k[(0, 0)] - c(50f64.sqrt() / 150.0)).norm() < 1e-16);
        assert_eq!(g.k[(0, 1)], ZERO);
        assert_eq!(g.s_rf[(1, 1)], ZERO);
        assert!(frontend_matrices(&[c(-1.0)], 50.0).is_err());
    }

    #[test]
    fn stub_input_impedance() {
        // Shorted λ/8 stub looks like +j Zc.
        let stub = terminate(&transmission_line(50.0, 0.125, &ctx()).unwrap(), 1, -ONE).unwrap();
        let z = reflection_to_impedance(stub.get(0, 0), 50.0);
        assert!((z - Complex64::new(0.0, 50.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn parametric_switches_are_passive(
            il in 0.0f64..10.0, iso in 0.0f64..60.0, rl_on in 0.0f64..40.0,
            rl_off in 0.0f64..10.0, phase in -3.2f64..3.2,
        ) {
            let p = SwitchParams {
                insertion_loss_db: il,
                isolation_db: iso,
                return_loss_on_db: rl_on,
                return_loss_off_db: rl_off,
                transmission_phase: phase,
                reference: 50.0,
            };
            for state in [SwitchState::On, SwitchState::Off] {
                let net = switch_two_port(&SwitchModel::Parametric(p), state, &ctx()).unwrap();
                let k = classify(&net);
                prop_assert!(k.passive && k.reciprocal);
            }
        }

        #[test]
        fn reference_matched_frontend_has_no_reflection(r in 1.0f64..200.0, n in 1usize..6) {
            let z: Vec<Complex64> = vec![c(r); n];
            let f = frontend_matrices(&z, r).unwrap();
            prop_assert!(f.s_rf.iter().all(|x| x.norm() == 0.0));
            let g = frontend_matrices(&z, r * 1.01).unwrap();
            prop_assert!((0..n).all(|i| g.s_rf[(i, i)].norm() > 0.0));
        }
    }
}
