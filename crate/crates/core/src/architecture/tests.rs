use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::*;
use crate::components::{junction, SwitchParams};
use crate::linalg::{c, CMatrix, J, ONE};
use crate::netcalc::classify;
use crate::radiating::{synthesize_array, synthesize_decoupled, AngularGrid, ArraySpec, RadiatingStructure};
use crate::rems::{GainLevel, GainMap};

fn ctx() -> WaveContext {
    WaveContext::new(12e9, 50.0).unwrap()
}

fn ideal_geo(rows: usize, cols: usize) -> TileGeometry {
    TileGeometry {
        switch: SwitchModel::ideal(),
        ..TileGeometry::with_shape(rows, cols)
    }
}

fn bits_of(v: usize, n: usize) -> Vec<bool> {
    (0..n).map(|b| v >> b & 1 == 1).collect()
}

type Abcd = [[Complex64; 2]; 2];

fn mul(a: Abcd, b: Abcd) -> Abcd {
    let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

fn line_abcd(z: f64, len: f64) -> Abcd {
    let bl = 2.0 * PI * len;
    [[c(bl.cos()), J * z * bl.sin()], [J * bl.sin() / z, c(bl.cos())]]
}

fn shunt(y: Complex64) -> Abcd {
    [[ONE, c(0.0)], [y, ONE]]
}

fn abcd_to_s(m: Abcd, z0: f64) -> [[Complex64; 2]; 2] {
    let [[a, b], [cc, d]] = m;
    let den = a + b / z0 + cc * z0 + d;
    [
        [(a + b / z0 - cc * z0 - d) / den, 2.0 * (a * d - b * cc) / den],
        [c(2.0) / den, (-a + b / z0 - cc * z0 + d) / den],
    ]
}

/// Chain-matrix oracle of the stub tuner with ideal switches.
fn matcher_oracle(bits: &[bool], geo: &TileGeometry) -> [[Complex64; 2]; 2] {
    let bl = 2.0 * PI * geo.stub_length;
    let zm = geo.matching_zc();
    let mut m = line_abcd(zm, geo.lead_length);
    for k in 0..geo.stub_count {
        if k > 0 {
            m = mul(m, line_abcd(zm, geo.series_length));
        }
        let y = match (bits[2 * k], bits[2 * k + 1]) {
            (false, _) => c(0.0),
            (true, true) => 1.0 / (J * geo.stub_zc * bl.tan()),
            (true, false) => J * bl.tan() / geo.stub_zc,
        };
        m = mul(m, shunt(y));
    }
    abcd_to_s(m, zm)
}

#[test]
fn matcher_matches_chain_oracle_for_every_state() {
    let mut geo = ideal_geo(4, 4);
    for lead in [0.0, 0.07] {
        geo.lead_length = lead;
        for v in 0..64 {
            let bits = bits_of(v, 6);
            let net = build_matching_network(&bits, &geo, &ctx()).unwrap();
            let oracle = matcher_oracle(&bits, &geo);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((net.get(i, j) - oracle[i][j]).norm() < 1e-10, "state {v}");
                }
            }
            assert!(classify(&net).lossless_deviation < 1e-9);
        }
    }
}

#[test]
fn matcher_with_inactive_stubs_is_a_quarter_wave_line() {
    let geo = ideal_geo(4, 4);
    let net = build_matching_network(&[false; 6], &geo, &ctx()).unwrap();
    assert!((net.get(1, 0) - Complex64::from_polar(1.0, -PI / 2.0)).norm() < 1e-12);
    assert!(net.get(0, 0).norm() < 1e-12);
}

#[test]
fn shorted_taps_reflect_fully() {
    let geo = TileGeometry {
        stub_length: 0.0,
        ..ideal_geo(4, 4)
    };
    let net = build_matching_network(&[true; 6], &geo, &ctx());
    // A zero-length short on the main line makes the reduction singular or
    // reflects everything; both outcomes are physical.
    if let Ok(net) = net {
        assert!((net.get(0, 0).norm() - 1.0).abs() < 1e-9);
    }
    let geo = TileGeometry {
        stub_length: 1e-4,
        ..ideal_geo(4, 4)
    };
    let net = build_matching_network(&[true; 6], &geo, &ctx()).unwrap();
    assert!((net.get(0, 0).norm() - 1.0).abs() < 1e-9);
    assert!(net.get(1, 0).norm() < 1e-2);
}

#[test]
fn matcher_rejects_wrong_bit_count() {
    assert!(build_matching_network(&[false; 5], &ideal_geo(4, 4), &ctx()).is_err());
}

#[test]
fn switch_unit_states() {
    let geo = ideal_geo(4, 4);
    let s = |u| build_switch_unit(u, &geo, &ctx()).unwrap();
    let (pass, flip) = (s(UnitState::Pass), s(UnitState::Pass180));
    assert!((pass.get(1, 0).norm() - 1.0).abs() < 1e-12);
    assert!((flip.get(1, 0).norm() - 1.0).abs() < 1e-12);
    let dphi = (flip.get(1, 0) / pass.get(1, 0)).arg().abs();
    assert!((dphi - PI).abs() < 1e-9);
    assert!((flip.get(1, 0) + pass.get(1, 0)).norm() < 1e-12);
    assert!(pass.get(0, 0).norm() < 1e-12 && flip.get(0, 0).norm() < 1e-12);

    let (open, short) = (s(UnitState::OpenReflect), s(UnitState::ShortReflect));
    for net in [&open, &short] {
        assert!((net.get(0, 0).norm() - 1.0).abs() < 1e-9);
        assert!(net.get(1, 0).norm() < 1e-9);
    }
    let dphi = (short.get(0, 0) / open.get(0, 0)).arg().abs();
    assert!((dphi - PI).abs() < 1e-9);
    // Open input sees Γ = +1, shorted one Γ = -1.
    assert!((open.get(0, 0) - ONE).norm() < 1e-9);
}

#[test]
fn realistic_switch_unit_is_lossy() {
    let geo = TileGeometry::default();
    for u in [UnitState::Pass, UnitState::Pass180, UnitState::OpenReflect, UnitState::ShortReflect] {
        let net = build_switch_unit(u, &geo, &ctx()).unwrap();
        let cls = classify(&net);
        assert!(cls.passive && !cls.lossless, "{u:?}");
        assert!(cls.reciprocal);
    }
    let pass = build_switch_unit(UnitState::Pass, &geo, &ctx()).unwrap();
    let loss_db = -20.0 * pass.get(1, 0).norm().log10();
    assert!(loss_db > 0.5 && loss_db < 3.0, "{loss_db}");
}

#[test]
fn splitter_is_matched_at_the_feed() {
    let geo = TileGeometry::default();
    let mut z = vec![geo.feed_line.zc];
    z.extend([geo.branch_line.zc; 16]);
    let j = junction(&z, &ctx()).unwrap();
    assert!(j.get(0, 0).norm() < 1e-12);
}

fn mixed_config(stubs: usize, antennas: usize, seed: usize) -> TileConfig {
    let mut t = TileConfig::uniform(stubs, antennas, UnitState::Pass);
    for g in 0..t.group_count() {
        t.set_group(g, (g * 7 + seed * 3 + g * g) % 4);
    }
    t
}

#[test]
fn ideal_tile_is_lossless() {
    let geo = ideal_geo(4, 4);
    for seed in 0..4 {
        let mut cfg = mixed_config(3, 16, seed);
        for u in &mut cfg.units {
            if *u == UnitState::OpenReflect {
                *u = UnitState::ShortReflect;
            }
        }
        let tile = build_tile(&cfg, &geo, &ctx()).unwrap();
        assert_eq!(tile.network().port_count(), 17);
        assert!(tile.network().ports().iter().all(|p| (p.z_ref.re - 50.0).abs() < 1e-12));
        assert!(classify(tile.network()).lossless_deviation < 1e-8);
    }
}

#[test]
fn open_units_block_the_antennas() {
    let cfg = TileConfig::uniform(3, 16, UnitState::OpenReflect);
    // Exactly ideal: each open unit appears as a short at the splitter node
    // through its λ/4 branch, and parallel ideal shorts make the reduction
    // singular. The guard must say so rather than return garbage.
    assert!(matches!(
        build_tile(&cfg, &ideal_geo(4, 4), &ctx()),
        Err(Error::IllConditionedInterconnect { .. })
    ));
    let near_ideal = TileGeometry {
        switch: SwitchModel::Parametric(SwitchParams {
            isolation_db: 160.0,
            return_loss_off_db: 1e-4,
            ..SwitchParams::ideal()
        }),
        ..TileGeometry::with_shape(4, 4)
    };
    let tile = build_tile(&cfg, &near_ideal, &ctx()).unwrap();
    assert!(tile.s_rt().norm() < 1e-6);
    assert!((tile.s_tt()[(0, 0)].norm() - 1.0).abs() < 1e-4);
    let realistic = build_tile(&cfg, &TileGeometry::default(), &ctx()).unwrap();
    let pass = build_tile(&TileConfig::uniform(3, 16, UnitState::Pass), &TileGeometry::default(), &ctx()).unwrap();
    assert!(realistic.s_rt().norm() < 0.1 * pass.s_rt().norm());
}

#[test]
fn realistic_tile_is_passive_and_lossy() {
    let tile = build_tile(&mixed_config(3, 16, 1), &TileGeometry::default(), &ctx()).unwrap();
    let cls = classify(tile.network());
    assert!(cls.passive && !cls.lossless);
    assert!(cls.passivity_excess < 0.0);
}

#[test]
fn partition_layout() {
    let p = tile_partition(4, 4, 2, 2).unwrap();
    assert_eq!(p, vec![vec![0, 1, 4, 5], vec![2, 3, 6, 7], vec![8, 9, 12, 13], vec![10, 11, 14, 15]]);
    assert_eq!(tile_partition(16, 16, 4, 4).unwrap().len(), 16);
    assert!(tile_partition(4, 4, 3, 2).is_err());
}

#[test]
fn single_tile_identity_map_is_the_tile() {
    let geo = TileGeometry::default();
    let tile = build_tile(&mixed_config(3, 16, 2), &geo, &ctx()).unwrap();
    let arr = build_array_tuning(std::slice::from_ref(&tile), &tile_partition(4, 4, 4, 4).unwrap()).unwrap();
    assert_eq!(arr.network().s(), tile.network().s());
}

fn small_array(map: &[Vec<usize>]) -> (Vec<TuningNetwork>, TuningNetwork) {
    let geo = TileGeometry::with_shape(2, 2);
    let tiles: Vec<_> = (0..map.len())
        .map(|t| build_tile(&mixed_config(3, 4, t), &geo, &ctx()).unwrap())
        .collect();
    let arr = build_array_tuning(&tiles, map).unwrap();
    (tiles, arr)
}

#[test]
fn array_is_block_diagonal() {
    let map = tile_partition(4, 4, 2, 2).unwrap();
    let (tiles, arr) = small_array(&map);
    let s = arr.network().s();
    assert_eq!(s.nrows(), 4 + 16);
    // Port of (tile, local) in the array.
    let port = |t: usize, k: usize| if k == 0 { t } else { 4 + map[t][k - 1] };
    for (t, tile) in tiles.iter().enumerate() {
        for u in 0..4 {
            for k in 0..5 {
                for l in 0..5 {
                    let v = s[(port(t, k), port(u, l))];
                    if t == u {
                        assert_eq!(v, tile.network().get(k, l));
                    } else {
                        assert_eq!(v, c(0.0));
                    }
                }
            }
        }
    }
}

#[test]
fn permuted_map_conjugates_by_the_permutation() {
    let map = tile_partition(4, 4, 2, 2).unwrap();
    let (_, arr) = small_array(&map);
    // Relabel antennas by a fixed permutation σ.
    let sigma: Vec<usize> = (0..16).map(|a| (a * 5 + 3) % 16).collect();
    let permuted: Vec<Vec<usize>> = map.iter().map(|t| t.iter().map(|&a| sigma[a]).collect()).collect();
    let (_, arr2) = small_array(&permuted);
    let mut p = CMatrix::zeros(20, 20);
    for t in 0..4 {
        p[(t, t)] = ONE;
    }
    for a in 0..16 {
        p[(4 + sigma[a], 4 + a)] = ONE;
    }
    let expected = &p * arr.network().s() * p.transpose();
    assert!((arr2.network().s() - expected).norm() < 1e-14);
}

#[test]
fn array_rejects_non_partition() {
    let map = tile_partition(4, 4, 2, 2).unwrap();
    let (tiles, _) = small_array(&map);
    let mut bad = map.clone();
    bad[1][0] = 0;
    assert!(build_array_tuning(&tiles, &bad).is_err());
    assert!(build_array_tuning(&tiles[..3], &map).is_err());
}

fn structure(rows: usize, cols: usize, step: f64, decoupled: bool) -> Arc<RadiatingStructure> {
    let spec = ArraySpec {
        rows,
        cols,
        ..Default::default()
    };
    let grid = Arc::new(AngularGrid::new(step).unwrap());
    Arc::new(if decoupled {
        synthesize_decoupled(&spec, &ctx(), grid).unwrap()
    } else {
        synthesize_array(&spec, &ctx(), grid).unwrap()
    })
}

#[test]
fn benchmark_identities() {
    let rad = structure(2, 2, 10.0, false);
    let nodes = rad.grid().hemisphere(10.0).unwrap();
    let geo = TileGeometry::with_shape(2, 2);
    let map = tile_partition(2, 2, 2, 2).unwrap();
    let cfg = SwitchConfig {
        tiles: vec![mixed_config(3, 4, 0)],
    };

    let ideal = benchmark_model(BenchmarkKind::AllDigitalIdeal, rad.clone(), &geo, None, &map).unwrap();
    let ideal_map = evaluate_recipe(&ideal, &nodes);
    assert_eq!(ideal.rf_chains, 4);
    for r in &ideal_map.rows {
        assert_eq!(r.g_rems, r.g_r);
        assert!(r.g_r.is_some());
    }

    let proposed = benchmark_model(BenchmarkKind::Proposed, rad.clone(), &geo, Some(&cfg), &map).unwrap();
    let pi = benchmark_model(BenchmarkKind::ProposedIdeal, rad.clone(), &geo, Some(&cfg), &map).unwrap();
    assert_eq!(proposed.rf_chains, 1);
    let full = evaluate_recipe(&proposed, &nodes);
    let ideal_match = evaluate_recipe(&pi, &nodes);
    for (a, b) in full.rows.iter().zip(&ideal_match.rows) {
        assert_eq!(b.g_rems, a.g_t);
        let (g, t, r) = (a.g_rems.unwrap(), a.g_t.unwrap(), a.g_r.unwrap());
        assert!(g <= t * (1.0 + 1e-9) && t <= r * (1.0 + 1e-9));
    }

    assert!(matches!(
        benchmark_model(BenchmarkKind::Proposed, rad, &geo, None, &map),
        Err(Error::MissingConfig(_))
    ));
}

#[test]
fn conventional_on_matched_decoupled_structure_reaches_radiating_gain() {
    let rad = structure(2, 2, 10.0, true);
    let nodes = rad.grid().hemisphere(10.0).unwrap();
    let geo = TileGeometry::with_shape(2, 2);
    let map = tile_partition(2, 2, 2, 2).unwrap();
    let conv = benchmark_model(BenchmarkKind::AllDigitalConventional, rad, &geo, None, &map).unwrap();
    let m = evaluate_recipe(&conv, &nodes);
    for r in &m.rows {
        let (g, gr) = (r.g_rems.unwrap(), r.g_r.unwrap());
        assert!((g - gr).abs() < 1e-8 * gr);
    }
}

#[test]
fn comparison_metrics() {
    let rad = structure(2, 2, 10.0, false);
    let nodes = rad.grid().hemisphere(10.0).unwrap();
    let geo = TileGeometry::with_shape(2, 2);
    let map = tile_partition(2, 2, 2, 2).unwrap();
    let ideal = evaluate_recipe(
        &benchmark_model(BenchmarkKind::AllDigitalIdeal, rad.clone(), &geo, None, &map).unwrap(),
        &nodes,
    );
    let conv = evaluate_recipe(
        &benchmark_model(BenchmarkKind::AllDigitalConventional, rad, &geo, None, &map).unwrap(),
        &nodes,
    );
    let entries = [
        ComparisonEntry {
            name: "ideal".into(),
            map: &ideal,
            rf_chains: 4,
        },
        ComparisonEntry {
            name: "conv".into(),
            map: &conv,
            rf_chains: 4,
        },
    ];
    let rows = compare(&ideal, &entries).unwrap();
    assert!(rows[0].relative_db.iter().all(|x| *x == 0.0));
    assert_eq!(rows[0].median_relative_db, 0.0);
    assert!((rows[0].cam_db - (rows[0].median_gain_dbi - 10.0 * 4f64.log10())).abs() < 1e-12);
    assert!(rows[1].relative_db.iter().all(|x| *x <= 1e-9));

    // Reordering the directions leaves the medians unchanged.
    let mut shuffled = conv.clone();
    shuffled.rows.reverse();
    let again = compare(
        &ideal,
        &[ComparisonEntry {
            name: "conv".into(),
            map: &shuffled,
            rf_chains: 4,
        }],
    )
    .unwrap();
    assert_eq!(again[0].median_relative_db, rows[1].median_relative_db);
    assert_eq!(again[0].relative_db, rows[1].relative_db);

    let mut short = conv.clone();
    short.rows.pop();
    let bad = [ComparisonEntry {
        name: "x".into(),
        map: &short,
        rf_chains: 1,
    }];
    assert!(matches!(compare(&ideal, &bad), Err(Error::GridMismatch)));
    let empty = GainMap::default();
    assert!(compare(&empty, &bad).is_err());

    let dir = tempfile::tempdir().unwrap();
    let (p, q) = (dir.path().join("c.csv"), dir.path().join("r.csv"));
    write_comparison(&p, Some(&q), &ideal, &rows).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("architecture,rf_chains,median_G_rems_dBi,median_relative_dB,CAM_dB"));
    let rel = std::fs::read_to_string(&q).unwrap();
    assert_eq!(rel.lines().count(), nodes.len() + 1);
    let _ = GainLevel::Rems;
}

#[test]
fn geometry_json_defaults_and_validation() {
    let g: TileGeometry = serde_json::from_str(r#"{"rows": 2, "cols": 1, "stub_count": 2}"#).unwrap();
    assert_eq!(g.antennas(), 2);
    assert_eq!(g.bits_per_tile(), 8);
    assert!(serde_json::from_str::<TileGeometry>(r#"{"bogus": 1}"#).is_err());
    let bad = TileGeometry {
        stub_zc: -1.0,
        ..TileGeometry::default()
    };
    assert!(bad.validate().is_err());
    assert_eq!(TileGeometry::default().bits_per_tile(), 38);
    let _ = SwitchParams::default();
}

