use super::*;
use crate::architecture::tile_partition;
use crate::components::SwitchModel;
use crate::netcalc::WaveContext;
use crate::radiating::{synthesize_array, AngularGrid, ArraySpec};

fn ctx() -> WaveContext {
    WaveContext::new(12e9, 50.0).unwrap()
}

fn structure(rows: usize, cols: usize) -> Arc<RadiatingStructure> {
    let spec = ArraySpec {
        rows,
        cols,
        ..Default::default()
    };
    Arc::new(synthesize_array(&spec, &ctx(), Arc::new(AngularGrid::new(5.0).unwrap())).unwrap())
}

/// 2×1 tile with three stubs: 10 bits.
fn mini_tile() -> Evaluator {
    let geo = TileGeometry::with_shape(2, 1);
    Evaluator::new(geo, structure(2, 1), tile_partition(2, 1, 2, 1).unwrap()).unwrap()
}

/// Single antenna with two stubs: 6 bits.
fn single() -> Evaluator {
    let geo = TileGeometry {
        stub_count: 2,
        ..TileGeometry::with_shape(1, 1)
    };
    Evaluator::new(geo, structure(1, 1), vec![vec![0]]).unwrap()
}

fn broadside(ev: &Evaluator) -> Objective {
    Objective::direction(ev.radiating(), 0.0, 0.0, GainLevel::Rems).unwrap()
}

#[test]
fn single_antenna_exhaustive_dominates_every_state() {
    let ev = single();
    let obj = Objective::direction(ev.radiating(), 30.0, 45.0, GainLevel::Rems).unwrap();
    let space = SearchSpace::all(ev.uniform_config(UnitState::Pass));
    assert_eq!(space.size(), 64.0);
    let report = exhaustive_search(&ev, &space, &obj, DEFAULT_CAP).unwrap();
    assert_eq!(report.evaluations, 64);
    assert!(report.best_objective_db.is_finite());
    for i in 0..64 {
        assert!(ev.evaluate(&space.config(i), &obj).value_db <= report.best_objective_db);
    }
    let again = ev.evaluate(&report.best_config, &obj).value_db;
    assert!((again - report.best_objective_db).abs() < 1e-12);
}

#[test]
fn subset_of_one() {
    let ev = mini_tile();
    let base = ev.uniform_config(UnitState::Pass180);
    let space = SearchSpace { base: base.clone(), free: vec![] };
    let r = exhaustive_search(&ev, &space, &broadside(&ev), DEFAULT_CAP).unwrap();
    assert_eq!(r.best_config, base);
    assert_eq!(r.evaluations, 1);
}

#[test]
fn cap_is_enforced() {
    let ev = mini_tile();
    let space = SearchSpace::all(ev.uniform_config(UnitState::Pass));
    match exhaustive_search(&ev, &space, &broadside(&ev), 1000) {
        Err(Error::CapExceeded { size, cap }) => {
            assert_eq!(size, 1024.0);
            assert_eq!(cap, 1000);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn restricted_spaces() {
    let ev = mini_tile();
    let base = ev.uniform_config(UnitState::Pass);
    assert_eq!(SearchSpace::units_only(base.clone()).free, vec![3, 4]);
    assert_eq!(SearchSpace::matching_only(base.clone()).free, vec![0, 1, 2]);
    let obj = broadside(&ev);
    let units = exhaustive_search(&ev, &SearchSpace::units_only(base.clone()), &obj, DEFAULT_CAP).unwrap();
    let full = exhaustive_search(&ev, &SearchSpace::all(base), &obj, DEFAULT_CAP).unwrap();
    assert_eq!(units.evaluations, 16);
    assert!(units.best_objective_db <= full.best_objective_db);
    assert_eq!(units.best_config.tiles[0].matching, vec![false; 6]);
}

#[test]
fn evaluation_is_deterministic_and_hex_invariant() {
    let ev = mini_tile();
    let obj = Objective::direction(ev.radiating(), 20.0, 100.0, GainLevel::Rems).unwrap();
    let mut cfg = ev.uniform_config(UnitState::Pass);
    cfg.set_group(0, 3);
    cfg.set_group(4, 1);
    let a = ev.evaluate(&cfg, &obj);
    let b = ev.evaluate(&cfg, &obj);
    assert!((a.value_db - b.value_db).abs() <= 1e-13);
    let parsed = SwitchConfig::from_hex(&cfg.to_hex(), 3, 2).unwrap();
    assert_eq!(ev.evaluate(&parsed, &obj).value_db.to_bits(), a.value_db.to_bits());
    // The one-shot helper agrees with the cached evaluator.
    let one = evaluate_config(&cfg, ev.geometry(), ev.radiating().clone(), vec![vec![0, 1]], &obj).unwrap();
    assert_eq!(one.value_db.to_bits(), a.value_db.to_bits());
}

#[test]
fn open_units_kill_the_objective() {
    let ev = mini_tile();
    let obj = broadside(&ev);
    let pass = ev.evaluate(&ev.uniform_config(UnitState::Pass), &obj).value_db;
    let open = ev.evaluate(&ev.uniform_config(UnitState::OpenReflect), &obj).value_db;
    assert!(open < pass - 20.0, "{open} vs {pass}");

    let ideal = Evaluator::new(
        TileGeometry {
            switch: SwitchModel::ideal(),
            ..TileGeometry::with_shape(2, 1)
        },
        structure(2, 1),
        vec![vec![0, 1]],
    )
    .unwrap();
    let e = ideal.evaluate(&ideal.uniform_config(UnitState::OpenReflect), &obj);
    assert_eq!(e.value_db, f64::NEG_INFINITY);
    assert!(e.failure.is_some());
}

#[test]
fn relabeling_mirrored_tiles_keeps_broadside_objective() {
    // 2×2 array split into two 1×2 rows, mirror images of each other.
    let rad = structure(2, 2);
    let ev = Evaluator::new(TileGeometry::with_shape(1, 2), rad, tile_partition(2, 2, 1, 2).unwrap()).unwrap();
    let obj = broadside(&ev);
    let mut cfg = ev.uniform_config(UnitState::Pass);
    cfg.tiles[0].set_group(0, 1);
    cfg.tiles[0].set_group(4, 1);
    cfg.tiles[1].set_group(2, 3);
    let swapped = SwitchConfig {
        tiles: vec![cfg.tiles[1].clone(), cfg.tiles[0].clone()],
    };
    let (a, b) = (ev.evaluate(&cfg, &obj).value_db, ev.evaluate(&swapped, &obj).value_db);
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn ascent_from_the_optimum_stops_immediately() {
    let ev = mini_tile();
    let obj = Objective::direction(ev.radiating(), 25.0, 60.0, GainLevel::Rems).unwrap();
    let ex = exhaustive_search(&ev, &SearchSpace::all(ev.uniform_config(UnitState::Pass)), &obj, DEFAULT_CAP).unwrap();
    let opts = AscentOptions {
        restarts: 1,
        init: Some(ex.best_config.clone()),
        ..Default::default()
    };
    let r = coordinate_ascent(&ev, &obj, &opts).unwrap();
    assert_eq!(r.trajectory.len(), 2);
    assert_eq!(r.trajectory[1].moves, 0);
    assert_eq!(r.best_config, ex.best_config);
    assert_eq!(r.evaluations, 1 + 3 * 5);
}

#[test]
fn ascent_is_monotone_bounded_and_reproducible() {
    let ev = mini_tile();
    let grid = ev.radiating().grid().clone();
    for (k, (theta, phi)) in [(10.0, 0.0), (35.0, 135.0), (60.0, 270.0)].into_iter().enumerate() {
        let obj = Objective::direction(ev.radiating(), theta, phi, GainLevel::Rems).unwrap();
        let ex =
            exhaustive_search(&ev, &SearchSpace::all(ev.uniform_config(UnitState::Pass)), &obj, DEFAULT_CAP).unwrap();
        let opts = AscentOptions {
            restarts: 3,
            seed: 7 + k as u64,
            ..Default::default()
        };
        let r = coordinate_ascent(&ev, &obj, &opts).unwrap();
        assert!(r.best_objective_db <= ex.best_objective_db);
        for w in r.trajectory.windows(2) {
            if w[0].restart == w[1].restart {
                assert!(w[1].objective_db >= w[0].objective_db);
                assert_eq!(w[1].pass, w[0].pass + 1);
            }
        }
        let again = coordinate_ascent(&ev, &obj, &opts).unwrap();
        assert!(r.same_outcome(&again));
        let re = ev.evaluate(&r.best_config, &obj).value_db;
        assert!((re - r.best_objective_db).abs() < 1e-12);
        let _ = grid.angles_deg(obj.nodes[0]);
    }
}

#[test]
fn median_objective_and_report_json() {
    let ev = mini_tile();
    let obj = Objective::median_over(ev.radiating(), 30.0, 60.0, GainLevel::Rems).unwrap();
    assert!(obj.nodes.len() > 1);
    let r = coordinate_ascent(
        &ev,
        &obj,
        &AscentOptions {
            restarts: 2,
            max_passes: 3,
            seed: 1,
            init: None,
        },
    )
    .unwrap();
    let json = serde_json::to_string(&r).unwrap();
    let back: SearchReport = serde_json::from_str(&json).unwrap();
    assert!(back.same_outcome(&r));
    assert_eq!(back.best_config_hex, r.best_config.to_hex());

    let mut failed = r.clone();
    failed.best_objective_db = f64::NEG_INFINITY;
    let json = serde_json::to_string(&failed).unwrap();
    assert!(json.contains("\"best_objective_db\":null"));
    let back: SearchReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.best_objective_db, f64::NEG_INFINITY);
}

#[test]
fn off_hemisphere_direction_rejected() {
    let ev = mini_tile();
    assert!(Objective::direction(ev.radiating(), 120.0, 0.0, GainLevel::Rems).is_err());
    assert!(coordinate_ascent(
        &ev,
        &broadside(&ev),
        &AscentOptions {
            restarts: 0,
            ..Default::default()
        }
    )
    .is_err());
}

#[test]
fn per_direction_map_respects_gain_ordering() {
    let ev = mini_tile();
    let nodes = ev.radiating().grid().hemisphere(30.0).unwrap();
    let opts = AscentOptions {
        restarts: 1,
        ..Default::default()
    };
    let out = optimized_gain_map(&ev, &nodes, GainLevel::Rems, &opts).unwrap();
    assert_eq!(out.map.rows.len(), nodes.len());
    assert!(out.map.holes.is_empty());
    for (row, cfg) in out.map.rows.iter().zip(&out.configs) {
        let (g, t, r) = (row.g_rems.unwrap(), row.g_t.unwrap(), row.g_r.unwrap());
        assert!(g <= t * (1.0 + 1e-9) && t <= r * (1.0 + 1e-9));
        let direct = ev.evaluate(cfg, &Objective::node(row.node, GainLevel::Rems)).value_db;
        assert!((to_db(g) - direct).abs() < 1e-9);
    }
}
