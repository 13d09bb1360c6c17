//! Discrete search over switch configurations.
//!
//! Every configuration is scored by the Rayleigh-optimal gain of the model
//! it realizes. Matching sections (one per stub pattern) and branch 2-ports
//! (one per unit state) are built once up front, so a score costs one tile
//! assembly per tile plus one operator assembly.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::architecture::{
    assemble_tile, build_array_tuning, build_branch, build_front_section, SwitchConfig, TileConfig, TileGeometry,
    UnitState,
};
use crate::error::{Error, Result};
use crate::linalg::c;
use crate::netcalc::MultiportNetwork;
use crate::radiating::RadiatingStructure;
use crate::rems::{gain_map, to_db, GainLevel, GainMap, LevelSolver, MapRow, Operators, RemsModel, RfFrontend};

/// Accepted moves must beat the incumbent by more than this (dB).
pub const IMPROVEMENT_DB: f64 = 1e-12;
pub const DEFAULT_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub nodes: Vec<usize>,
    /// Gain level being maximized; REMS unless scoring the ideal-PA variant.
    pub level: GainLevel,
}

impl Objective {
    pub fn node(node: usize, level: GainLevel) -> Self {
        Self { nodes: vec![node], level }
    }

    /// Nearest grid direction; must lie in the front hemisphere.
    pub fn direction(radiating: &RadiatingStructure, theta_deg: f64, phi_deg: f64, level: GainLevel) -> Result<Self> {
        if !(0.0..=90.0).contains(&theta_deg) || !phi_deg.is_finite() {
            return Err(Error::Precondition(format!(
                "objective direction θ = {theta_deg}° is outside the front hemisphere"
            )));
        }
        let (node, _) = radiating.grid().nearest(theta_deg, phi_deg)?;
        Ok(Self::node(node, level))
    }

    /// Median over a coarser subset of the grid up to `max_theta_deg`.
    pub fn median_over(radiating: &RadiatingStructure, step_deg: f64, max_theta_deg: f64, level: GainLevel) -> Result<Self> {
        let nodes = radiating.grid().subset(step_deg, max_theta_deg)?;
        if nodes.is_empty() {
            return Err(Error::Precondition("objective subset is empty".into()));
        }
        Ok(Self { nodes, level })
    }
}

/// Score of one configuration; failures score −∞ and keep their reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value_db: f64,
    pub failure: Option<String>,
}

impl Evaluation {
    fn failed(reason: String) -> Self {
        Self {
            value_db: f64::NEG_INFINITY,
            failure: Some(reason),
        }
    }
}

pub struct Evaluator {
    geometry: TileGeometry,
    radiating: Arc<RadiatingStructure>,
    tile_map: Vec<Vec<usize>>,
    fronts: Vec<std::result::Result<MultiportNetwork, String>>,
    branches: Vec<std::result::Result<MultiportNetwork, String>>,
    evaluations: AtomicU64,
}

impl Evaluator {
    pub fn new(geometry: TileGeometry, radiating: Arc<RadiatingStructure>, tile_map: Vec<Vec<usize>>) -> Result<Self> {
        geometry.validate()?;
        if tile_map.iter().any(|t| t.len() != geometry.antennas()) {
            return Err(Error::Precondition(format!(
                "every tile must map {} antennas",
                geometry.antennas()
            )));
        }
        if tile_map.iter().map(Vec::len).sum::<usize>() != radiating.port_count() {
            return Err(Error::Precondition("tile map does not cover the radiating structure".into()));
        }
        let ctx = *radiating.context();
        let stubs = geometry.stub_count;
        let fronts = (0..1usize << (2 * stubs))
            .into_par_iter()
            .map(|v| {
                let bits: Vec<bool> = (0..2 * stubs).map(|b| v >> b & 1 == 1).collect();
                build_front_section(&bits, &geometry, &ctx).map_err(|e| e.to_string())
            })
            .collect();
        let branches = (0..4)
            .map(|v| build_branch(UnitState::from_index(v), &geometry, &ctx).map_err(|e| e.to_string()))
            .collect();
        Ok(Self {
            geometry,
            radiating,
            tile_map,
            fronts,
            branches,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn geometry(&self) -> &TileGeometry {
        &self.geometry
    }

    pub fn radiating(&self) -> &Arc<RadiatingStructure> {
        &self.radiating
    }

    pub fn tile_count(&self) -> usize {
        self.tile_map.len()
    }

    /// Scores computed so far (all threads).
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn uniform_config(&self, unit: UnitState) -> SwitchConfig {
        self.geometry.uniform_config(self.tile_count(), unit)
    }

    fn tile(&self, t: &TileConfig) -> Result<crate::rems::TuningNetwork> {
        t.validate(self.geometry.stub_count, self.geometry.antennas())?;
        let key = t.matching.iter().enumerate().fold(0, |acc, (b, on)| acc | (*on as usize) << b);
        let pick = |r: &std::result::Result<MultiportNetwork, String>| {
            r.as_ref().map_err(|e| Error::Precondition(e.clone())).cloned()
        };
        let front = pick(&self.fronts[key])?;
        let branches = t
            .units
            .iter()
            .map(|u| pick(&self.branches[u.index()]))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&MultiportNetwork> = branches.iter().collect();
        assemble_tile(&front, &refs, &self.geometry, self.radiating.context())
    }

    /// Assembled model and operators of a configuration.
    pub fn operators(&self, config: &SwitchConfig) -> Result<(RemsModel, Operators)> {
        if config.tiles.len() != self.tile_count() {
            return Err(Error::InvalidConfig(format!(
                "{} tile configurations for {} tiles",
                config.tiles.len(),
                self.tile_count()
            )));
        }
        let tiles = config.tiles.iter().map(|t| self.tile(t)).collect::<Result<Vec<_>>>()?;
        let tuning = build_array_tuning(&tiles, &self.tile_map)?;
        let frontend = RfFrontend::uniform(tiles.len(), c(self.geometry.pa_impedance()))?;
        let model = RemsModel::new(frontend, tuning, self.radiating.clone())?;
        let ops = Operators::assemble(&model)?;
        Ok((model, ops))
    }

    fn try_evaluate(&self, config: &SwitchConfig, objective: &Objective) -> Result<f64> {
        let (_, ops) = self.operators(config)?;
        let solver = LevelSolver::new(&ops, objective.level)?;
        let values: Vec<f64> = objective.nodes.iter().map(|&n| to_db(solver.max_gain(&ops, n))).collect();
        Ok(if values.len() == 1 { values[0] } else { median(values) })
    }

    /// Deterministic score in dB.
    pub fn evaluate(&self, config: &SwitchConfig, objective: &Objective) -> Evaluation {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        match self.try_evaluate(config, objective) {
            Ok(v) if v.is_nan() => Evaluation::failed("objective is NaN".into()),
            Ok(v) => Evaluation {
                value_db: v,
                failure: None,
            },
            Err(e) => Evaluation::failed(e.to_string()),
        }
    }

    /// Full gain-map row (all levels, breakdown) of a configuration.
    pub fn map_row(&self, config: &SwitchConfig, node: usize) -> Result<MapRow> {
        let (_, ops) = self.operators(config)?;
        let map = gain_map(&ops, &[node], &GainLevel::ALL);
        Ok(map.rows.into_iter().next().expect("one node"))
    }
}

/// One-shot score of a configuration.
pub fn evaluate_config(
    config: &SwitchConfig,
    geometry: &TileGeometry,
    radiating: Arc<RadiatingStructure>,
    tile_map: Vec<Vec<usize>>,
    objective: &Objective,
) -> Result<Evaluation> {
    Ok(Evaluator::new(geometry.clone(), radiating, tile_map)?.evaluate(config, objective))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// dB values that may be −∞; JSON has no infinities, so they travel as null.
mod db_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub restart: usize,
    /// 0 is the starting point.
    pub pass: usize,
    #[serde(with = "db_serde")]
    pub objective_db: f64,
    pub moves: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchReport {
    pub method: String,
    pub best_config: SwitchConfig,
    pub best_config_hex: String,
    #[serde(with = "db_serde")]
    pub best_objective_db: f64,
    pub evaluations: u64,
    pub failed_evaluations: u64,
    pub first_failure: Option<String>,
    pub trajectory: Vec<PassRecord>,
    pub seed: Option<u64>,
    pub restarts: usize,
    pub wall_seconds: f64,
}

impl SearchReport {
    /// Equality up to wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.method == other.method
            && self.best_config == other.best_config
            && self.best_objective_db.to_bits() == other.best_objective_db.to_bits()
            && self.evaluations == other.evaluations
            && self.failed_evaluations == other.failed_evaluations
            && self.trajectory == other.trajectory
    }
}

/// Enumerable subset: `free` groups range over all 4 states, the rest keep
/// their value in `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub base: SwitchConfig,
    pub free: Vec<usize>,
}

impl SearchSpace {
    pub fn all(base: SwitchConfig) -> Self {
        let free = (0..base.group_count()).collect();
        Self { base, free }
    }

    /// Only the switch units vary; stubs stay as in `base`.
    pub fn units_only(base: SwitchConfig) -> Self {
        let free = Self::filter(&base, false);
        Self { base, free }
    }

    /// Only the matching stubs vary.
    pub fn matching_only(base: SwitchConfig) -> Self {
        let free = Self::filter(&base, true);
        Self { base, free }
    }

    fn filter(base: &SwitchConfig, stubs: bool) -> Vec<usize> {
        let mut out = Vec::new();
        let mut g = 0;
        for t in &base.tiles {
            for k in 0..t.group_count() {
                if (k < t.stub_count()) == stubs {
                    out.push(g);
                }
                g += 1;
            }
        }
        out
    }

    pub fn size(&self) -> f64 {
        4f64.powi(self.free.len() as i32)
    }

    pub fn config(&self, index: u64) -> SwitchConfig {
        let mut cfg = self.base.clone();
        for (j, &g) in self.free.iter().enumerate() {
            cfg.set_group(g, (index >> (2 * j) & 3) as usize);
        }
        cfg
    }
}

fn failure_summary(evals: &[&Evaluation]) -> (u64, Option<String>) {
    let failed = evals.iter().filter(|e| e.failure.is_some()).count() as u64;
    (failed, evals.iter().find_map(|e| e.failure.clone()))
}

/// Global optimum over `space`; ties go to the lowest enumeration index.
pub fn exhaustive_search(ev: &Evaluator, space: &SearchSpace, objective: &Objective, cap: u64) -> Result<SearchReport> {
    let size = space.size();
    if size > cap as f64 {
        return Err(Error::CapExceeded { size, cap });
    }
    let start = Instant::now();
    let n = size as u64;
    let scored: Vec<Evaluation> = (0..n)
        .into_par_iter()
        .map(|i| ev.evaluate(&space.config(i), objective))
        .collect();
    let mut best = 0;
    for (i, e) in scored.iter().enumerate() {
        if e.value_db > scored[best].value_db {
            best = i;
        }
    }
    let refs: Vec<&Evaluation> = scored.iter().collect();
    let (failed, first_failure) = failure_summary(&refs);
    let best_config = space.config(best as u64);
    Ok(SearchReport {
        method: "exhaustive".into(),
        best_config_hex: best_config.to_hex(),
        best_config,
        best_objective_db: scored[best].value_db,
        evaluations: n,
        failed_evaluations: failed,
        first_failure,
        trajectory: Vec::new(),
        seed: None,
        restarts: 1,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AscentOptions {
    pub restarts: usize,
    pub max_passes: usize,
    pub seed: u64,
    /// Starting point of restart 0; the others (and restart 0 without it)
    /// start from seeded random configurations.
    #[serde(skip)]
    pub init: Option<SwitchConfig>,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_passes: 20,
            seed: 0,
            init: None,
        }
    }
}

struct RestartOutcome {
    config: SwitchConfig,
    value: f64,
    trajectory: Vec<PassRecord>,
    evaluations: u64,
    failed: u64,
    first_failure: Option<String>,
}

fn random_config(template: &SwitchConfig, seed: u64) -> SwitchConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = template.clone();
    for g in 0..cfg.group_count() {
        cfg.set_group(g, rng.random_range(0..4));
    }
    cfg
}

fn ascend(ev: &Evaluator, objective: &Objective, mut cfg: SwitchConfig, restart: usize, max_passes: usize) -> RestartOutcome {
    let first = ev.evaluate(&cfg, objective);
    let mut value = first.value_db;
    let mut evaluations = 1;
    let mut failed = first.failure.is_some() as u64;
    let mut first_failure = first.failure;
    let mut trajectory = vec![PassRecord {
        restart,
        pass: 0,
        objective_db: value,
        moves: 0,
    }];
    for pass in 1..=max_passes {
        let mut moves = 0;
        for g in 0..cfg.group_count() {
            let current = cfg.group(g);
            let candidates: Vec<(usize, Evaluation)> = (0..4)
                .filter(|v| *v != current)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|v| {
                    let mut trial = cfg.clone();
                    trial.set_group(g, v);
                    (v, ev.evaluate(&trial, objective))
                })
                .collect();
            evaluations += candidates.len() as u64;
            let mut best: Option<(usize, f64)> = None;
            for (v, e) in &candidates {
                if let Some(f) = &e.failure {
                    failed += 1;
                    first_failure.get_or_insert_with(|| f.clone());
                }
                if best.is_none_or(|b| e.value_db > b.1) {
                    best = Some((*v, e.value_db));
                }
            }
            if let Some((v, val)) = best {
                if val > value + IMPROVEMENT_DB {
                    cfg.set_group(g, v);
                    value = val;
                    moves += 1;
                }
            }
        }
        trajectory.push(PassRecord {
            restart,
            pass,
            objective_db: value,
            moves,
        });
        if moves == 0 {
            break;
        }
    }
    RestartOutcome {
        config: cfg,
        value,
        trajectory,
        evaluations,
        failed,
        first_failure,
    }
}

/// Coordinate ascent over groups of 4 states (stubs, then units, tile by
/// tile). Keeps the current state on ties; restarts run in parallel and the
/// best (lowest restart on ties) is returned.
pub fn coordinate_ascent(ev: &Evaluator, objective: &Objective, opts: &AscentOptions) -> Result<SearchReport> {
    if opts.restarts == 0 {
        return Err(Error::Precondition("coordinate ascent needs at least one restart".into()));
    }
    let template = ev.uniform_config(UnitState::Pass);
    if let Some(init) = &opts.init {
        if init.tiles.len() != ev.tile_count() {
            return Err(Error::InvalidConfig("initial configuration has the wrong tile count".into()));
        }
        for t in &init.tiles {
            t.validate(ev.geometry.stub_count, ev.geometry.antennas())?;
        }
    }
    let start = Instant::now();
    let outcomes: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let init = match (&opts.init, r) {
                (Some(cfg), 0) => cfg.clone(),
                _ => random_config(&template, opts.seed.wrapping_add(r as u64)),
            };
            ascend(ev, objective, init, r, opts.max_passes)
        })
        .collect();
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value > outcomes[best].value {
            best = i;
        }
    }
    let best_config = outcomes[best].config.clone();
    Ok(SearchReport {
        method: "coordinate_ascent".into(),
        best_config_hex: best_config.to_hex(),
        best_config,
        best_objective_db: outcomes[best].value,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        failed_evaluations: outcomes.iter().map(|o| o.failed).sum(),
        first_failure: outcomes.iter().find_map(|o| o.first_failure.clone()),
        trajectory: outcomes.iter().flat_map(|o| o.trajectory.iter().cloned()).collect(),
        seed: Some(opts.seed),
        restarts: opts.restarts,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Gain map with the switch states re-optimized for every direction.
#[derive(Debug, Clone)]
pub struct OptimizedMap {
    pub map: GainMap,
    pub configs: Vec<SwitchConfig>,
    pub evaluations: u64,
}

/// Runs coordinate ascent per node (maximizing `level`) and records the full
/// breakdown of each winner. Restart 0 starts from `opts.init` or, when
/// unset, from stubs off and all units passing.
pub fn optimized_gain_map(ev: &Evaluator, nodes: &[usize], level: GainLevel, opts: &AscentOptions) -> Result<OptimizedMap> {
    let opts = AscentOptions {
        init: Some(opts.init.clone().unwrap_or_else(|| ev.uniform_config(UnitState::Pass))),
        ..opts.clone()
    };
    let per_node: Vec<(MapRow, Vec<crate::rems::MapHole>, SwitchConfig, u64)> = nodes
        .par_iter()
        .map(|&node| {
            let report = coordinate_ascent(ev, &Objective::node(node, level), &opts)?;
            let (theta_deg, phi_deg) = ev.radiating.grid().angles_deg(node);
            let mut holes = Vec::new();
            let row = match ev.map_row(&report.best_config, node) {
                Ok(row) => row,
                Err(e) => {
                    holes.push(crate::rems::MapHole {
                        node,
                        level,
                        reason: e.to_string(),
                    });
                    MapRow {
                        node,
                        theta_deg,
                        phi_deg,
                        ..Default::default()
                    }
                }
            };
            Ok((row, holes, report.best_config, report.evaluations))
        })
        .collect::<Result<_>>()?;
    let mut out = OptimizedMap {
        map: GainMap::default(),
        configs: Vec::with_capacity(nodes.len()),
        evaluations: 0,
    };
    for (row, holes, cfg, n) in per_node {
        out.map.rows.push(row);
        out.map.holes.extend(holes);
        out.configs.push(cfg);
        out.evaluations += n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
