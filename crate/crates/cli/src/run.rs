use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;

use rems::architecture::{
    benchmark_model, compare, evaluate_recipe, fill_ideal_columns, tile_partition, write_comparison, BenchmarkKind,
    ComparisonEntry, ComparisonRow, SwitchConfig, TileGeometry, UnitState,
};
use rems::components::SwitchModel;
use rems::netcalc::{renormalize, PortSpec, WaveContext};
use rems::optimize::{
    coordinate_ascent, exhaustive_search, optimized_gain_map, Evaluator, Objective, SearchReport, SearchSpace,
};
use rems::radiating::{load_patterns, load_touchstone, synthesize_array, AngularGrid, RadiatingStructure};
use rems::rems::{write_gain_map, GainMap};

use crate::config::{Method, ObjectiveSpec, ProposedSpec, RadiatingSource, RunConfig, SpaceKind, SwitchSource};

/// A problem with what the user asked for (exit code 2).
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// 0 ok, 1 internal, 2 input error, 3 refused (search cap).
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use rems::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::CapExceeded { .. } => 3,
                E::Parse { .. }
                | E::Io { .. }
                | E::Precondition(_)
                | E::InvalidPort { .. }
                | E::GridMismatch
                | E::UnphysicalSwitch(_)
                | E::NonPassiveStructure { .. }
                | E::MissingConfig(_)
                | E::InvalidConfig(_) => 2,
                _ => 1,
            };
        }
        if cause.is::<InputError>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

/// Everything built from a config before any map or search runs.
pub struct Setup {
    pub radiating: Arc<RadiatingStructure>,
    pub geometry: TileGeometry,
    pub tile_map: Vec<Vec<usize>>,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    let ctx = WaveContext::new(cfg.frequency_hz, cfg.reference_ohm)?;
    let grid = Arc::new(AngularGrid::new(cfg.grid_deg)?);
    let radiating = match &cfg.radiating {
        RadiatingSource::Synthetic(spec) => synthesize_array(spec, &ctx, grid)?,
        RadiatingSource::Files {
            touchstone,
            patterns,
            rows,
            cols,
        } => {
            let ts = load_touchstone(touchstone, &ctx)?;
            let m = ts.network.port_count();
            if m != rows * cols {
                return Err(input(format!(
                    "{} has {m} ports but the array is {rows}×{cols}",
                    touchstone.display()
                )));
            }
            let ports = (0..m).map(|k| PortSpec::real(ctx.r0, format!("ant-{}", k + 1))).collect();
            let s = renormalize(&ts.network, ports)?.into_s();
            let loaded = load_patterns(patterns, grid, &ctx)?;
            if loaded.patterns.len() != m {
                return Err(input(format!(
                    "{} holds {} ports, {} has {m}",
                    patterns.display(),
                    loaded.patterns.len(),
                    touchstone.display()
                )));
            }
            info!(
                "loaded {m}-port array at {:.4} GHz, patterns snapped by up to {:.3}°",
                ts.frequency / 1e9,
                loaded.max_snap_deg
            );
            RadiatingStructure::new(s, loaded.patterns, ctx)?
        }
    };
    let mut geometry = cfg.geometry.clone();
    geometry.switch = match &cfg.switch {
        SwitchSource::Ideal => SwitchModel::ideal(),
        SwitchSource::Parametric(p) => SwitchModel::Parametric(*p),
        SwitchSource::Measured { on, off } => {
            SwitchModel::measured(load_touchstone(on, &ctx)?.network, load_touchstone(off, &ctx)?.network)?
        }
    };
    geometry.validate()?;
    let (rows, cols) = cfg.radiating.shape();
    let tile_map = tile_partition(rows, cols, geometry.rows, geometry.cols)?;
    Ok(Setup {
        radiating: Arc::new(radiating),
        geometry,
        tile_map,
    })
}

impl Setup {
    pub fn parse_config(&self, hex: &str) -> Result<SwitchConfig> {
        let cfg = SwitchConfig::from_hex(hex, self.geometry.stub_count, self.geometry.antennas())?;
        if cfg.tiles.len() != self.tile_map.len() {
            return Err(input(format!(
                "configuration has {} tiles, the array has {}",
                cfg.tiles.len(),
                self.tile_map.len()
            )));
        }
        Ok(cfg)
    }

    pub fn evaluator(&self) -> Result<Evaluator> {
        Ok(Evaluator::new(
            self.geometry.clone(),
            self.radiating.clone(),
            self.tile_map.clone(),
        )?)
    }
}

#[derive(Serialize)]
struct ArchitectureSummary {
    #[serde(flatten)]
    row: ComparisonRow,
    holes: usize,
    evaluations: u64,
}

#[derive(Serialize)]
struct OptimizeSummary<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    method: &'a str,
    /// Non-finite values serialize as null.
    best_objective_db: f64,
    best_config_hex: &'a str,
    evaluations: u64,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    directions: usize,
    architectures: Vec<ArchitectureSummary>,
    config: &'a RunConfig,
}

struct Mapped {
    kind: BenchmarkKind,
    map: GainMap,
    rf_chains: usize,
    evaluations: u64,
    /// Per-direction winners, aligned with the map rows.
    configs: Option<Vec<SwitchConfig>>,
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| rems::Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_file(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(&path, contents).map_err(|e| rems::Error::Io { path, source: e })?;
    Ok(())
}

/// Maps every requested benchmark, compares them against the radiating gain
/// and writes the CSVs and `summary.json`. `fixed` overrides the config's
/// choice for the proposed systems.
pub fn gain_map(cfg: &RunConfig, fixed: Option<&SwitchConfig>, out: &Path) -> Result<Vec<ComparisonRow>> {
    let setup = setup(cfg)?;
    let rad = &setup.radiating;
    let nodes = rad.grid().subset(cfg.map.step_deg, cfg.map.max_theta_deg)?;
    let fixed = match (fixed, &cfg.proposed) {
        (Some(c), _) => Some(c.clone()),
        (None, ProposedSpec::Hex(h)) => Some(setup.parse_config(h)?),
        (None, ProposedSpec::PerDirection) => None,
    };
    let mut kinds = cfg.benchmarks.clone();
    kinds.dedup();
    if kinds.is_empty() {
        return Err(input("no benchmarks requested"));
    }
    info!("mapping {} directions for {} systems", nodes.len(), kinds.len());

    let reference = benchmark_model(BenchmarkKind::AllDigitalIdeal, rad.clone(), &setup.geometry, None, &setup.tile_map)?;
    let reference = evaluate_recipe(&reference, &nodes);
    let mut evaluator = None;
    let mut mapped = Vec::new();
    for &kind in &kinds {
        let m = match (kind, &fixed) {
            (BenchmarkKind::AllDigitalIdeal, _) => Mapped {
                kind,
                map: reference.clone(),
                rf_chains: rad.port_count(),
                evaluations: 0,
                configs: None,
            },
            (k, None) if k.needs_config() => {
                if evaluator.is_none() {
                    evaluator = Some(setup.evaluator()?);
                }
                let ev = evaluator.as_ref().unwrap();
                let mut opt = optimized_gain_map(ev, &nodes, k.level(), &cfg.ascent_options())?;
                fill_ideal_columns(k, &mut opt.map);
                Mapped {
                    kind,
                    map: opt.map,
                    rf_chains: setup.tile_map.len(),
                    evaluations: opt.evaluations,
                    configs: Some(opt.configs),
                }
            }
            (k, c) => {
                let recipe = benchmark_model(k, rad.clone(), &setup.geometry, c.as_ref(), &setup.tile_map)?;
                Mapped {
                    kind,
                    map: evaluate_recipe(&recipe, &nodes),
                    rf_chains: recipe.rf_chains,
                    evaluations: 0,
                    configs: None,
                }
            }
        };
        info!("{}: {} holes", kind.name(), m.map.holes.len());
        mapped.push(m);
    }

    let entries: Vec<ComparisonEntry> = mapped
        .iter()
        .map(|m| ComparisonEntry {
            name: m.kind.name().to_string(),
            map: &m.map,
            rf_chains: m.rf_chains,
        })
        .collect();
    let rows = compare(&reference, &entries)?;

    create_dir(out)?;
    for m in &mapped {
        write_gain_map(out.join(format!("gain_map_{}.csv", m.kind.name())), &m.map)?;
        if let Some(configs) = &m.configs {
            write_configs(&out.join(format!("configs_{}.csv", m.kind.name())), &m.map, configs)?;
        }
    }
    write_comparison(
        out.join("comparison.csv"),
        Some(&out.join("comparison_relative.csv")),
        &reference,
        &rows,
    )?;
    let summary = Summary {
        tool: "rems",
        version: env!("CARGO_PKG_VERSION"),
        command: "gain-map",
        seed: cfg.seed,
        directions: nodes.len(),
        architectures: rows
            .iter()
            .zip(&mapped)
            .map(|(row, m)| ArchitectureSummary {
                row: row.clone(),
                holes: m.map.holes.len(),
                evaluations: m.evaluations,
            })
            .collect(),
        config: cfg,
    };
    write_file(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(rows)
}

fn write_configs(path: &Path, map: &GainMap, configs: &[SwitchConfig]) -> Result<()> {
    let mut order: Vec<usize> = (0..configs.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&map.rows[a], &map.rows[b]);
        ra.theta_deg.total_cmp(&rb.theta_deg).then(ra.phi_deg.total_cmp(&rb.phi_deg))
    });
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["theta_deg", "phi_deg", "config_hex"])?;
    for i in order {
        let r = &map.rows[i];
        w.write_record([r.theta_deg.to_string(), r.phi_deg.to_string(), configs[i].to_hex()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn objective(spec: &ObjectiveSpec, rad: &RadiatingStructure) -> Result<Objective> {
    let obj = match *spec {
        ObjectiveSpec::Direction {
            theta_deg,
            phi_deg,
            level,
        } => Objective::direction(rad, theta_deg, phi_deg, level),
        ObjectiveSpec::Median {
            step_deg,
            max_theta_deg,
            level,
        } => Objective::median_over(rad, step_deg, max_theta_deg, level),
    };
    obj.map_err(|e| input(format!("invalid objective: {e}")))
}

/// Runs the configured search and writes `search_report.json`,
/// `best_config.json` and `best_config.hex`.
pub fn optimize(cfg: &RunConfig, out: &Path) -> Result<SearchReport> {
    let spec = cfg
        .objective
        .as_ref()
        .ok_or_else(|| input("optimize needs an `objective` in the config"))?;
    let setup = setup(cfg)?;
    let obj = objective(spec, &setup.radiating)?;
    let ev = setup.evaluator()?;
    let report = match cfg.search.method {
        Method::Ascent => coordinate_ascent(&ev, &obj, &cfg.ascent_options())?,
        Method::Exhaustive => {
            let base = ev.uniform_config(UnitState::Pass);
            let space = match cfg.search.space {
                SpaceKind::All => SearchSpace::all(base),
                SpaceKind::UnitsOnly => SearchSpace::units_only(base),
                SpaceKind::MatchingOnly => SearchSpace::matching_only(base),
            };
            exhaustive_search(&ev, &space, &obj, cfg.search.cap)?
        }
    };
    info!(
        "{}: best {:.3} dB after {} evaluations",
        report.method, report.best_objective_db, report.evaluations
    );
    create_dir(out)?;
    write_file(out.join("search_report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    write_file(
        out.join("best_config.json"),
        serde_json::to_string_pretty(&report.best_config)? + "\n",
    )?;
    write_file(out.join("best_config.hex"), report.best_config_hex.clone() + "\n")?;
    let summary = OptimizeSummary {
        tool: "rems",
        version: env!("CARGO_PKG_VERSION"),
        command: "optimize",
        seed: cfg.seed,
        method: &report.method,
        best_objective_db: report.best_objective_db,
        best_config_hex: &report.best_config_hex,
        evaluations: report.evaluations,
        config: cfg,
    };
    write_file(out.join("optimize_summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    if cfg.search.then_gain_map {
        gain_map(cfg, Some(&report.best_config), out)?;
    }
    Ok(report)
}
