//! Benchmark systems and the relative-gain / cost-aware comparison.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_array_tuning, build_tile, SwitchConfig, TileGeometry};
use crate::error::{Error, Result};
use crate::linalg::c;
use crate::radiating::RadiatingStructure;
use crate::rems::{gain_map, to_db, GainLevel, GainMap, Operators, RemsModel, RfFrontend, TuningNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BenchmarkKind {
    /// One perfectly matched RF chain per antenna: the radiating gain.
    AllDigitalIdeal,
    /// One 50 Ω RF chain per antenna, wired straight to its port.
    AllDigitalConventional,
    /// Proposed tuning network behind ideally matched PAs: the tuning gain.
    ProposedIdeal,
    /// Proposed tuning network with the low-impedance PA per tile.
    Proposed,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [
        BenchmarkKind::AllDigitalIdeal,
        BenchmarkKind::AllDigitalConventional,
        BenchmarkKind::ProposedIdeal,
        BenchmarkKind::Proposed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::AllDigitalIdeal => "all_digital_ideal",
            BenchmarkKind::AllDigitalConventional => "all_digital_conventional",
            BenchmarkKind::ProposedIdeal => "proposed_ideal",
            BenchmarkKind::Proposed => "proposed",
        }
    }

    pub fn needs_config(self) -> bool {
        matches!(self, BenchmarkKind::ProposedIdeal | BenchmarkKind::Proposed)
    }

    /// The level whose optimum is reported as this system's REMS gain.
    pub fn level(self) -> GainLevel {
        match self {
            BenchmarkKind::AllDigitalIdeal => GainLevel::Radiating,
            BenchmarkKind::ProposedIdeal => GainLevel::Tuning,
            _ => GainLevel::Rems,
        }
    }
}

/// Everything needed to map one benchmark.
#[derive(Debug, Clone)]
pub struct Recipe {
    pub kind: BenchmarkKind,
    pub model: RemsModel,
    pub operators: Operators,
    pub rf_chains: usize,
}

pub fn benchmark_model(
    kind: BenchmarkKind,
    radiating: Arc<RadiatingStructure>,
    geometry: &TileGeometry,
    config: Option<&SwitchConfig>,
    tile_map: &[Vec<usize>],
) -> Result<Recipe> {
    let ctx = *radiating.context();
    let m = radiating.port_count();
    let (frontend, tuning) = match kind {
        BenchmarkKind::AllDigitalIdeal | BenchmarkKind::AllDigitalConventional => {
            (RfFrontend::uniform(m, c(ctx.r0))?, TuningNetwork::feedthrough(m, ctx)?)
        }
        BenchmarkKind::ProposedIdeal | BenchmarkKind::Proposed => {
            let config = config.ok_or_else(|| Error::MissingConfig(kind.name().into()))?;
            if config.tiles.len() != tile_map.len() {
                return Err(Error::InvalidConfig(format!(
                    "{} tile configurations for {} tiles",
                    config.tiles.len(),
                    tile_map.len()
                )));
            }
            let tiles = config
                .tiles
                .par_iter()
                .map(|t| build_tile(t, geometry, &ctx))
                .collect::<Result<Vec<_>>>()?;
            let tuning = build_array_tuning(&tiles, tile_map)?;
            (RfFrontend::uniform(tiles.len(), c(geometry.pa_impedance()))?, tuning)
        }
    };
    let rf_chains = frontend.len();
    let model = RemsModel::new(frontend, tuning, radiating)?;
    let operators = Operators::assemble(&model)?;
    Ok(Recipe {
        kind,
        model,
        operators,
        rf_chains,
    })
}

/// Gain map whose `g_rems` column is the kind's reported gain.
pub fn evaluate_recipe(recipe: &Recipe, nodes: &[usize]) -> GainMap {
    let levels: &[GainLevel] = match recipe.kind {
        BenchmarkKind::AllDigitalIdeal => &[GainLevel::Radiating],
        BenchmarkKind::ProposedIdeal => &[GainLevel::Tuning, GainLevel::Radiating],
        _ => &GainLevel::ALL,
    };
    let mut map = gain_map(&recipe.operators, nodes, levels);
    fill_ideal_columns(recipe.kind, &mut map);
    map
}

/// For the ideal kinds, fills the levels below the reported one from the
/// identities that define them; other kinds are left alone.
pub fn fill_ideal_columns(kind: BenchmarkKind, map: &mut GainMap) {
    for r in &mut map.rows {
        match kind {
            BenchmarkKind::AllDigitalIdeal => {
                r.g_t = r.g_r;
                r.g_rems = r.g_r;
                r.eta_matching = r.g_r.map(|_| 1.0);
                r.eta_tuning = r.g_r.map(|_| 1.0);
            }
            BenchmarkKind::ProposedIdeal => {
                r.g_rems = r.g_t;
                r.eta_matching = r.g_t.map(|_| 1.0);
            }
            _ => {}
        }
    }
}

pub struct ComparisonEntry<'a> {
    pub name: String,
    pub map: &'a GainMap,
    pub rf_chains: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub rf_chains: usize,
    pub median_gain_dbi: f64,
    pub median_relative_db: f64,
    /// Median REMS gain per RF chain (dB).
    pub cam_db: f64,
    /// `Ĝ_REMS/Ĝ_R` in dB, aligned with the reference map's rows.
    #[serde(skip)]
    pub relative_db: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn db_or_floor(x: Option<f64>) -> f64 {
    x.map_or(f64::NEG_INFINITY, to_db)
}

/// Relative gains against the reference's `g_r` column. Every entry must
/// cover exactly the reference's directions; medians are unweighted.
pub fn compare(reference: &GainMap, entries: &[ComparisonEntry]) -> Result<Vec<ComparisonRow>> {
    let ref_nodes: Vec<usize> = reference.rows.iter().map(|r| r.node).collect();
    let ref_gain: Vec<f64> = reference.rows.iter().map(|r| db_or_floor(r.g_r)).collect();
    entries
        .iter()
        .map(|e| {
            if e.map.rows.len() != ref_nodes.len() {
                return Err(Error::GridMismatch);
            }
            let by_node: HashMap<usize, Option<f64>> = e.map.rows.iter().map(|r| (r.node, r.g_rems)).collect();
            let gains = ref_nodes
                .iter()
                .map(|n| by_node.get(n).map(|g| db_or_floor(*g)).ok_or(Error::GridMismatch))
                .collect::<Result<Vec<f64>>>()?;
            let relative_db: Vec<f64> = gains.iter().zip(&ref_gain).map(|(g, r)| g - r).collect();
            let median_gain_dbi = median(gains);
            Ok(ComparisonRow {
                name: e.name.clone(),
                rf_chains: e.rf_chains,
                median_gain_dbi,
                median_relative_db: median(relative_db.clone()),
                cam_db: median_gain_dbi - to_db(e.rf_chains as f64),
                relative_db,
            })
        })
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Summary CSV (one row per architecture) plus, when `relative_path` is
/// given, the per-direction relative gains with one column per architecture.
pub fn write_comparison(
    path: impl AsRef<Path>,
    relative_path: Option<&Path>,
    reference: &GainMap,
    rows: &[ComparisonRow],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["architecture", "rf_chains", "median_G_rems_dBi", "median_relative_dB", "CAM_dB"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.rf_chains.to_string(),
            r.median_gain_dbi.to_string(),
            r.median_relative_db.to_string(),
            r.cam_db.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    if let Some(rel) = relative_path {
        let mut w = csv::Writer::from_path(rel).map_err(|e| csv_err(rel, e))?;
        let mut header = vec!["theta_deg".to_string(), "phi_deg".to_string()];
        header.extend(rows.iter().map(|r| format!("{}_relative_dB", r.name)));
        w.write_record(&header).map_err(|e| csv_err(rel, e))?;
        let mut order: Vec<usize> = (0..reference.rows.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (&reference.rows[a], &reference.rows[b]);
            ra.theta_deg.total_cmp(&rb.theta_deg).then(ra.phi_deg.total_cmp(&rb.phi_deg))
        });
        for i in order {
            let mut rec = vec![reference.rows[i].theta_deg.to_string(), reference.rows[i].phi_deg.to_string()];
            rec.extend(rows.iter().map(|r| r.relative_db[i].to_string()));
            w.write_record(&rec).map_err(|e| csv_err(rel, e))?;
        }
        w.flush().map_err(|e| Error::io(rel, e))?;
    }
    Ok(())
}
