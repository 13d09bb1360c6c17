use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{to_db, GainLevel, GainResult, LevelSolver, Operators};
use crate::error::{Error, Result};

/// Per-direction optimal gains (linear) and the efficiency chain of the
/// most complete level that was evaluated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapRow {
    pub node: usize,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub g_rems: Option<f64>,
    pub g_t: Option<f64>,
    pub g_r: Option<f64>,
    pub eta_matching: Option<f64>,
    pub eta_tuning: Option<f64>,
    pub eta_radiating: Option<f64>,
    pub directivity: Option<f64>,
}

impl MapRow {
    pub fn get(&self, level: GainLevel) -> Option<f64> {
        match level {
            GainLevel::Rems => self.g_rems,
            GainLevel::Tuning => self.g_t,
            GainLevel::Radiating => self.g_r,
        }
    }

    fn set(&mut self, level: GainLevel, v: f64) {
        match level {
            GainLevel::Rems => self.g_rems = Some(v),
            GainLevel::Tuning => self.g_t = Some(v),
            GainLevel::Radiating => self.g_r = Some(v),
        }
    }

    fn take_breakdown(&mut self, r: &GainResult) {
        self.eta_matching = r.powers.eta_matching;
        self.eta_tuning = r.powers.eta_tuning;
        self.eta_radiating = r.powers.eta_radiating;
        self.directivity = r.directivity;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapHole {
    pub node: usize,
    pub level: GainLevel,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GainMap {
    /// Rows in (θ, φ) order.
    pub rows: Vec<MapRow>,
    pub holes: Vec<MapHole>,
}

impl GainMap {
    pub fn column(&self, level: GainLevel) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.get(level)).collect()
    }
}

/// Evaluates the requested levels at every node. The power form and its
/// inverse root are computed once per level; directions run in parallel.
pub fn gain_map(ops: &Operators, nodes: &[usize], levels: &[GainLevel]) -> GainMap {
    let grid = ops.radiating().grid().clone();
    // Most complete level first so its breakdown wins.
    let mut ordered: Vec<GainLevel> = GainLevel::ALL.into_iter().filter(|l| levels.contains(l)).collect();
    ordered.dedup();
    let solvers: Vec<(GainLevel, std::result::Result<LevelSolver, String>)> = ordered
        .iter()
        .map(|&l| (l, LevelSolver::new(ops, l).map_err(|e| e.to_string())))
        .collect();

    let per_node: Vec<(MapRow, Vec<MapHole>)> = nodes
        .par_iter()
        .map(|&node| {
            let (theta_deg, phi_deg) = grid.angles_deg(node);
            let mut row = MapRow {
                node,
                theta_deg,
                phi_deg,
                ..Default::default()
            };
            let mut holes = Vec::new();
            let mut have_breakdown = false;
            for (level, solver) in &solvers {
                let outcome = match solver {
                    Ok(s) => s.maximize(ops, node).map_err(|e| e.to_string()),
                    Err(reason) => Err(reason.clone()),
                };
                match outcome {
                    Ok(r) => {
                        row.set(*level, r.gain);
                        if !have_breakdown {
                            row.take_breakdown(&r);
                            have_breakdown = true;
                        }
                    }
                    Err(reason) => holes.push(MapHole {
                        node,
                        level: *level,
                        reason,
                    }),
                }
            }
            (row, holes)
        })
        .collect();

    let mut map = GainMap::default();
    for (row, holes) in per_node {
        map.rows.push(row);
        map.holes.extend(holes);
    }
    map
}

#[derive(Serialize)]
struct CsvRow {
    theta_deg: f64,
    phi_deg: f64,
    #[serde(rename = "G_rems_dBi")]
    g_rems: Option<f64>,
    #[serde(rename = "G_t_dBi")]
    g_t: Option<f64>,
    #[serde(rename = "G_r_dBi")]
    g_r: Option<f64>,
    eta_matching: Option<f64>,
    eta_tuning: Option<f64>,
    eta_radiating: Option<f64>,
    #[serde(rename = "D_dBi")]
    d: Option<f64>,
}

/// CSV with gains and directivity in dBi, efficiencies linear; missing
/// values are empty fields. Rows sorted by (θ, φ).
pub fn write_gain_map(path: impl AsRef<Path>, map: &GainMap) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    let mut rows: Vec<&MapRow> = map.rows.iter().collect();
    rows.sort_by(|a, b| a.theta_deg.total_cmp(&b.theta_deg).then(a.phi_deg.total_cmp(&b.phi_deg)));
    for r in rows {
        w.serialize(CsvRow {
            theta_deg: r.theta_deg,
            phi_deg: r.phi_deg,
            g_rems: r.g_rems.map(to_db),
            g_t: r.g_t.map(to_db),
            g_r: r.g_r.map(to_db),
            eta_matching: r.eta_matching,
            eta_tuning: r.eta_tuning,
            eta_radiating: r.eta_radiating,
            d: r.directivity.map(to_db),
        })
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
