use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use rems::architecture::{BenchmarkKind, TileGeometry};
use rems::components::SwitchParams;
use rems::optimize::{AscentOptions, DEFAULT_CAP};
use rems::radiating::ArraySpec;
use rems::rems::GainLevel;

/// One JSON document describing a run. Relative paths inside it are
/// resolved against the directory holding the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_reference")]
    pub reference_ohm: f64,
    /// Quadrature grid spacing (degrees).
    #[serde(default = "default_grid")]
    pub grid_deg: f64,
    #[serde(default)]
    pub radiating: RadiatingSource,
    #[serde(default)]
    pub geometry: TileGeometry,
    #[serde(default)]
    pub switch: SwitchSource,
    #[serde(default = "default_benchmarks")]
    pub benchmarks: Vec<BenchmarkKind>,
    #[serde(default)]
    pub map: MapSpec,
    /// How the proposed systems are configured in `gain-map`.
    #[serde(default)]
    pub proposed: ProposedSpec,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default)]
    pub objective: Option<ObjectiveSpec>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_frequency() -> f64 {
    12e9
}

fn default_reference() -> f64 {
    50.0
}

fn default_grid() -> f64 {
    1.0
}

fn default_benchmarks() -> Vec<BenchmarkKind> {
    BenchmarkKind::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiatingSource {
    Synthetic(ArraySpec),
    /// Characterized array: coupling matrix plus embedded element patterns.
    Files {
        touchstone: PathBuf,
        patterns: PathBuf,
        rows: usize,
        cols: usize,
    },
}

impl Default for RadiatingSource {
    fn default() -> Self {
        RadiatingSource::Synthetic(ArraySpec::default())
    }
}

impl RadiatingSource {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            RadiatingSource::Synthetic(s) => (s.rows, s.cols),
            RadiatingSource::Files { rows, cols, .. } => (*rows, *cols),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SwitchSource {
    Ideal,
    Parametric(SwitchParams),
    Measured { on: PathBuf, off: PathBuf },
}

impl Default for SwitchSource {
    fn default() -> Self {
        SwitchSource::Parametric(SwitchParams::default())
    }
}

/// Directions that go into maps and comparisons.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSpec {
    pub step_deg: f64,
    pub max_theta_deg: f64,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            step_deg: 5.0,
            max_theta_deg: 90.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProposedSpec {
    /// Re-optimize the switches for every map direction.
    #[default]
    PerDirection,
    /// One fixed configuration for all directions.
    Hex(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ascent,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    All,
    UnitsOnly,
    MatchingOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpec {
    pub method: Method,
    pub restarts: usize,
    pub max_passes: usize,
    /// Exhaustive search only.
    pub space: SpaceKind,
    pub cap: u64,
    /// Follow `optimize` with a gain map of the winning configuration.
    pub then_gain_map: bool,
}

impl Default for SearchSpec {
    fn default() -> Self {
        let a = AscentOptions::default();
        Self {
            method: Method::Ascent,
            restarts: a.restarts,
            max_passes: a.max_passes,
            space: SpaceKind::All,
            cap: DEFAULT_CAP,
            then_gain_map: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Direction {
        theta_deg: f64,
        phi_deg: f64,
        #[serde(default = "default_level")]
        level: GainLevel,
    },
    /// Median gain over a sub-grid of directions.
    Median {
        step_deg: f64,
        #[serde(default = "default_max_theta")]
        max_theta_deg: f64,
        #[serde(default = "default_level")]
        level: GainLevel,
    },
}

fn default_level() -> GainLevel {
    GainLevel::Rems
}

fn default_max_theta() -> f64 {
    90.0
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| rems::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let RadiatingSource::Files {
            touchstone, patterns, ..
        } = &mut self.radiating
        {
            fix(touchstone);
            fix(patterns);
        }
        if let SwitchSource::Measured { on, off } = &mut self.switch {
            fix(on);
            fix(off);
        }
    }

    pub fn ascent_options(&self) -> AscentOptions {
        AscentOptions {
            restarts: self.search.restarts,
            max_passes: self.search.max_passes,
            seed: self.seed,
            init: None,
        }
    }
}
