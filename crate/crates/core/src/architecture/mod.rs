//! The switch-based tile: triple-stub matcher, equal splitter and two-switch
//! phase units, plus the benchmark systems it is compared against.

use serde::{Deserialize, Serialize};

use crate::components::{junction, switch_two_port, transmission_line, SwitchModel};
use crate::error::{Error, Result};
use crate::linalg::c;
use crate::netcalc::{renormalize, terminate, Circuit, MultiportNetwork, PortSpec, WaveContext};
use crate::rems::TuningNetwork;

mod bench;
mod config;

pub use bench::{
    benchmark_model, compare, evaluate_recipe, fill_ideal_columns, write_comparison, BenchmarkKind, ComparisonEntry, ComparisonRow, Recipe,
};
pub use config::{SwitchConfig, TileConfig, UnitState};

use config::state;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    /// Characteristic impedance (Ω).
    pub zc: f64,
    /// Length in wavelengths.
    pub length: f64,
}

/// Dimensions and component choices of one tile.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileGeometry {
    pub rows: usize,
    pub cols: usize,
    pub stub_count: usize,
    /// Line between neighbouring taps (λ).
    pub series_length: f64,
    pub stub_length: f64,
    /// Extra line in the 180° branch of a switch unit (λ).
    pub phase_branch_length: f64,
    /// Line between the PA port and the first tap (λ).
    pub lead_length: f64,
    pub feed_line: LineSpec,
    pub branch_line: LineSpec,
    pub stub_zc: f64,
    /// Main-line impedance of the matcher; the feed impedance when unset.
    pub matching_zc: Option<f64>,
    /// PA output resistance; the feed impedance when unset.
    pub pa_impedance: Option<f64>,
    #[serde(skip)]
    pub switch: SwitchModel,
}

impl Default for TileGeometry {
    fn default() -> Self {
        Self::with_shape(4, 4)
    }
}

impl TileGeometry {
    /// Defaults for a `rows × cols` tile; the feed impedance is chosen so the
    /// splitter is matched: `branch_Zc / antennas`.
    pub fn with_shape(rows: usize, cols: usize) -> Self {
        let branch = 50.0;
        Self {
            rows,
            cols,
            stub_count: 3,
            series_length: 1.0 / 8.0,
            stub_length: 1.0 / 10.0,
            phase_branch_length: 0.5,
            lead_length: 0.0,
            feed_line: LineSpec {
                zc: branch / (rows * cols).max(1) as f64,
                length: 0.25,
            },
            branch_line: LineSpec { zc: branch, length: 0.25 },
            stub_zc: 50.0,
            matching_zc: None,
            pa_impedance: None,
            switch: SwitchModel::default(),
        }
    }

    pub fn antennas(&self) -> usize {
        self.rows * self.cols
    }

    pub fn matching_zc(&self) -> f64 {
        self.matching_zc.unwrap_or(self.feed_line.zc)
    }

    pub fn pa_impedance(&self) -> f64 {
        self.pa_impedance.unwrap_or(self.feed_line.zc)
    }

    pub fn bits_per_tile(&self) -> usize {
        2 * self.stub_count + 2 * self.antennas()
    }

    pub fn groups_per_tile(&self) -> usize {
        self.stub_count + self.antennas()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("feed impedance", self.feed_line.zc),
            ("branch impedance", self.branch_line.zc),
            ("stub impedance", self.stub_zc),
            ("matching impedance", self.matching_zc()),
            ("PA impedance", self.pa_impedance()),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Precondition(format!("{name} must be positive, got {v}")));
            }
        }
        let lengths = [
            self.series_length,
            self.stub_length,
            self.phase_branch_length,
            self.lead_length,
            self.feed_line.length,
            self.branch_line.length,
        ];
        if lengths.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Precondition("line lengths must be non-negative".into()));
        }
        if self.antennas() == 0 || self.stub_count == 0 {
            return Err(Error::Precondition("a tile needs antennas and at least one stub".into()));
        }
        Ok(())
    }

    pub fn uniform_config(&self, tiles: usize, unit: UnitState) -> SwitchConfig {
        SwitchConfig::uniform(tiles, self.stub_count, self.antennas(), unit)
    }
}

/// Switchable stub: series switch → stub line → termination switch to ground.
/// One-port seen from the tap.
fn stub_branch(series_on: bool, short: bool, geo: &TileGeometry, ctx: &WaveContext) -> Result<MultiportNetwork> {
    let termination = terminate(&switch_two_port(&geo.switch, state(short), ctx)?, 1, c(-1.0))?;
    let mut ckt = Circuit::new();
    let sw = ckt.add(switch_two_port(&geo.switch, state(series_on), ctx)?);
    let line = ckt.add(transmission_line(geo.stub_zc, geo.stub_length, ctx)?);
    let term = ckt.add(termination);
    ckt.connect((line, 0), (sw, 1)).connect((line, 1), (term, 0)).expose((sw, 0));
    ckt.build()
}

/// Two-port stub tuner; port 0 faces the PA, port 1 the feed line.
pub fn build_matching_network(bits: &[bool], geo: &TileGeometry, ctx: &WaveContext) -> Result<MultiportNetwork> {
    if bits.len() != 2 * geo.stub_count {
        return Err(Error::InvalidConfig(format!(
            "matcher needs {} bits, got {}",
            2 * geo.stub_count,
            bits.len()
        )));
    }
    let zm = geo.matching_zc();
    let mut ckt = Circuit::new();
    let mut taps = Vec::with_capacity(geo.stub_count);
    for k in 0..geo.stub_count {
        let tap = ckt.add(junction(&[zm, zm, geo.stub_zc], ctx)?);
        let stub = ckt.add(stub_branch(bits[2 * k], bits[2 * k + 1], geo, ctx)?);
        ckt.connect((tap, 2), (stub, 0));
        if let Some(&prev) = taps.last() {
            let seg = ckt.add(transmission_line(zm, geo.series_length, ctx)?);
            ckt.connect((prev, 1), (seg, 0)).connect((seg, 1), (tap, 0));
        }
        taps.push(tap);
    }
    let first = taps[0];
    let last = *taps.last().expect("at least one stub");
    if geo.lead_length > 0.0 {
        let lead = ckt.add(transmission_line(zm, geo.lead_length, ctx)?);
        ckt.connect((lead, 1), (first, 0)).expose((lead, 0));
    } else {
        ckt.expose((first, 0));
    }
    ckt.expose((last, 1));
    ckt.build()
}

/// Two-port switch unit; port 0 faces the splitter, port 1 the antenna.
pub fn build_switch_unit(unit: UnitState, geo: &TileGeometry, ctx: &WaveContext) -> Result<MultiportNetwork> {
    let z = geo.branch_line.zc;
    let (top_on, bottom_on) = unit.switches();
    let mut ckt = Circuit::new();
    let split = ckt.add(junction(&[z; 3], ctx)?);
    let merge = ckt.add(junction(&[z; 3], ctx)?);
    let top = ckt.add(switch_two_port(&geo.switch, state(top_on), ctx)?);
    let bottom = ckt.add(switch_two_port(&geo.switch, state(bottom_on), ctx)?);
    let shift = ckt.add(transmission_line(z, geo.phase_branch_length, ctx)?);
    ckt.connect((split, 1), (top, 0))
        .connect((top, 1), (merge, 1))
        .connect((split, 2), (bottom, 0))
        .connect((bottom, 1), (shift, 0))
        .connect((shift, 1), (merge, 2))
        .expose((split, 0))
        .expose((merge, 0));
    ckt.build()
}

/// Matching network followed by the feed line; port 1 ends at the splitter.
pub fn build_front_section(bits: &[bool], geo: &TileGeometry, ctx: &WaveContext) -> Result<MultiportNetwork> {
    let mut ckt = Circuit::new();
    let m = ckt.add(build_matching_network(bits, geo, ctx)?);
    let feed = ckt.add(transmission_line(geo.feed_line.zc, geo.feed_line.length, ctx)?);
    ckt.connect((m, 1), (feed, 0)).expose((m, 0)).expose((feed, 1));
    ckt.build()
}

/// Branch line followed by a switch unit; port 0 at the splitter.
pub fn build_branch(unit: UnitState, geo: &TileGeometry, ctx: &WaveContext) -> Result<MultiportNetwork> {
    let mut ckt = Circuit::new();
    let line = ckt.add(transmission_line(geo.branch_line.zc, geo.branch_line.length, ctx)?);
    let u = ckt.add(build_switch_unit(unit, geo, ctx)?);
    ckt.connect((line, 1), (u, 0)).expose((line, 0)).expose((u, 1));
    ckt.build()
}

/// Joins a front section and one branch per antenna at the splitter node and
/// re-references every port to `ctx.r0`. Port 0 faces the PA.
pub fn assemble_tile(
    front: &MultiportNetwork,
    branches: &[&MultiportNetwork],
    geo: &TileGeometry,
    ctx: &WaveContext,
) -> Result<TuningNetwork> {
    let mut z = vec![geo.feed_line.zc];
    z.extend(std::iter::repeat_n(geo.branch_line.zc, branches.len()));
    let mut ckt = Circuit::new();
    let f = ckt.add(front.clone());
    let node = ckt.add(junction(&z, ctx)?);
    ckt.connect((f, 1), (node, 0)).expose((f, 0));
    let ids: Vec<_> = branches
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let id = ckt.add((*b).clone());
            ckt.connect((node, k + 1), (id, 0));
            id
        })
        .collect();
    for id in ids {
        ckt.expose((id, 1));
    }
    let net = ckt.build()?;
    let ports = (0..net.port_count())
        .map(|k| PortSpec::real(ctx.r0, if k == 0 { "pa".to_string() } else { format!("ant-{k}") }))
        .collect();
    TuningNetwork::new(renormalize(&net, ports)?, 1)
}

/// Full tile tuning network (1 PA port + one port per antenna, all at R0).
pub fn build_tile(config: &TileConfig, geo: &TileGeometry, ctx: &WaveContext) -> Result<TuningNetwork> {
    geo.validate()?;
    config.validate(geo.stub_count, geo.antennas())?;
    let front = build_front_section(&config.matching, geo, ctx)?;
    let branches = config
        .units
        .iter()
        .map(|u| build_branch(*u, geo, ctx))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&MultiportNetwork> = branches.iter().collect();
    assemble_tile(&front, &refs, geo, ctx)
}

/// Tiles in row-major block order; each lists its antennas (row-major
/// indices into the array) in row-major order within the tile.
pub fn tile_partition(rows: usize, cols: usize, tile_rows: usize, tile_cols: usize) -> Result<Vec<Vec<usize>>> {
    if tile_rows == 0 || tile_cols == 0 || !rows.is_multiple_of(tile_rows) || !cols.is_multiple_of(tile_cols) {
        return Err(Error::Precondition(format!(
            "a {rows}×{cols} array cannot be tiled by {tile_rows}×{tile_cols}"
        )));
    }
    let mut tiles = Vec::new();
    for tr in (0..rows).step_by(tile_rows) {
        for tc in (0..cols).step_by(tile_cols) {
            let mut t = Vec::with_capacity(tile_rows * tile_cols);
            for r in tr..tr + tile_rows {
                for c in tc..tc + tile_cols {
                    t.push(r * cols + c);
                }
            }
            tiles.push(t);
        }
    }
    Ok(tiles)
}

/// Block-diagonal array network: PA ports in tile order, then antenna ports
/// in array order as given by `tile_map`.
pub fn build_array_tuning(tiles: &[TuningNetwork], tile_map: &[Vec<usize>]) -> Result<TuningNetwork> {
    if tiles.len() != tile_map.len() || tiles.is_empty() {
        return Err(Error::Precondition(format!(
            "{} tile networks for {} map entries",
            tiles.len(),
            tile_map.len()
        )));
    }
    let m: usize = tile_map.iter().map(Vec::len).sum();
    let mut seen = vec![false; m];
    for (t, ants) in tile_map.iter().enumerate() {
        if ants.len() != tiles[t].antenna_ports() {
            return Err(Error::Precondition(format!(
                "tile {t} has {} antenna ports but maps {} antennas",
                tiles[t].antenna_ports(),
                ants.len()
            )));
        }
        for &a in ants {
            if a >= m || std::mem::replace(&mut seen[a], true) {
                return Err(Error::Precondition(format!("tile map is not a partition (antenna {a})")));
            }
        }
    }
    if tiles.len() == 1 && tile_map[0].iter().enumerate().all(|(k, a)| k == *a) {
        return Ok(tiles[0].clone());
    }
    let nets: Vec<&MultiportNetwork> = tiles.iter().map(TuningNetwork::network).collect();
    let stacked = MultiportNetwork::stack(&nets)?;
    // Stacked port of (tile t, local port k).
    let mut offsets = Vec::with_capacity(tiles.len());
    let mut acc = 0;
    for t in tiles {
        offsets.push(acc);
        acc += t.network().port_count();
    }
    let mut order: Vec<usize> = (0..tiles.len()).map(|t| offsets[t]).collect();
    let mut antenna_port = vec![0; m];
    for (t, ants) in tile_map.iter().enumerate() {
        for (k, &a) in ants.iter().enumerate() {
            antenna_port[a] = offsets[t] + 1 + k;
        }
    }
    order.extend(antenna_port);
    TuningNetwork::new(stacked.permute(&order)?, tiles.len())
}

#[cfg(test)]
mod tests;
