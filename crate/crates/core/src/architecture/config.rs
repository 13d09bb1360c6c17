//! Discrete switch states of tiles: symbolic form, JSON and packed hex.

use serde::{Deserialize, Serialize};

use crate::components::SwitchState;
use crate::error::{Error, Result};

/// Two-switch unit ahead of each antenna.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnitState {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "PASS_180")]
    Pass180,
    #[serde(rename = "OPEN_REFLECT")]
    OpenReflect,
    #[serde(rename = "SHORT_REFLECT")]
    ShortReflect,
}

impl UnitState {
    /// (top switch, bottom switch) closed?
    pub fn switches(self) -> (bool, bool) {
        match self {
            UnitState::Pass => (true, false),
            UnitState::Pass180 => (false, true),
            UnitState::OpenReflect => (false, false),
            UnitState::ShortReflect => (true, true),
        }
    }

    pub fn from_switches(top: bool, bottom: bool) -> Self {
        match (top, bottom) {
            (true, false) => UnitState::Pass,
            (false, true) => UnitState::Pass180,
            (false, false) => UnitState::OpenReflect,
            (true, true) => UnitState::ShortReflect,
        }
    }

    /// Group value `top + 2·bottom`, matching the packed bit order.
    pub fn index(self) -> usize {
        let (t, b) = self.switches();
        t as usize + 2 * b as usize
    }

    pub fn from_index(v: usize) -> Self {
        Self::from_switches(v & 1 == 1, v & 2 == 2)
    }
}

pub(crate) fn state(on: bool) -> SwitchState {
    if on {
        SwitchState::On
    } else {
        SwitchState::Off
    }
}

/// Switch states of one tile. `matching` holds two bits per stub:
/// (series switch closed, termination shorted).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileConfig {
    pub matching: Vec<bool>,
    pub units: Vec<UnitState>,
}

impl TileConfig {
    pub fn uniform(stubs: usize, antennas: usize, unit: UnitState) -> Self {
        Self {
            matching: vec![false; 2 * stubs],
            units: vec![unit; antennas],
        }
    }

    pub fn stub_count(&self) -> usize {
        self.matching.len() / 2
    }

    pub fn group_count(&self) -> usize {
        self.stub_count() + self.units.len()
    }

    /// Stubs come first (value `series + 2·short`), then units.
    pub fn group(&self, g: usize) -> usize {
        let s = self.stub_count();
        if g < s {
            self.matching[2 * g] as usize + 2 * self.matching[2 * g + 1] as usize
        } else {
            self.units[g - s].index()
        }
    }

    pub fn set_group(&mut self, g: usize, v: usize) {
        debug_assert!(v < 4);
        let s = self.stub_count();
        if g < s {
            self.matching[2 * g] = v & 1 == 1;
            self.matching[2 * g + 1] = v & 2 == 2;
        } else {
            self.units[g - s] = UnitState::from_index(v);
        }
    }

    pub fn bit_count(&self) -> usize {
        self.matching.len() + 2 * self.units.len()
    }

    /// Bits low to high: stub pairs, then (top, bottom) per unit.
    pub fn bits(&self) -> Vec<bool> {
        let mut bits = self.matching.clone();
        for u in &self.units {
            let (t, b) = u.switches();
            bits.push(t);
            bits.push(b);
        }
        bits
    }

    pub fn from_bits(bits: &[bool], stubs: usize) -> Result<Self> {
        if bits.len() < 2 * stubs || !(bits.len() - 2 * stubs).is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "{} bits cannot hold {stubs} stubs plus whole units",
                bits.len()
            )));
        }
        let units = bits[2 * stubs..]
            .chunks(2)
            .map(|p| UnitState::from_switches(p[0], p[1]))
            .collect();
        Ok(Self {
            matching: bits[..2 * stubs].to_vec(),
            units,
        })
    }

    pub fn validate(&self, stubs: usize, antennas: usize) -> Result<()> {
        if self.matching.len() != 2 * stubs || self.units.len() != antennas {
            return Err(Error::InvalidConfig(format!(
                "tile has {} matching bits and {} units, expected {} and {antennas}",
                self.matching.len(),
                self.units.len(),
                2 * stubs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    pub tiles: Vec<TileConfig>,
}

impl SwitchConfig {
    pub fn uniform(tiles: usize, stubs: usize, antennas: usize, unit: UnitState) -> Self {
        Self {
            tiles: vec![TileConfig::uniform(stubs, antennas, unit); tiles],
        }
    }

    pub fn groups_per_tile(&self) -> usize {
        self.tiles.first().map_or(0, TileConfig::group_count)
    }

    pub fn group_count(&self) -> usize {
        self.tiles.iter().map(TileConfig::group_count).sum()
    }

    /// Global group index: tile-major.
    pub fn group(&self, g: usize) -> usize {
        let (t, k) = self.locate(g);
        self.tiles[t].group(k)
    }

    pub fn set_group(&mut self, g: usize, v: usize) {
        let (t, k) = self.locate(g);
        self.tiles[t].set_group(k, v);
    }

    fn locate(&self, mut g: usize) -> (usize, usize) {
        for (t, tile) in self.tiles.iter().enumerate() {
            if g < tile.group_count() {
                return (t, g);
            }
            g -= tile.group_count();
        }
        panic!("group index out of range");
    }

    /// Fixed-width lowercase hex per tile (bit 0 = least significant), tiles
    /// separated by commas.
    pub fn to_hex(&self) -> String {
        self.tiles
            .iter()
            .map(|t| {
                let bits = t.bits();
                let digits = bits.len().div_ceil(4);
                (0..digits)
                    .rev()
                    .map(|d| {
                        let nibble = (0..4)
                            .filter(|b| bits.get(4 * d + b).copied().unwrap_or(false))
                            .fold(0u32, |acc, b| acc | 1 << b);
                        char::from_digit(nibble, 16).expect("nibble")
                    })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_hex(text: &str, stubs: usize, antennas: usize) -> Result<Self> {
        let n_bits = 2 * stubs + 2 * antennas;
        let digits = n_bits.div_ceil(4);
        let tiles = text
            .trim()
            .split(',')
            .map(|part| {
                let part = part.trim();
                if part.len() != digits {
                    return Err(Error::InvalidConfig(format!(
                        "tile word '{part}' has {} hex digits, expected {digits}",
                        part.len()
                    )));
                }
                let mut bits = vec![false; 4 * digits];
                for (i, ch) in part.chars().rev().enumerate() {
                    let v = ch
                        .to_digit(16)
                        .ok_or_else(|| Error::InvalidConfig(format!("'{ch}' is not a hex digit")))?;
                    for b in 0..4 {
                        bits[4 * i + b] = v >> b & 1 == 1;
                    }
                }
                if bits[n_bits..].iter().any(|b| *b) {
                    return Err(Error::InvalidConfig(format!("tile word '{part}' sets bits above {n_bits}")));
                }
                TileConfig::from_bits(&bits[..n_bits], stubs)
            })
            .collect::<Result<_>>()?;
        Ok(Self { tiles })
    }
}
