//! Per-port far-field samples as CSV (angles in degrees, fields in V/m-like
//! units; divided by sqrt(Z0) on load to obtain power-wave patterns).

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{AngularGrid, FarFieldPattern};
use crate::error::{Error, Result};
use crate::linalg::ZERO;
use crate::netcalc::WaveContext;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    port: usize,
    theta_deg: f64,
    phi_deg: f64,
    #[serde(rename = "re_Etheta")]
    re_etheta: f64,
    #[serde(rename = "im_Etheta")]
    im_etheta: f64,
    #[serde(rename = "re_Ephi")]
    re_ephi: f64,
    #[serde(rename = "im_Ephi")]
    im_ephi: f64,
}

#[derive(Debug, Clone)]
pub struct LoadedPatterns {
    /// One pattern per port, port 1 first.
    pub patterns: Vec<FarFieldPattern>,
    /// Largest distance (degrees) between a sample and its grid node.
    pub max_snap_deg: f64,
}

pub fn load_patterns(path: impl AsRef<Path>, grid: Arc<AngularGrid>, ctx: &WaveContext) -> Result<LoadedPatterns> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_patterns(file, &path.display().to_string(), grid, ctx)
}

/// Reads pattern rows; ports are numbered from 1 and every port must cover
/// every grid node exactly once after nearest-node snapping.
pub fn parse_patterns(
    reader: impl Read,
    source: &str,
    grid: Arc<AngularGrid>,
    ctx: &WaveContext,
) -> Result<LoadedPatterns> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let inv = 1.0 / ctx.free_space_impedance.sqrt();
    let mut samples: HashMap<(usize, usize), [Complex64; 2]> = HashMap::new();
    let mut ports = 0;
    let mut max_snap: f64 = 0.0;
    let mut last_line = 1;

    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(last_line + 1, |p| p.line() as usize);
            Error::parse(source, line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(last_line + 1, |p| p.line() as usize);
        last_line = line;
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(source, line, e.to_string()))?;
        if row.port == 0 {
            return Err(Error::parse(source, line, "ports are numbered from 1"));
        }
        let (node, snap) = grid
            .nearest(row.theta_deg, row.phi_deg)
            .map_err(|e| Error::parse(source, line, e.to_string()))?;
        max_snap = max_snap.max(snap);
        let value = [
            Complex64::new(row.re_etheta, row.im_etheta) * inv,
            Complex64::new(row.re_ephi, row.im_ephi) * inv,
        ];
        if samples.insert((row.port, node), value).is_some() {
            let (t, p) = grid.angles_deg(node);
            return Err(Error::parse(
                source,
                line,
                format!("duplicate sample for port {} at θ={t}°, φ={p}°", row.port),
            ));
        }
        ports = ports.max(row.port);
    }
    if samples.is_empty() {
        return Err(Error::parse(source, 1, "no rows"));
    }

    let mut missing = Vec::new();
    let mut missing_count = 0;
    let mut patterns = Vec::with_capacity(ports);
    for port in 1..=ports {
        let mut values = vec![[ZERO; 2]; grid.len()];
        for (node, v) in values.iter_mut().enumerate() {
            match samples.get(&(port, node)) {
                Some(s) => *v = *s,
                None => {
                    missing_count += 1;
                    if missing.len() < 10 {
                        let (t, p) = grid.angles_deg(node);
                        missing.push(format!("port {port} θ={t}° φ={p}°"));
                    }
                }
            }
        }
        patterns.push(values);
    }
    if missing_count > 0 {
        return Err(Error::parse(
            source,
            last_line,
            format!("{missing_count} grid samples missing, first: {}", missing.join("; ")),
        ));
    }
    if max_snap > 1e-6 {
        log::info!("{source}: snapped samples to the grid, max deviation {max_snap:.3}°");
    }
    let patterns = patterns
        .into_iter()
        .map(|v| FarFieldPattern::new(grid.clone(), v))
        .collect::<Result<_>>()?;
    Ok(LoadedPatterns {
        patterns,
        max_snap_deg: max_snap,
    })
}

/// Writes patterns in the same format `load_patterns` reads.
pub fn write_patterns(path: impl AsRef<Path>, patterns: &[FarFieldPattern], ctx: &WaveContext) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let z = ctx.free_space_impedance.sqrt();
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    for (m, p) in patterns.iter().enumerate() {
        for (node, [et, ep]) in p.values().iter().enumerate() {
            let (theta_deg, phi_deg) = p.grid().angles_deg(node);
            w.serialize(Row {
                port: m + 1,
                theta_deg,
                phi_deg,
                re_etheta: et.re * z,
                im_etheta: et.im * z,
                re_ephi: ep.re * z,
                im_ephi: ep.im * z,
            })
            .map_err(to_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
