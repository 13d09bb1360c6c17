use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use anyhow::Result;

use rems::linalg::hermitian_eigenvalues;
use rems::netcalc::{classify, WaveContext};
use rems::radiating::{gram_of, load_patterns, load_touchstone, AngularGrid};

use crate::config::RunConfig;
use crate::run::{setup, InputError};

/// Human-readable description of a Touchstone file, a pattern CSV or a run
/// config, chosen by extension.
pub fn inspect(path: &Path, grid_deg: f64, frequency_hz: f64) -> Result<String> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let ctx = WaveContext::new(frequency_hz, 50.0)?;
    let mut out = String::new();
    if ext.starts_with('s') && ext.ends_with('p') {
        let ts = load_touchstone(path, &ctx)?;
        let net = &ts.network;
        let c = classify(net);
        writeln!(out, "touchstone {}", path.display())?;
        writeln!(out, "  ports            {}", net.port_count())?;
        writeln!(out, "  samples          {}", ts.sample_count)?;
        writeln!(out, "  selected         {:.6} GHz", ts.frequency / 1e9)?;
        writeln!(out, "  reference        {} Ω", ts.reference)?;
        writeln!(out, "  passive          {} (excess {:.3e})", c.passive, c.passivity_excess)?;
        writeln!(out, "  lossless         {} (deviation {:.3e})", c.lossless, c.lossless_deviation)?;
        writeln!(out, "  reciprocal       {} (deviation {:.3e})", c.reciprocal, c.reciprocity_deviation)?;
        let diag: Vec<f64> = (0..net.port_count()).map(|k| net.get(k, k).norm()).collect();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0f64), |(l, h), &v| (l.min(v), h.max(v)));
        writeln!(out, "  |S_kk|           {lo:.4} .. {hi:.4}")?;
    } else if ext == "csv" {
        let grid = Arc::new(AngularGrid::new(grid_deg)?);
        let loaded = load_patterns(path, grid, &ctx)?;
        let gram = gram_of(&loaded.patterns)?;
        let eig = hermitian_eigenvalues(&gram);
        writeln!(out, "patterns {}", path.display())?;
        writeln!(out, "  ports            {}", loaded.patterns.len())?;
        writeln!(out, "  grid             {grid_deg}°")?;
        writeln!(out, "  max snap         {:.4}°", loaded.max_snap_deg)?;
        for (k, p) in loaded.patterns.iter().enumerate() {
            writeln!(out, "  port {:<3} power   {:.6}", k + 1, p.norm_sqr())?;
        }
        writeln!(
            out,
            "  gram eigenvalues {:.4e} .. {:.4e}",
            eig.first().copied().unwrap_or(0.0),
            eig.last().copied().unwrap_or(0.0)
        )?;
    } else if ext == "json" {
        let cfg = RunConfig::load(path)?;
        let s = setup(&cfg)?;
        let geo = &s.geometry;
        let (rows, cols) = cfg.radiating.shape();
        let nodes = s.radiating.grid().subset(cfg.map.step_deg, cfg.map.max_theta_deg)?;
        let groups = geo.groups_per_tile() * s.tile_map.len();
        writeln!(out, "config {}", path.display())?;
        writeln!(out, "  array            {rows}×{cols}")?;
        writeln!(out, "  tiles            {} of {}×{}", s.tile_map.len(), geo.rows, geo.cols)?;
        writeln!(out, "  switches/tile    {}", geo.bits_per_tile())?;
        writeln!(out, "  search space     4^{groups} = {:.3e}", 4f64.powi(groups as i32))?;
        writeln!(out, "  PA impedance     {:.4} Ω", geo.pa_impedance())?;
        writeln!(out, "  map directions   {}", nodes.len())?;
        let names: Vec<&str> = cfg.benchmarks.iter().map(|k| k.name()).collect();
        writeln!(out, "  benchmarks       {}", names.join(", "))?;
    } else {
        return Err(InputError(format!(
            "{}: cannot tell the file type (expected .sNp, .csv or .json)",
            path.display()
        ))
        .into());
    }
    Ok(out)
}
