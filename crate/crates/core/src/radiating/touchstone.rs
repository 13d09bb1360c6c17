//! Touchstone v1 (`.sNp`) scattering data, single-frequency use.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::netcalc::{MultiportNetwork, PortSpec, WaveContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum DataFormat {
    #[default]
    Ri,
    Ma,
    Db,
}

/// Network read from a file, evaluated at the sample nearest the context frequency.
#[derive(Debug, Clone)]
pub struct Touchstone {
    pub network: MultiportNetwork,
    /// Frequency of the selected sample (Hz).
    pub frequency: f64,
    pub sample_count: usize,
    pub reference: f64,
}

fn suffix_ports(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    ext.strip_prefix('s')?.strip_suffix('p')?.parse().ok()
}

pub fn load_touchstone(path: impl AsRef<Path>, ctx: &WaveContext) -> Result<Touchstone> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_touchstone(&text, &path.display().to_string(), suffix_ports(path), ctx)
}

struct DataLine {
    line: usize,
    values: Vec<f64>,
}

/// Whether the lines split cleanly into records of `1 + 2n²` numbers, each
/// starting on a fresh line. Returns the offending line otherwise.
fn check_layout(lines: &[DataLine], n: usize) -> std::result::Result<(), usize> {
    let record = 1 + 2 * n * n;
    let mut filled = 0;
    for l in lines {
        filled += l.values.len();
        if filled > record {
            return Err(l.line);
        }
        if filled == record {
            filled = 0;
        }
    }
    match (filled, lines.last()) {
        (0, _) => Ok(()),
        (_, Some(l)) => Err(l.line),
        (_, None) => Ok(()),
    }
}

/// Parses Touchstone v1 text. `expected_ports` normally comes from the file
/// suffix; a layout that contradicts it falls back to inference with a warning.
pub fn parse_touchstone(
    text: &str,
    source: &str,
    expected_ports: Option<usize>,
    ctx: &WaveContext,
) -> Result<Touchstone> {
    let mut unit = 1e9;
    let mut format = DataFormat::Ma;
    let mut reference = 50.0;
    let mut seen_option = false;
    let mut lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(opts) = content.strip_prefix('#') {
            if seen_option {
                continue;
            }
            seen_option = true;
            let mut tokens = opts.split_whitespace();
            while let Some(tok) = tokens.next() {
                match tok.to_ascii_uppercase().as_str() {
                    "HZ" => unit = 1.0,
                    "KHZ" => unit = 1e3,
                    "MHZ" => unit = 1e6,
                    "GHZ" => unit = 1e9,
                    "S" => {}
                    "Y" | "Z" | "H" | "G" => {
                        return Err(Error::parse(source, line, format!("unsupported parameter type {tok}")))
                    }
                    "RI" => format = DataFormat::Ri,
                    "MA" => format = DataFormat::Ma,
                    "DB" => format = DataFormat::Db,
                    "R" => {
                        let v = tokens
                            .next()
                            .and_then(|v| v.parse::<f64>().ok())
                            .filter(|v| *v > 0.0 && v.is_finite());
                        reference = v.ok_or_else(|| Error::parse(source, line, "R must be followed by a positive number"))?;
                    }
                    _ => return Err(Error::parse(source, line, format!("unknown option '{tok}'"))),
                }
            }
            continue;
        }
        let values = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(source, line, format!("expected a number, found '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        lines.push(DataLine { line, values });
    }

    let Some(first) = lines.first() else {
        return Err(Error::parse(source, text.lines().count().max(1), "no data rows"));
    };
    let n = match expected_ports {
        Some(n) if n > 0 && check_layout(&lines, n).is_ok() => n,
        _ => {
            let total: usize = lines.iter().map(|l| l.values.len()).sum();
            let inferred = (1..)
                .take_while(|n| 2 * n * n < total)
                .find(|&n| check_layout(&lines, n).is_ok());
            match (inferred, expected_ports) {
                (Some(n), Some(e)) => {
                    log::warn!("{source}: data layout implies {n} ports, file name says {e}");
                    n
                }
                (Some(n), None) => n,
                (None, Some(e)) if e > 0 => {
                    let bad = check_layout(&lines, e).unwrap_err();
                    return Err(Error::parse(
                        source,
                        bad,
                        format!("malformed {e}-port record (expected {} numbers)", 1 + 2 * e * e),
                    ));
                }
                _ => return Err(Error::parse(source, first.line, "cannot infer the port count")),
            }
        }
    };

    // Frequency samples: (frequency, first line, numbers).
    let record = 1 + 2 * n * n;
    let flat: Vec<(f64, usize)> = lines.iter().flat_map(|l| l.values.iter().map(move |v| (*v, l.line))).collect();
    let samples: Vec<&[(f64, usize)]> = flat.chunks(record).collect();
    let mut prev = f64::NEG_INFINITY;
    for s in &samples {
        if s[0].0 <= prev {
            return Err(Error::parse(source, s[0].1, "frequencies must increase"));
        }
        prev = s[0].0;
    }
    let chosen = samples
        .iter()
        .min_by(|a, b| {
            let da = (a[0].0 * unit - ctx.frequency).abs();
            let db = (b[0].0 * unit - ctx.frequency).abs();
            da.total_cmp(&db)
        })
        .expect("at least one sample");
    let frequency = chosen[0].0 * unit;
    if samples.len() > 1 || (frequency - ctx.frequency).abs() > 1e-9 * ctx.frequency {
        log::info!("{source}: using sample at {frequency:.6e} Hz for {:.6e} Hz", ctx.frequency);
    }

    let mut s = CMatrix::zeros(n, n);
    for k in 0..n * n {
        let (x, y) = (chosen[1 + 2 * k].0, chosen[2 + 2 * k].0);
        let value = match format {
            DataFormat::Ri => Complex64::new(x, y),
            DataFormat::Ma => Complex64::from_polar(x, y.to_radians()),
            DataFormat::Db => Complex64::from_polar(10f64.powf(x / 20.0), y.to_radians()),
        };
        // Two-port files are column-major (S11 S21 S12 S22); larger ones row-major.
        let (i, j) = if n == 2 { (k % 2, k / 2) } else { (k / n, k % n) };
        s[(i, j)] = value;
    }
    let ports = (0..n).map(|k| PortSpec::real(reference, format!("p{}", k + 1))).collect();
    let network = MultiportNetwork::new(s, ports, *ctx)?;
    Ok(Touchstone {
        network,
        frequency,
        sample_count: samples.len(),
        reference,
    })
}

/// Single-frequency Touchstone text; all ports must share one real reference.
pub fn format_touchstone(net: &MultiportNetwork, frequency: f64, format: DataFormat) -> Result<String> {
    let r = net.ports()[0].z_ref;
    if r.im != 0.0 || net.ports().iter().any(|p| p.z_ref != r) {
        return Err(Error::Precondition(
            "Touchstone v1 needs a single real reference impedance".into(),
        ));
    }
    let n = net.port_count();
    let fmt_name = match format {
        DataFormat::Ri => "RI",
        DataFormat::Ma => "MA",
        DataFormat::Db => "DB",
    };
    let pair = |z: Complex64| match format {
        DataFormat::Ri => (z.re, z.im),
        DataFormat::Ma => (z.norm(), z.arg().to_degrees()),
        DataFormat::Db => (20.0 * z.norm().log10(), z.arg().to_degrees()),
    };
    let mut out = format!("! {n}-port scattering data\n# HZ S {fmt_name} R {:e}\n", r.re);
    let order: Vec<(usize, usize)> = if n == 2 {
        vec![(0, 0), (1, 0), (0, 1), (1, 1)]
    } else {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
    };
    let per_line = if n <= 2 { n * n } else { 4.min(n) };
    let row_len = if n <= 2 { n * n } else { n };
    let _ = write!(out, "{frequency:e}");
    for (k, &(i, j)) in order.iter().enumerate() {
        let in_row = k % row_len;
        if k > 0 && in_row % per_line == 0 {
            out.push_str("\n ");
        }
        let (a, b) = pair(net.get(i, j));
        let _ = write!(out, " {a:e} {b:e}");
    }
    out.push('\n');
    Ok(out)
}

pub fn write_touchstone(path: impl AsRef<Path>, net: &MultiportNetwork, frequency: f64) -> Result<()> {
    let path = path.as_ref();
    let text = format_touchstone(net, frequency, DataFormat::Ri)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ZERO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> WaveContext {
        WaveContext::new(12e9, 50.0).unwrap()
    }

    fn random_net(n: usize, seed: u64) -> MultiportNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        MultiportNetwork::with_reference(s, 50.0, ctx()).unwrap()
    }

    #[test]
    fn minimal_one_port_examples() {
        let t = parse_touchstone("# GHz S RI R 50\n12 0 0\n", "a.s1p", Some(1), &ctx()).unwrap();
        assert_eq!(t.network.get(0, 0), ZERO);
        assert_eq!(t.frequency, 12e9);
        let m = parse_touchstone("# GHz S MA R 50\n12 1 180\n", "b.s1p", Some(1), &ctx()).unwrap();
        assert!((m.network.get(0, 0) - c(-1.0)).norm() < 1e-15);
        let d = parse_touchstone("# GHz S DB R 50\n12 -20 0\n", "c.s1p", Some(1), &ctx()).unwrap();
        assert!((d.network.get(0, 0) - c(0.1)).norm() < 1e-15);
    }

    #[test]
    fn nearest_frequency_and_two_port_ordering() {
        let text = "! sweep\n# MHZ S RI R 25\n11000 0 0 1 0 0 0 0 0\n12100 0.1 0 0.2 0 0.3 0 0.4 0\n13000 0 0 0 0 0 0 0 0\n";
        let t = parse_touchstone(text, "x.s2p", Some(2), &ctx()).unwrap();
        assert_eq!(t.frequency, 12.1e9);
        assert_eq!(t.sample_count, 3);
        assert_eq!(t.reference, 25.0);
        assert_eq!(t.network.get(1, 0), c(0.2));
        assert_eq!(t.network.get(0, 1), c(0.3));
    }

    #[test]
    fn round_trips_in_every_format() {
        for n in [1, 2, 3, 5] {
            let net = random_net(n, n as u64);
            for f in [DataFormat::Ri, DataFormat::Ma, DataFormat::Db] {
                let text = format_touchstone(&net, 12e9, f).unwrap();
                let back = parse_touchstone(&text, "rt", Some(n), &ctx()).unwrap();
                assert!((back.network.s() - net.s()).camax() < 1e-12, "n={n} {f:?}");
                let inferred = parse_touchstone(&text, "rt", None, &ctx()).unwrap();
                assert_eq!(inferred.network.port_count(), n);
            }
        }
    }

    #[test]
    fn wrong_suffix_falls_back_to_layout() {
        let text = format_touchstone(&random_net(2, 9), 12e9, DataFormat::Ri).unwrap();
        let t = parse_touchstone(&text, "mislabelled.s1p", Some(1), &ctx()).unwrap();
        assert_eq!(t.network.port_count(), 2);
    }

    #[test]
    fn malformed_inputs_report_lines() {
        let cases = [
            ("# GHz S RI R 50\n12 0 zero\n", 2),
            ("# GHz S XX R 50\n12 0 0\n", 1),
            ("# GHz Z RI R 50\n12 0 0\n", 1),
            ("# GHz S RI R 50\n12 0 0 0 0 0 0 0 0\n13 0 0 0\n", 3),
            ("# GHz S RI R\n12 0 0\n", 1),
            ("# GHz S RI R 50\n13 0 0\n12 0 0\n", 3),
            ("! nothing\n", 1),
        ];
        for (text, line) in cases {
            match parse_touchstone(text, "bad.s2p", Some(2), &ctx()) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn suffix_detection() {
        assert_eq!(suffix_ports(Path::new("a/b.S16P")), Some(16));
        assert_eq!(suffix_ports(Path::new("a/b.txt")), None);
    }
}
