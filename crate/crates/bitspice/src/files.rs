//! On-disk formats: complex vectors, scene tables, and estimator spectra.
//!
//! Complex vectors (measurements, thresholds, signed data) are stored either
//! as CSV with one `re,im` pair per line, or as flat binary of interleaved
//! re/im doubles in little-endian byte order; the file extension picks the
//! format (`.csv` for text, anything else binary). Floats in the text
//! formats use shortest round-trip notation, so a write/read cycle is exact.

use std::path::Path;

use crate::onebit::OneBitEstimate;
use crate::waveforms::{Scene, Target};
use crate::{C64, Error, Result};

fn is_csv(path: &Path) -> bool {
    path.extension().map_or(false, |e| e.eq_ignore_ascii_case("csv"))
}

fn bad_file(path: &Path, line: usize, what: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("{} line {line}: {what}", path.display()))
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|e| bad_file(path, line, format!("bad number '{field}': {e}")))
}

/// Write a complex vector; format picked by extension (see module docs).
pub fn write_complex(path: &Path, values: &[C64]) -> Result<()> {
    if is_csv(path) {
        let mut out = String::with_capacity(values.len() * 16);
        for v in values {
            out.push_str(&format!("{},{}\n", v.re, v.im));
        }
        std::fs::write(path, out)?;
    } else {
        let mut out = Vec::with_capacity(values.len() * 16);
        for v in values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        std::fs::write(path, out)?;
    }
    Ok(())
}

/// Read a complex vector written by [`write_complex`].
pub fn read_complex(path: &Path) -> Result<Vec<C64>> {
    if is_csv(path) {
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (re, im) = match (fields.next(), fields.next(), fields.next()) {
                (Some(re), Some(im), None) => (re, im),
                _ => return Err(bad_file(path, i + 1, "expected exactly 're,im'")),
            };
            values.push(C64::new(parse_f64(path, i + 1, re)?, parse_f64(path, i + 1, im)?));
        }
        Ok(values)
    } else {
        let bytes = std::fs::read(path)?;
        if bytes.len() % 16 != 0 {
            return Err(Error::InvalidArgument(format!(
                "{}: {} bytes is not a whole number of complex doubles",
                path.display(),
                bytes.len()
            )));
        }
        Ok(bytes
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect())
    }
}

const SCENE_HEADER: &str = "range_coord,doppler,amp_re,amp_im,on_grid";

/// Write a scene as a readable table, one target per line.
pub fn write_scene(path: &Path, scene: &Scene) -> Result<()> {
    let mut out = String::from(SCENE_HEADER);
    out.push('\n');
    for t in &scene.targets {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            t.range_coord, t.doppler, t.amp.re, t.amp.im, t.on_grid
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a scene table written by [`write_scene`].
pub fn read_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == SCENE_HEADER => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{}: missing scene header '{SCENE_HEADER}'",
                path.display()
            )))
        }
    }
    let mut targets = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad_file(path, i + 1, format!("expected 5 fields, got {}", fields.len())));
        }
        let on_grid = match fields[4].trim() {
            "true" => true,
            "false" => false,
            other => return Err(bad_file(path, i + 1, format!("bad on_grid flag '{other}'"))),
        };
        targets.push(Target {
            range_coord: parse_f64(path, i + 1, fields[0])?,
            doppler: parse_f64(path, i + 1, fields[1])?,
            amp: C64::new(parse_f64(path, i + 1, fields[2])?, parse_f64(path, i + 1, fields[3])?),
            on_grid,
        });
    }
    Ok(Scene::new(targets))
}

/// Identification block of a serialized estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateHeader {
    pub variant: String,
    pub n_samples: usize,
    pub n_atoms: usize,
    pub epsilon: f64,
    pub iterations: usize,
    pub eta: f64,
}

/// Write an estimate: `# key=value` header lines, then one row per grid
/// atom with the scaled amplitude and power.
pub fn write_estimate_csv(
    path: &Path,
    header: &EstimateHeader,
    est: &OneBitEstimate,
) -> Result<()> {
    if est.beta.len() != header.n_atoms || est.powers.len() != header.n_atoms {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} amplitudes and {} powers for {} atoms",
            est.beta.len(),
            est.powers.len(),
            header.n_atoms
        )));
    }
    let mut out = String::with_capacity(est.beta.len() * 32);
    out.push_str(&format!("# variant={}\n", header.variant));
    out.push_str(&format!("# n_samples={}\n", header.n_samples));
    out.push_str(&format!("# n_atoms={}\n", header.n_atoms));
    out.push_str(&format!("# epsilon={}\n", header.epsilon));
    out.push_str(&format!("# iterations={}\n", header.iterations));
    out.push_str(&format!("# eta={}\n", header.eta));
    out.push_str("k,beta_re,beta_im,power\n");
    for (k, (b, p)) in est.beta.iter().zip(&est.powers).enumerate() {
        out.push_str(&format!("{k},{},{},{}\n", b.re, b.im, p));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read back an estimate file: header, scaled amplitudes, powers.
pub fn read_estimate_csv(path: &Path) -> Result<(EstimateHeader, Vec<C64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut header = EstimateHeader {
        variant: String::new(),
        n_samples: 0,
        n_atoms: 0,
        epsilon: 0.0,
        iterations: 0,
        eta: 0.0,
    };
    let mut beta = Vec::new();
    let mut powers = Vec::new();
    let mut saw_columns = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| bad_file(path, n, "header line without '='"))?;
            match key {
                "variant" => header.variant = value.to_string(),
                "n_samples" => header.n_samples = parse_f64(path, n, value)? as usize,
                "n_atoms" => header.n_atoms = parse_f64(path, n, value)? as usize,
                "epsilon" => header.epsilon = parse_f64(path, n, value)?,
                "iterations" => header.iterations = parse_f64(path, n, value)? as usize,
                "eta" => header.eta = parse_f64(path, n, value)?,
                other => return Err(bad_file(path, n, format!("unknown header key '{other}'"))),
            }
            continue;
        }
        if !saw_columns {
            if line.trim() != "k,beta_re,beta_im,power" {
                return Err(bad_file(path, n, "expected column header 'k,beta_re,beta_im,power'"));
            }
            saw_columns = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad_file(path, n, format!("expected 4 fields, got {}", fields.len())));
        }
        let k = parse_f64(path, n, fields[0])? as usize;
        if k != beta.len() {
            return Err(bad_file(path, n, format!("row index {k} out of order")));
        }
        beta.push(C64::new(parse_f64(path, n, fields[1])?, parse_f64(path, n, fields[2])?));
        powers.push(parse_f64(path, n, fields[3])?);
    }
    if beta.len() != header.n_atoms {
        return Err(Error::InvalidArgument(format!(
            "{}: {} rows for n_atoms={}",
            path.display(),
            beta.len(),
            header.n_atoms
        )));
    }
    Ok((header, beta, powers))
}

/// Write the per-iteration trace: power change and, when tracked, the
/// objective after that iteration. One row per iteration.
pub fn write_trace_csv(path: &Path, est: &OneBitEstimate) -> Result<()> {
    let mut out = String::from("iteration,rel_change,objective\n");
    for (i, &change) in est.rel_change.iter().enumerate() {
        // objective[0] is the initial state, so iteration i sits at i+1
        let obj = est
            .objective
            .get(i + 1)
            .map(|v| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", i + 1, change, obj));
    }
    std::fs::write(path, out)?;
    Ok(())
}
