//! The flat binary stack format and its covariate sidecar.
//!
//! Layout (little-endian):
//!   bytes 0..4    magic "COPE"
//!   bytes 4..8    format version (u32, currently 1)
//!   bytes 8..12   nx (u32)
//!   bytes 12..16  ny (u32)
//!   bytes 16..20  n_layers (u32)
//!   byte  20      value type (1 = f64)
//!   byte  21      row-major flag (1 = row-major)
//!   bytes 22..24  reserved (zero)
//!   bytes 24..    payload: n_layers contiguous row-major f64 grids
//!
//! The sidecar is a CSV with header `layer_index,period,time`, one row per
//! layer, periods tagged `a` or `b`.

use crate::design::{two_period_design_from_rows, Period, TwoPeriodDesign};
use crate::error::{CliError, Result};
use cope_core::glm::FieldStack;
use cope_core::grid::GridGeometry;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"COPE";
pub const VERSION: u32 = 1;
pub const VALUE_TYPE_F64: u8 = 1;
const HEADER_LEN: usize = 24;

pub fn write_stack(path: &Path, stack: &FieldStack) -> Result<()> {
    let geom = stack.geometry();
    let mut bytes = Vec::with_capacity(HEADER_LEN + stack.n_layers() * geom.len() * 8);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(geom.nx() as u32).to_le_bytes());
    bytes.extend_from_slice(&(geom.ny() as u32).to_le_bytes());
    bytes.extend_from_slice(&(stack.n_layers() as u32).to_le_bytes());
    bytes.push(VALUE_TYPE_F64);
    bytes.push(1); // row-major
    bytes.extend_from_slice(&[0, 0]);
    for j in 0..stack.n_layers() {
        for v in stack.layer(j) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    f.write_all(&bytes)
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_stack(path: &Path) -> Result<FieldStack> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    let err = |msg: String| CliError::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < HEADER_LEN {
        return Err(err(format!(
            "file too short for a stack header ({} bytes)",
            bytes.len()
        )));
    }
    if bytes[0..4] != MAGIC {
        return Err(err("bad magic; not a COPE stack file".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(err(format!("unsupported format version {version}")));
    }
    let nx = u32_at(8) as usize;
    let ny = u32_at(12) as usize;
    let n_layers = u32_at(16) as usize;
    if bytes[20] != VALUE_TYPE_F64 {
        return Err(err(format!("unsupported value type {}", bytes[20])));
    }
    if bytes[21] != 1 {
        return Err(err("only row-major payloads are supported".into()));
    }
    let expected = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(n_layers))
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| err("header dimensions overflow".into()))?;
    if bytes.len() - HEADER_LEN != expected {
        return Err(err(format!(
            "payload is {} bytes, header promises {nx} x {ny} x {n_layers} x 8 = {expected}",
            bytes.len() - HEADER_LEN
        )));
    }
    let geom = GridGeometry::unit(nx, ny).map_err(CliError::Core)?;
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FieldStack::from_values(geom, n_layers, values).map_err(CliError::Core)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariateRow {
    pub layer: usize,
    pub period: Period,
    pub time: f64,
}

pub fn write_covariates(path: &Path, rows: &[CovariateRow]) -> Result<()> {
    let mut out = String::from("layer_index,period,time\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.layer, r.period.label(), r.time));
    }
    fs::write(path, out).map_err(|e| CliError::io(path.display().to_string(), e))
}

pub fn read_covariates(path: &Path) -> Result<Vec<CovariateRow>> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let err = |line: usize, msg: String| {
        CliError::Format(format!("{} line {}: {msg}", path.display(), line + 1))
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 {
            let header: Vec<&str> = line.split(',').map(str::trim).collect();
            if header != ["layer_index", "period", "time"] {
                return Err(err(
                    i,
                    "expected header 'layer_index,period,time'".to_string(),
                ));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(i, format!("expected 3 fields, got {}", fields.len())));
        }
        rows.push(CovariateRow {
            layer: fields[0]
                .parse()
                .map_err(|_| err(i, format!("bad layer index '{}'", fields[0])))?,
            period: Period::parse(fields[1])?,
            time: fields[2]
                .parse()
                .map_err(|_| err(i, format!("bad time value '{}'", fields[2])))?,
        });
    }
    Ok(rows)
}

/// Validates that the sidecar covers each layer exactly once and assembles
/// the design with rows in layer order.
pub fn design_from_covariates(rows: &[CovariateRow], n_layers: usize) -> Result<TwoPeriodDesign> {
    if rows.len() != n_layers {
        return Err(CliError::Format(format!(
            "covariate sidecar has {} rows but the stack has {n_layers} layers",
            rows.len()
        )));
    }
    let mut by_layer: Vec<Option<(Period, f64)>> = vec![None; n_layers];
    for r in rows {
        if r.layer >= n_layers {
            return Err(CliError::Format(format!(
                "covariate row for layer {} but the stack has only {n_layers} layers",
                r.layer
            )));
        }
        if by_layer[r.layer].replace((r.period, r.time)).is_some() {
            return Err(CliError::Format(format!(
                "layer {} appears more than once in the covariate sidecar",
                r.layer
            )));
        }
    }
    let ordered: Vec<(Period, f64)> = by_layer.into_iter().map(Option::unwrap).collect();
    two_period_design_from_rows(&ordered)
}

/// Reads one grid from a CSV file: ny lines of nx comma-separated values.
pub fn read_csv_grid(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let mut nx = 0usize;
    let mut values = Vec::new();
    let mut ny = 0usize;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    CliError::Format(format!(
                        "{} line {}: bad value '{}'",
                        path.display(),
                        i + 1,
                        f.trim()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if nx == 0 {
            nx = row.len();
        } else if row.len() != nx {
            return Err(CliError::Format(format!(
                "{} line {}: expected {nx} values, got {}",
                path.display(),
                i + 1,
                row.len()
            )));
        }
        values.extend(row);
        ny += 1;
    }
    if nx < 2 || ny < 2 {
        return Err(CliError::Format(format!(
            "{}: grid must be at least 2x2, got {nx}x{ny}",
            path.display()
        )));
    }
    Ok((nx, ny, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("cope-stackfile-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn round_trip_is_bitwise() {
        let geom = GridGeometry::unit(5, 4).unwrap();
        let values: Vec<f64> = (0..60).map(|i| (i as f64).sin() * 1e3).collect();
        let stack = FieldStack::from_values(geom, 3, values).unwrap();
        let path = tmp("roundtrip.cope");
        write_stack(&path, &stack).unwrap();
        let back = read_stack(&path).unwrap();
        assert_eq!(back.n_layers(), 3);
        assert_eq!(back.geometry().nx(), 5);
        for j in 0..3 {
            for (a, b) in stack.layer(j).iter().zip(back.layer(j)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn corrupt_files_are_rejected_with_context() {
        let path = tmp("bad.cope");
        std::fs::write(&path, b"NOPE").unwrap();
        let err = read_stack(&path).unwrap_err().to_string();
        assert!(err.contains("too short"), "{err}");
        std::fs::write(&path, [b"XXXX".as_ref(), &[0u8; 24]].concat()).unwrap();
        let err = read_stack(&path).unwrap_err().to_string();
        assert!(err.contains("bad magic"), "{err}");
        // truncated payload
        let geom = GridGeometry::unit(4, 4).unwrap();
        let stack = FieldStack::from_values(geom, 2, vec![0.0; 32]).unwrap();
        write_stack(&path, &stack).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, bytes).unwrap();
        let err = read_stack(&path).unwrap_err().to_string();
        assert!(err.contains("header promises"), "{err}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn covariates_round_trip_and_validate() {
        let rows = vec![
            CovariateRow { layer: 0, period: Period::A, time: -1.0 },
            CovariateRow { layer: 1, period: Period::A, time: 1.0 },
            CovariateRow { layer: 2, period: Period::B, time: -0.5 },
            CovariateRow { layer: 3, period: Period::B, time: 0.5 },
        ];
        let path = tmp("covs.csv");
        write_covariates(&path, &rows).unwrap();
        let back = read_covariates(&path).unwrap();
        assert_eq!(back, rows);
        let design = design_from_covariates(&back, 4).unwrap();
        assert_eq!(design.n(), 4);
        // missing layer
        assert!(design_from_covariates(&back[..3], 4).is_err());
        // duplicate layer
        let mut dup = rows.clone();
        dup[3].layer = 0;
        assert!(design_from_covariates(&dup, 4).is_err());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_grid_parsing() {
        let path = tmp("grid.csv");
        std::fs::write(&path, "1, 2, 3\n4, 5, 6\n").unwrap();
        let (nx, ny, values) = read_csv_grid(&path).unwrap();
        assert_eq!((nx, ny), (3, 2));
        assert_eq!(values, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        std::fs::write(&path, "1, 2\n3\n").unwrap();
        assert!(read_csv_grid(&path).is_err());
        std::fs::remove_file(&path).ok();
    }
}
