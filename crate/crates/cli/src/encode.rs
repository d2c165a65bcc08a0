//! Byte encoders for the data files the runner writes.

use std::fmt::Write as _;

use crate::error::{CliError, Result};

/// Binary greyscale PGM (P5). Samples are one byte when `max_value` ≤ 255,
/// otherwise two bytes big-endian.
pub fn encode_pgm(values: &[u32], width: usize, height: usize, max_value: u32) -> Result<Vec<u8>> {
    if max_value == 0 || max_value > 65535 {
        return Err(CliError::Encode(format!("PGM maxval {max_value} outside 1..=65535")));
    }
    if values.len() != width * height {
        return Err(CliError::Encode(format!(
            "PGM raster has {} samples, expected {width}x{height}",
            values.len()
        )));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v > max_value) {
        return Err(CliError::Encode(format!("PGM sample {i} = {v} exceeds maxval {max_value}")));
    }
    let header = format!("P5\n{width} {height}\n{max_value}\n");
    let wide = max_value > 255;
    let mut out = Vec::with_capacity(header.len() + values.len() * if wide { 2 } else { 1 });
    out.extend_from_slice(header.as_bytes());
    for &v in values {
        if wide {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        } else {
            out.push(v as u8);
        }
    }
    Ok(out)
}

/// Binary colour PPM (P6) with maxval 255.
pub fn encode_ppm(pixels: &[[u8; 3]], width: usize, height: usize) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(CliError::Encode(format!(
            "PPM raster has {} pixels, expected {width}x{height}",
            pixels.len()
        )));
    }
    let header = format!("P6\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + 3 * pixels.len());
    out.extend_from_slice(header.as_bytes());
    for p in pixels {
        out.extend_from_slice(p);
    }
    Ok(out)
}

/// Shortest round-trip digits; exponent form for very small or large
/// magnitudes.
fn write_real(out: &mut String, x: f64) {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        write!(out, "{x}")
    } else {
        write!(out, "{x:e}")
    }
    .expect("writing to a String");
}

/// A named column of reals.
pub type Column<'a> = (&'a str, &'a [f64]);

/// CSV with a header row. Reals use the shortest representation that parses
/// back to the same double.
pub fn encode_csv(columns: &[Column<'_>]) -> Result<Vec<u8>> {
    let rows = columns.first().map_or(0, |c| c.1.len());
    if let Some((name, col)) = columns.iter().find(|c| c.1.len() != rows) {
        return Err(CliError::Encode(format!(
            "column `{name}` has {} rows, expected {rows}",
            col.len()
        )));
    }
    let mut out = String::new();
    let names: Vec<&str> = columns.iter().map(|c| c.0).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for r in 0..rows {
        for (i, (_, col)) in columns.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_real(&mut out, col[r]);
        }
        out.push('\n');
    }
    Ok(out.into_bytes())
}
