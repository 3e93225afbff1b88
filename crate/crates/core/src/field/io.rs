//! Field serialization.
//!
//! Binary format, one field per file:
//!
//! ```text
//! MFLAB1 <kind> <nx> <ny> <a> <b>\n
//! <ny * nx little-endian f64, row-major>
//! ```
//!
//! `kind` is `channel` (a = circumference, b = 1), `torus` (a, b = periods)
//! or `disk` (a = 0, b = radius, nx = 1, ny = radial cells). Header floats
//! use shortest round-trip decimal, so write -> read reproduces every payload
//! and geometry bit for bit. The CSV export is for plotting only: cell-center
//! coordinates and values, row-major.

use std::path::Path;

use ndarray::Array2;

use crate::error::{CoreError, Result};
use crate::field::{Domain, VorticityField};

const MAGIC: &str = "MFLAB1";

pub fn encode(field: &VorticityField) -> Vec<u8> {
    let (rows, cols) = field.domain().shape();
    let (a, b) = match *field.domain() {
        Domain::Channel { lx, .. } => (lx, 1.0),
        Domain::Torus { lx, ly, .. } => (lx, ly),
        Domain::DiskRadial { radius, .. } => (0.0, radius),
    };
    let header = format!(
        "{MAGIC} {} {} {} {} {}\n",
        field.domain().kind_name(),
        cols,
        rows,
        a,
        b
    );
    let mut out = Vec::with_capacity(header.len() + rows * cols * 8);
    out.extend_from_slice(header.as_bytes());
    for &v in field.values().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<VorticityField> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CoreError::Format("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| CoreError::Format("header is not UTF-8".into()))?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    if fields.len() != 6 {
        return Err(CoreError::Format(format!(
            "expected 6 header fields, got {}",
            fields.len()
        )));
    }
    if fields[0] != MAGIC {
        return Err(CoreError::Format(format!("bad magic {:?}", fields[0])));
    }
    let nx: usize = parse_header(fields[2], "nx")?;
    let ny: usize = parse_header(fields[3], "ny")?;
    let a: f64 = parse_header(fields[4], "first extent")?;
    let b: f64 = parse_header(fields[5], "second extent")?;
    let domain = match fields[1] {
        "channel" => {
            if b != 1.0 {
                return Err(CoreError::Format(format!(
                    "channel height must be 1, got {b}"
                )));
            }
            Domain::channel(a, nx, ny)?
        }
        "torus" => Domain::torus(a, b, nx, ny)?,
        "disk" => {
            if nx != 1 {
                return Err(CoreError::Format(format!(
                    "disk fields are a single column, got nx = {nx}"
                )));
            }
            Domain::disk_radial(b, ny)?
        }
        other => return Err(CoreError::Format(format!("unknown domain kind {other:?}"))),
    };

    let payload = &bytes[newline + 1..];
    let expected = ny * nx * 8;
    if payload.len() != expected {
        return Err(CoreError::Format(format!(
            "payload holds {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let mut values = Array2::zeros((ny, nx));
    for (slot, chunk) in values.iter_mut().zip(payload.chunks_exact(8)) {
        *slot = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
    }
    VorticityField::new(domain, values)
}

fn parse_header<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| CoreError::Format(format!("cannot parse {what} from {s:?}")))
}

pub fn write_field(path: impl AsRef<Path>, field: &VorticityField) -> Result<()> {
    std::fs::write(path, encode(field))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<VorticityField> {
    decode(&std::fs::read(path)?)
}

/// Plain-text table of cell centers and values: `x1,x2,value`. Disk rows
/// carry (r, 0).
pub fn export_csv(path: impl AsRef<Path>, field: &VorticityField) -> Result<()> {
    let mut out = String::from("x1,x2,value\n");
    let (rows, cols) = field.domain().shape();
    for r in 0..rows {
        for c in 0..cols {
            let (x1, x2) = field.domain().cell_center(r, c);
            let v = field.values()[[r, c]];
            out.push_str(&format!("{x1},{x2},{v}\n"));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
