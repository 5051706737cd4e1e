//! Field snapshots and tabular run output.
//!
//! Snapshots use a small binary format: an ASCII header line
//! `ESF1 <nx> <ny> <lx> <ly>` followed by `nx * ny` little-endian `f64`
//! values in row-major order (row 0 is the bottom row, `y` increasing).

use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::engine::{MetricsRow, SegmentRecord, TrajectoryRow};
use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};

pub const SNAPSHOT_MAGIC: &str = "ESF1";

const MAX_HEADER: usize = 256;

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_snapshot<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    let s = field.spec();
    writeln!(w, "{SNAPSHOT_MAGIC} {} {} {} {}", s.nx, s.ny, s.lx, s.ly).map_err(io_err)?;
    let mut buf = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

pub fn read_snapshot<R: BufRead>(mut r: R) -> Result<ScalarField> {
    let mut header = Vec::new();
    r.by_ref()
        .take(MAX_HEADER as u64)
        .read_until(b'\n', &mut header)
        .map_err(io_err)?;
    if header.last() != Some(&b'\n') {
        return Err(Error::Format("snapshot header is not terminated".into()));
    }
    let header = std::str::from_utf8(&header[..header.len() - 1])
        .map_err(|_| Error::Format("snapshot header is not ASCII".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let [magic, nx, ny, lx, ly] = parts[..] else {
        return Err(Error::Format(format!(
            "malformed snapshot header {header:?}"
        )));
    };
    if magic != SNAPSHOT_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let field_err = |name: &str| Error::Format(format!("bad {name} in snapshot header"));
    let spec = GridSpec::new(
        lx.parse().map_err(|_| field_err("lx"))?,
        ly.parse().map_err(|_| field_err("ly"))?,
        nx.parse().map_err(|_| field_err("nx"))?,
        ny.parse().map_err(|_| field_err("ny"))?,
    )
    .map_err(|e| Error::Format(e.to_string()))?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() != spec.len() * 8 {
        return Err(Error::Format(format!(
            "snapshot body has {} bytes, expected {}",
            bytes.len(),
            spec.len() * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ScalarField::from_values(spec, values)
}

/// One CSV line per grid row, bottom row first.
pub fn write_csv_grid<W: Write>(w: W, field: &ScalarField) -> Result<()> {
    let nx = field.spec().nx;
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in field.values().chunks(nx) {
        out.write_record(row.iter().map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    out.flush().map_err(io_err)
}

/// Binary 8-bit PGM with linear min-max scaling. The top image row is the
/// largest `y`. A constant field renders as mid gray.
pub fn write_pgm<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    let s = field.spec();
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    let pixel = |v: f64| -> u8 {
        if span > 0.0 && span.is_finite() {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            128
        }
    };
    write!(w, "P5\n{} {}\n255\n", s.nx, s.ny).map_err(io_err)?;
    let mut buf = Vec::with_capacity(s.len());
    for row in field.values().chunks(s.nx).rev() {
        buf.extend(row.iter().map(|&v| pixel(v)));
    }
    w.write_all(&buf).map_err(io_err)
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(csv_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_metrics<W: Write>(w: W, rows: &[MetricsRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn write_trajectories<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn write_segments<W: Write>(w: W, rows: &[SegmentRecord]) -> Result<()> {
    write_rows(w, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Point;

    fn small() -> ScalarField {
        let spec = GridSpec::new(6.0, 4.0, 3, 2).unwrap();
        ScalarField::from_values(spec, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap()
    }

    #[test]
    fn snapshot_round_trip() {
        let f = ScalarField::from_fn(GridSpec::new(10.0, 5.0, 7, 3).unwrap(), |p: Point| {
            p.x * 1e-3 - p.y
        });
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &f).unwrap();
        assert!(bytes.starts_with(b"ESF1 7 3 10 5\n"));
        let back = read_snapshot(&bytes[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn corrupt_snapshots_are_rejected() {
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &small()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(
            read_snapshot(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            read_snapshot(&b"ESF1 3 2 6\n"[..]),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            read_snapshot(&b"ESF1 3 2 6 4"[..]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn pgm_puts_top_row_first() {
        let mut bytes = Vec::new();
        write_pgm(&mut bytes, &small()).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[153, 204, 255, 0, 51, 102]);
    }

    #[test]
    fn constant_field_is_uniform_gray() {
        let f = ScalarField::constant(GridSpec::new(1.0, 1.0, 4, 4).unwrap(), 0.7);
        let mut bytes = Vec::new();
        write_pgm(&mut bytes, &f).unwrap();
        assert!(bytes[bytes.len() - 16..].iter().all(|&b| b == 128));
    }

    #[test]
    fn csv_grid_rows() {
        let mut bytes = Vec::new();
        write_csv_grid(&mut bytes, &small()).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "0,1,2\n3,4,5\n");
    }
}
