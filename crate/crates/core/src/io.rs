//! Matrix files: headerless CSV and the little-endian `HEAM` binary format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HEAM";
const VERSION: u32 = 1;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Input(format!("{}: {e}", path.display()))
}

/// Reads a headerless CSV of decimal floats, one sample per row.
pub fn read_csv(path: &Path) -> Result<DataMatrix> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_csv(BufReader::new(file)).map_err(|e| match e {
        Error::Input(m) => io_err(path, m),
        e => e,
    })
}

pub fn parse_csv(reader: impl Read) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("row {i}: {e}")))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Input(format!("row {i}: '{f}': {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DataMatrix::from_rows(&rows)
}

/// Writes a headerless CSV with shortest round-trip float formatting.
pub fn write_csv(path: &Path, data: &DataMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for i in 0..data.nrows() {
        let line: Vec<String> = data.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads `HEAM`: magic, `u32` version, `u64` rows, `u64` cols, then
/// row-major little-endian `f64`.
pub fn read_heam(path: &Path) -> Result<DataMatrix> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| io_err(path, e))?;
    decode_heam(&buf).map_err(|e| match e {
        Error::Input(m) => io_err(path, m),
        e => e,
    })
}

pub fn decode_heam(buf: &[u8]) -> Result<DataMatrix> {
    if buf.len() < 24 || &buf[..4] != MAGIC {
        return Err(Error::Input("not a HEAM file".into()));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Input(format!("unsupported HEAM version {version}")));
    }
    let rows = u64::from_le_bytes(buf[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(buf[16..24].try_into().expect("8 bytes")) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Input("HEAM header overflows".into()))?;
    let body = &buf[24..];
    if body.len() != expected {
        return Err(Error::Input(format!(
            "HEAM body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DataMatrix::from_row_major(rows, cols, &values)
}

pub fn encode_heam(data: &DataMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * data.nrows() * data.ncols());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(data.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(data.ncols() as u64).to_le_bytes());
    for v in data.to_row_major() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_heam(path: &Path, data: &DataMatrix) -> Result<()> {
    std::fs::write(path, encode_heam(data)).map_err(|e| io_err(path, e))
}

/// Dispatches on the leading magic bytes: `HEAM` binary, otherwise CSV.
pub fn read_matrix(path: &Path) -> Result<DataMatrix> {
    let mut head = [0u8; 4];
    let n = File::open(path)
        .and_then(|mut f| f.read(&mut head))
        .map_err(|e| io_err(path, e))?;
    if n == 4 && &head == MAGIC {
        read_heam(path)
    } else {
        read_csv(path)
    }
}

/// Reads a label vector stored as a single-column matrix file.
pub fn read_labels(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Error::Input(format!(
            "{}: labels must have one column, found {}",
            path.display(),
            m.ncols()
        )));
    }
    Ok((0..m.nrows()).map(|i| m.get(i, 0)).collect())
}
