//! Versioned JSON files for instances and diagonalizers.
//!
//! Every file is an object with `format`, `version` and `kind` fields.
//! Matrices are stored as `{"rows", "cols", "data"}` with `data` a row-major
//! list of rows, each entry the 16 hex digits of the IEEE-754 bit pattern, so
//! a round trip is bit exact.

use std::path::Path;

use jbdp_core::{InstanceBundle, Partition};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "jbdp";
pub const FORMAT_VERSION: u64 = 1;

pub fn encode_f64(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

pub fn decode_f64(s: &str) -> Result<f64> {
    if s.len() != 16 {
        return Err(Error::Malformed(format!(
            "hex double {s:?} must have 16 digits"
        )));
    }
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::Malformed(format!("invalid hex double {s:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<String>>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let data = m
            .row_iter()
            .map(|r| r.iter().map(|&x| encode_f64(x)).collect())
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows || self.data.iter().any(|r| r.len() != self.cols) {
            return Err(Error::Malformed(format!(
                "matrix data does not match shape {}x{}",
                self.rows, self.cols
            )));
        }
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, row) in self.data.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                m[(i, j)] = decode_f64(s)?;
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Deserialize)]
struct Header {
    format: String,
    version: u64,
    kind: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    version: u64,
    kind: String,
    tau: Vec<usize>,
    n: usize,
    m: usize,
    xi: String,
    seed: u64,
    w_true: MatrixRecord,
    a_clean: Vec<MatrixRecord>,
    a_noisy: Vec<MatrixRecord>,
}

/// A stored approximate diagonalizer and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalizerFile {
    pub tau: Partition,
    pub w: DMatrix<f64>,
    pub init: String,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct DiagonalizerRecord {
    format: String,
    version: u64,
    kind: String,
    tau: Vec<usize>,
    init: String,
    objective: String,
    converged: bool,
    w: MatrixRecord,
}

fn parse_error(text: &str, err: &serde_json::Error) -> Error {
    let (line, column) = (err.line(), err.column());
    let offset = if line == 0 {
        0
    } else {
        text.split_inclusive('\n')
            .take(line - 1)
            .map(str::len)
            .sum::<usize>()
            + column.saturating_sub(1)
    };
    Error::Parse {
        offset: offset.min(text.len()),
        line,
        column,
        message: err.to_string(),
    }
}

fn check_header(text: &str, expected_kind: &'static str) -> Result<()> {
    let h: Header = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    if h.format != FORMAT_NAME {
        return Err(Error::Malformed(format!("unknown format {:?}", h.format)));
    }
    if h.version != FORMAT_VERSION {
        return Err(Error::Version {
            found: h.version,
            expected: FORMAT_VERSION,
        });
    }
    if h.kind != expected_kind {
        return Err(Error::Kind {
            expected: expected_kind,
            found: h.kind,
        });
    }
    Ok(())
}

fn records(ms: &[DMatrix<f64>]) -> Vec<MatrixRecord> {
    ms.iter().map(MatrixRecord::from_matrix).collect()
}

fn square(rec: &MatrixRecord, n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rec.rows != n || rec.cols != n {
        return Err(Error::Malformed(format!(
            "{what} is {}x{}, expected {n}x{n}",
            rec.rows, rec.cols
        )));
    }
    rec.to_matrix()
}

pub fn instance_to_string(b: &InstanceBundle) -> Result<String> {
    let file = InstanceFile {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        kind: "instance".into(),
        tau: b.tau.sizes().to_vec(),
        n: b.tau.n(),
        m: b.a_clean.len(),
        xi: encode_f64(b.xi),
        seed: b.seed,
        w_true: MatrixRecord::from_matrix(&b.w_true),
        a_clean: records(&b.a_clean),
        a_noisy: records(&b.a_noisy),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn instance_from_str(text: &str) -> Result<InstanceBundle> {
    check_header(text, "instance")?;
    let f: InstanceFile = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    let tau = Partition::new(f.tau)?;
    if tau.n() != f.n {
        return Err(Error::Malformed(format!(
            "partition sums to {}, but n = {}",
            tau.n(),
            f.n
        )));
    }
    if f.a_clean.len() != f.m || f.a_noisy.len() != f.m {
        return Err(Error::Malformed(format!(
            "expected {} matrices per set",
            f.m
        )));
    }
    let load = |v: &[MatrixRecord], what: &str| -> Result<Vec<DMatrix<f64>>> {
        v.iter().map(|r| square(r, f.n, what)).collect()
    };
    Ok(InstanceBundle {
        w_true: square(&f.w_true, f.n, "w_true")?,
        a_clean: load(&f.a_clean, "a_clean")?,
        a_noisy: load(&f.a_noisy, "a_noisy")?,
        xi: decode_f64(&f.xi)?,
        seed: f.seed,
        tau,
    })
}

pub fn diagonalizer_to_string(d: &DiagonalizerFile) -> Result<String> {
    let rec = DiagonalizerRecord {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        kind: "diagonalizer".into(),
        tau: d.tau.sizes().to_vec(),
        init: d.init.clone(),
        objective: encode_f64(d.objective),
        converged: d.converged,
        w: MatrixRecord::from_matrix(&d.w),
    };
    Ok(serde_json::to_string_pretty(&rec)?)
}

pub fn diagonalizer_from_str(text: &str) -> Result<DiagonalizerFile> {
    check_header(text, "diagonalizer")?;
    let r: DiagonalizerRecord = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    let tau = Partition::new(r.tau)?;
    Ok(DiagonalizerFile {
        w: square(&r.w, tau.n(), "w")?,
        tau,
        init: r.init,
        objective: decode_f64(&r.objective)?,
        converged: r.converged,
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_instance(path: &Path, b: &InstanceBundle) -> Result<()> {
    write(path, &instance_to_string(b)?)
}

pub fn load_instance(path: &Path) -> Result<InstanceBundle> {
    instance_from_str(&read(path)?)
}

pub fn save_diagonalizer(path: &Path, d: &DiagonalizerFile) -> Result<()> {
    write(path, &diagonalizer_to_string(d)?)
}

pub fn load_diagonalizer(path: &Path) -> Result<DiagonalizerFile> {
    diagonalizer_from_str(&read(path)?)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Content hash of an instance, taken over its canonical serialization.
pub fn instance_hash(b: &InstanceBundle) -> Result<String> {
    Ok(sha256_hex(instance_to_string(b)?.as_bytes()))
}
