//! Text formats: states, constant generators and CSV tables.
//!
//! State files hold the dimension on the first line followed by the `d²`
//! entries in row-major order, one `re,im` pair per line:
//!
//! ```text
//! # |+⟩⟨+|
//! 2
//! 1.0000000000000000e0,0.0000000000000000e0
//! 0.0000000000000000e0,0.0000000000000000e0
//! 0.0000000000000000e0,0.0000000000000000e0
//! 0.0000000000000000e0,0.0000000000000000e0
//! ```
//!
//! Blank lines and `#` comments are ignored everywhere. Numbers are written
//! with 17 significant digits so every `f64` survives a round trip.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::dynamics::GeneratorSpec;
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::state::DensityMatrix;

/// 17 significant digits in scientific notation; `nan`, `inf`, `-inf`
/// for non-finite values.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Lines with their 1-based numbers, comments and blanks removed.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_complex(field: &str, line: usize) -> Result<Complex64> {
    let (re, im) =
        field.split_once(',').ok_or_else(|| parse_error(line, format!("expected `re,im`, found `{field}`")))?;
    let re: f64 = re.trim().parse().map_err(|_| parse_error(line, format!("bad real part `{re}`")))?;
    let im: f64 = im.trim().parse().map_err(|_| parse_error(line, format!("bad imaginary part `{im}`")))?;
    if !re.is_finite() || !im.is_finite() {
        return Err(parse_error(line, "non-finite entry"));
    }
    Ok(Complex64::new(re, im))
}

pub fn write_state(rho: &DensityMatrix) -> String {
    let mut out = format!("{}\n", rho.dim());
    for z in rho.matrix().as_slice() {
        out.push_str(&format!("{},{}\n", format_float(z.re), format_float(z.im)));
    }
    out
}

pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or_else(|| parse_error(1, "missing dimension header"))?;
    let dim: usize = header.parse().map_err(|_| parse_error(line, format!("bad dimension `{header}`")))?;
    if dim == 0 || dim > 64 {
        return Err(parse_error(line, format!("dimension {dim} out of range 1..=64")));
    }
    let mut entries = Vec::with_capacity(dim * dim);
    let mut last_line = line;
    for (line, content) in lines {
        if entries.len() == dim * dim {
            return Err(parse_error(line, format!("more than {} entries", dim * dim)));
        }
        entries.push(parse_complex(content, line)?);
        last_line = line;
    }
    if entries.len() != dim * dim {
        return Err(parse_error(last_line, format!("expected {} entries, found {}", dim * dim, entries.len())));
    }
    let m = ComplexMatrix::from_row_major(entries).map_err(|e| parse_error(last_line, e.to_string()))?;
    DensityMatrix::new(m).map_err(|e| parse_error(last_line, e.to_string()))
}

pub fn read_state_file(path: &Path) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read state file {}: {e}", path.display())))?;
    parse_state(&text)
}

/// Parses a constant Lindblad generator:
///
/// ```text
/// dim 2
/// hamiltonian          # optional
/// 0.5,0 0,0
/// 0,0 -0.5,0
/// channel 1.0          # rate, followed by the jump operator rows
/// 0,0 0,0
/// 1,0 0,0
/// ```
pub fn parse_generator(text: &str) -> Result<GeneratorSpec> {
    let lines: Vec<(usize, &str)> = content_lines(text).collect();
    let mut it = lines.into_iter().peekable();
    let (line, header) = it.next().ok_or_else(|| parse_error(1, "empty generator file"))?;
    let dim: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["dim", d] => d.parse().map_err(|_| parse_error(line, format!("bad dimension `{d}`")))?,
        _ => return Err(parse_error(line, "expected `dim <d>`")),
    };
    if !(1..=64).contains(&dim) {
        return Err(parse_error(line, format!("dimension {dim} out of range 1..=64")));
    }

    let read_matrix = |it: &mut std::iter::Peekable<std::vec::IntoIter<(usize, &str)>>, at: usize| {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            let (line, row) = it.next().ok_or_else(|| parse_error(at, format!("missing matrix row {}", r + 1)))?;
            let fields: Vec<&str> = row.split_whitespace().collect();
            if fields.len() != dim {
                return Err(parse_error(line, format!("expected {dim} entries, found {}", fields.len())));
            }
            for f in fields {
                entries.push(parse_complex(f, line)?);
            }
        }
        ComplexMatrix::from_row_major(entries)
    };

    let mut gen = GeneratorSpec::new(dim);
    let mut seen_hamiltonian = false;
    while let Some((line, keyword)) = it.next() {
        let parts: Vec<&str> = keyword.split_whitespace().collect();
        match parts.as_slice() {
            ["hamiltonian"] => {
                if seen_hamiltonian {
                    return Err(parse_error(line, "duplicate hamiltonian block"));
                }
                seen_hamiltonian = true;
                let h = read_matrix(&mut it, line)?;
                let deviation = h.hermiticity_defect();
                if deviation > crate::dynamics::HAMILTONIAN_HERMITIAN_TOL {
                    return Err(parse_error(line, format!("hamiltonian not Hermitian (defect {deviation:.3e})")));
                }
                gen = gen.with_hamiltonian(crate::dynamics::OperatorFn::Constant(h));
            }
            ["channel", rate] => {
                let rate: f64 = rate.parse().map_err(|_| parse_error(line, format!("bad rate `{rate}`")))?;
                if !rate.is_finite() {
                    return Err(parse_error(line, "rate must be finite"));
                }
                let a = read_matrix(&mut it, line)?;
                gen = gen.with_constant_channel(a, rate);
            }
            _ => return Err(parse_error(line, format!("unexpected `{keyword}`"))),
        }
    }
    Ok(gen)
}

/// Header plus string records, as written by the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let io_err = |e: csv::Error| Error::InvalidArgument(format!("CSV write failed: {e}"));
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wtr.write_record(&self.headers).map_err(io_err)?;
        for row in &self.rows {
            wtr.write_record(row).map_err(io_err)?;
        }
        wtr.flush().map_err(|e| Error::InvalidArgument(format!("CSV write failed: {e}")))?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(r);
        let headers = rdr.headers().map_err(|e| parse_error(1, e.to_string()))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| parse_error(i + 2, e.to_string()))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { headers, rows })
    }

    /// Numeric column by header name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[idx].parse::<f64>().map_err(|_| parse_error(i + 2, format!("`{}` is not a number", row[idx])))
            })
            .collect()
    }
}
