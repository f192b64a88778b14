//! CSV and PCM writers. Files are written to a temporary sibling and renamed
//! into place, so a failed command never leaves a partial artifact.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Flag(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_num(v: f64) -> String {
    if v == 0.0 {
        // Collapse -0.0 so sign noise never changes the bytes.
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    format!("{v:.16e}")
}

fn render(cell: &Cell) -> String {
    match cell {
        Cell::Num(v) => format_num(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Flag(b) => b.to_string(),
    }
}

pub struct Table {
    pub units: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(units: impl Into<String>, header: Vec<&'static str>) -> Self {
        Self {
            units: units.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.units);
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_table(path: &Path, table: &Table) -> Result<(), CliError> {
    write_atomic(path, table.to_csv().as_bytes())
}

/// 16-bit little-endian PCM scaled so the peak maps to full scale, plus a
/// `<path>.rate` sidecar with the rate and the volts per full scale.
pub fn write_pcm(path: &Path, samples: &[f64], sample_rate: f64) -> Result<(), CliError> {
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 {
        i16::MAX as f64 / peak
    } else {
        0.0
    };
    let mut bytes = Vec::with_capacity(samples.len() * 2);
    for v in samples {
        let q = (v * scale).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        bytes.extend_from_slice(&q.to_le_bytes());
    }
    write_atomic(path, &bytes)?;
    let sidecar = format!(
        "sample_rate_hz={}\nvolts_full_scale={}\nformat=s16le\n",
        format_num(sample_rate),
        format_num(peak)
    );
    let mut rate_path = path.as_os_str().to_owned();
    rate_path.push(".rate");
    write_atomic(Path::new(&rate_path), sidecar.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [1.0, -0.1, 1e-300, 123456.789012345678, std::f64::consts::PI] {
            let s = format_num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_num(-0.0), "0");
        assert_eq!(format_num(f64::INFINITY), "inf");
        assert_eq!(format_num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new("x in Hz", vec!["x", "ok"]);
        t.push(vec![Cell::from(2.0), Cell::from(true)]);
        assert_eq!(t.to_csv(), "# x in Hz\nx,ok\n2.0000000000000000e0,true\n");
    }

    #[test]
    fn atomic_write_and_pcm() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("a.csv");
        write_atomic(&csv, b"hello").unwrap();
        assert_eq!(std::fs::read(&csv).unwrap(), b"hello");

        let pcm = dir.path().join("a.pcm");
        write_pcm(&pcm, &[0.0, 0.5, -1.0], 8000.0).unwrap();
        let bytes = std::fs::read(&pcm).unwrap();
        assert_eq!(bytes.len(), 6);
        assert_eq!(i16::from_le_bytes([bytes[4], bytes[5]]), -i16::MAX);
        let side = std::fs::read_to_string(dir.path().join("a.pcm.rate")).unwrap();
        assert!(side.contains("sample_rate_hz=8.0000000000000000e3"));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
    }
}
