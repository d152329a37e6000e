//! Deterministic output: metadata headers, time-series tables and the snapshot container.
//!
//! Every text file starts with `# key: value` header lines. Floating-point values are
//! written with a fixed 12-significant-digit exponent format so identical runs produce
//! byte-identical files.

use std::io::{self, BufRead, Read, Write};

use anyhow::{bail, Context, Result};

use spinsplit_core::solver::TimeSeriesRow;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column names of the analysis time series.
pub const TIME_SERIES_COLUMNS: [&str; 9] =
    ["t_fs", "pop_plus", "pop_minus", "sy_plus", "sy_minus", "poldeg_plus", "poldeg_minus", "entropy", "norm_drift"];

/// Metadata written at the top of every output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub command: String,
    pub scenario: String,
    pub scenario_sha256: String,
    pub units: String,
    pub extra: Vec<(String, String)>,
}

impl Header {
    pub fn lines(&self) -> Vec<String> {
        let mut v = vec![
            format!("tool: spinsplit {TOOL_VERSION}"),
            format!("command: {}", self.command),
            format!("scenario: {}", self.scenario),
            format!("scenario_sha256: {}", self.scenario_sha256),
            format!("units: {}", self.units),
        ];
        v.extend(self.extra.iter().map(|(k, val)| format!("{k}: {val}")));
        v
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.extra.push((key.to_string(), value.into()));
        self
    }

    pub fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        for l in self.lines() {
            writeln!(w, "# {l}")?;
        }
        Ok(())
    }
}

/// Fixed-format float: 12 significant digits, `nan` for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == 0.0 {
        // Avoid "-0.00000000000e0".
        "0.00000000000e0".into()
    } else {
        format!("{x:.11e}")
    }
}

pub fn time_series_row(r: &TimeSeriesRow) -> String {
    [r.t_fs, r.pop_plus, r.pop_minus, r.sy_plus(), r.sy_minus(), r.poldeg_plus, r.poldeg_minus, r.entropy, r.norm_drift]
        .iter()
        .map(|&x| num(x))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_time_series(w: &mut dyn Write, header: &Header, rows: &[TimeSeriesRow]) -> io::Result<()> {
    header.write_text(w)?;
    writeln!(w, "{}", TIME_SERIES_COLUMNS.join(","))?;
    for r in rows {
        writeln!(w, "{}", time_series_row(r))?;
    }
    Ok(())
}

/// Reads a time-series file back (skipping the header). Used by tests and `compare`.
pub fn read_time_series(r: impl BufRead) -> Result<Vec<[f64; 9]>> {
    let mut rows = Vec::new();
    let mut seen_columns = false;
    for line in r.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_columns {
            if line != TIME_SERIES_COLUMNS.join(",") {
                bail!("unexpected time-series columns: {line}");
            }
            seen_columns = true;
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().with_context(|| format!("bad number '{s}'")))
            .collect::<Result<_>>()?;
        let row: [f64; 9] = vals.try_into().map_err(|v: Vec<f64>| anyhow::anyhow!("expected 9 columns, got {}", v.len()))?;
        rows.push(row);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 8] = b"SPSNAP01";

/// What the coordinate column of a snapshot holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SnapshotKind {
    /// Position z (µm); amplitudes are grid values ψ(z_j).
    Position = 0,
    /// Momentum p (eV/c); amplitudes are mode-lattice coefficients.
    Momentum = 1,
}

impl SnapshotKind {
    fn from_u8(b: u8) -> Result<Self> {
        match b {
            0 => Ok(SnapshotKind::Position),
            1 => Ok(SnapshotKind::Momentum),
            _ => bail!("unknown snapshot kind {b}"),
        }
    }

    fn coordinate(self) -> &'static str {
        match self {
            SnapshotKind::Position => "z_um",
            SnapshotKind::Momentum => "p_eV",
        }
    }
}

/// One stored state: rows of (coordinate, Re ψ↑, Im ψ↑, Re ψ↓, Im ψ↓).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub kind: SnapshotKind,
    pub t_fs: f64,
    pub norm: f64,
    pub rows: Vec<[f64; 5]>,
}

/// Little-endian container: magic, header length (u32) and UTF-8 header, then records of
/// kind (u8), t_fs (f64), norm (f64), row count (u64) and the rows.
pub struct SnapshotWriter<W: Write> {
    w: W,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(mut w: W, header: &Header) -> io::Result<Self> {
        let text = header.lines().join("\n");
        w.write_all(MAGIC)?;
        w.write_all(&(text.len() as u32).to_le_bytes())?;
        w.write_all(text.as_bytes())?;
        Ok(Self { w })
    }

    pub fn write(&mut self, rec: &SnapshotRecord) -> io::Result<()> {
        self.w.write_all(&[rec.kind as u8])?;
        self.w.write_all(&rec.t_fs.to_le_bytes())?;
        self.w.write_all(&rec.norm.to_le_bytes())?;
        self.w.write_all(&(rec.rows.len() as u64).to_le_bytes())?;
        for row in &rec.rows {
            for x in row {
                self.w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.w.flush()?;
        Ok(self.w)
    }
}

fn read_exact_or_eof(r: &mut impl Read, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            bail!("truncated snapshot record");
        }
        filled += n;
    }
    Ok(true)
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).context("truncated snapshot record")?;
    Ok(f64::from_le_bytes(b))
}

/// Reads a whole container: header lines and records.
pub fn read_snapshots(mut r: impl Read) -> Result<(Vec<String>, Vec<SnapshotRecord>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).context("missing snapshot magic")?;
    if &magic != MAGIC {
        bail!("not a snapshot container");
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut text = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut text)?;
    let header = String::from_utf8(text)?.lines().map(str::to_string).collect();

    let mut records = Vec::new();
    let mut kind = [0u8; 1];
    while read_exact_or_eof(&mut r, &mut kind)? {
        let kind = SnapshotKind::from_u8(kind[0])?;
        let t_fs = read_f64(&mut r)?;
        let norm = read_f64(&mut r)?;
        let mut n = [0u8; 8];
        r.read_exact(&mut n)?;
        let n = u64::from_le_bytes(n) as usize;
        let mut rows = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let mut row = [0.0; 5];
            for x in &mut row {
                *x = read_f64(&mut r)?;
            }
            rows.push(row);
        }
        records.push(SnapshotRecord { kind, t_fs, norm, rows });
    }
    Ok((header, records))
}

/// Text form of one snapshot: a `# snapshot` line, a column line and the rows.
pub fn write_snapshot_text(w: &mut dyn Write, rec: &SnapshotRecord) -> io::Result<()> {
    writeln!(w, "# snapshot t_fs={} norm={}", num(rec.t_fs), num(rec.norm))?;
    writeln!(w, "{},re_up,im_up,re_down,im_down", rec.kind.coordinate())?;
    for row in &rec.rows {
        writeln!(w, "{}", row.iter().map(|&x| num(x)).collect::<Vec<_>>().join(","))?;
    }
    Ok(())
}

/// Converts a binary container to its text dump.
pub fn dump_snapshots(r: impl Read, w: &mut dyn Write) -> Result<usize> {
    let (header, records) = read_snapshots(r)?;
    for l in &header {
        writeln!(w, "# {l}")?;
    }
    for rec in &records {
        write_snapshot_text(w, rec)?;
    }
    Ok(records.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header {
            command: "simulate".into(),
            scenario: "x".into(),
            scenario_sha256: "00".into(),
            units: "u".into(),
            extra: vec![],
        }
    }

    #[test]
    fn number_format_is_fixed() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-0.0), "0.00000000000e0");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(num(-2.5e-7), "-2.50000000000e-7");
    }

    #[test]
    fn snapshot_container_round_trip() {
        let rec = SnapshotRecord {
            kind: SnapshotKind::Position,
            t_fs: 1.5,
            norm: 1.0,
            rows: vec![[0.0, 1.0, -1.0, 0.5, 0.25], [1.0, 2.0, 3.0, 4.0, 5.0]],
        };
        let mut w = SnapshotWriter::new(Vec::new(), &header()).unwrap();
        w.write(&rec).unwrap();
        w.write(&SnapshotRecord { kind: SnapshotKind::Momentum, ..rec.clone() }).unwrap();
        let bytes = w.finish().unwrap();
        let (h, recs) = read_snapshots(&bytes[..]).unwrap();
        assert_eq!(h, header().lines());
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0], rec);
        assert_eq!(recs[1].kind, SnapshotKind::Momentum);
    }

    #[test]
    fn truncated_container_is_rejected() {
        let mut w = SnapshotWriter::new(Vec::new(), &header()).unwrap();
        w.write(&SnapshotRecord { kind: SnapshotKind::Position, t_fs: 0.0, norm: 1.0, rows: vec![[0.0; 5]] })
            .unwrap();
        let bytes = w.finish().unwrap();
        assert!(read_snapshots(&bytes[..bytes.len() - 3]).is_err());
    }
}
