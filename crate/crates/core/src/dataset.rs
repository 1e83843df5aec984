//! Session records with integer ×100 scaling, CSV persistence and cleaning.
//!
//! MOS, frame rate and packet loss (in percent) are stored multiplied by 100,
//! so `mos = 242` means MOS 2.42 and `loss = 1000` means 10.00 % loss.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stall::parse_stalling_string;

/// Canonical column order.
pub const COLUMNS: [&str; 14] = [
    "mos",
    "loss",
    "jitter",
    "delay",
    "bitrate",
    "throughput",
    "rebuffering",
    "buffering",
    "framerate",
    "duration",
    "stalling",
    "vheight",
    "vwidth",
    "startup",
];

/// Alternative names accepted on load.
const ALIASES: [(&str, &str); 4] = [
    ("delay_qos", "delay"),
    ("avg_bitrate", "bitrate"),
    ("packet_loss", "loss"),
    ("startup_time", "startup"),
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{0} is outside the MOS range [1, 5]")]
    OutOfRange(f64),
    #[error("scaled MOS {0} is outside [100, 500]")]
    ScaledOutOfRange(i64),
    #[error("header does not contain column `{missing}`")]
    HeaderMismatch { missing: String },
    #[error("line {line}: {message}")]
    RowParseError { line: u64, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

pub fn encode_mos(mos: f64) -> Result<i64> {
    if !(1.0..=5.0).contains(&mos) {
        return Err(DatasetError::OutOfRange(mos));
    }
    Ok((mos * 100.0).round() as i64)
}

pub fn decode_mos(x: i64) -> Result<f64> {
    if !(100..=500).contains(&x) {
        return Err(DatasetError::ScaledOutOfRange(x));
    }
    Ok(x as f64 / 100.0)
}

/// Any ×100 field back to its real value.
pub fn descale(x: i64) -> f64 {
    x as f64 / 100.0
}

pub fn scale(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub mos_x100: i64,
    pub loss_x100: i64,
    pub jitter_ms: i64,
    pub delay_ms: i64,
    pub bitrate_kbps: i64,
    pub throughput_bps: i64,
    pub rebuffering_ms: i64,
    pub buffering_ms: i64,
    pub framerate_x100: i64,
    pub duration_ms: i64,
    pub stalling: String,
    pub vheight: i64,
    pub vwidth: i64,
    pub startup_ms: i64,
    /// Columns beyond the canonical set, in file order, kept verbatim.
    pub extra: Vec<(String, String)>,
}

impl SessionRecord {
    pub fn mos(&self) -> f64 {
        descale(self.mos_x100)
    }

    pub fn loss_pct(&self) -> f64 {
        descale(self.loss_x100)
    }

    pub fn framerate(&self) -> f64 {
        descale(self.framerate_x100)
    }

    pub fn extra_value(&self, name: &str) -> Option<&str> {
        self.extra
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    fn canonical_fields(&self) -> [String; 14] {
        [
            self.mos_x100.to_string(),
            self.loss_x100.to_string(),
            self.jitter_ms.to_string(),
            self.delay_ms.to_string(),
            self.bitrate_kbps.to_string(),
            self.throughput_bps.to_string(),
            self.rebuffering_ms.to_string(),
            self.buffering_ms.to_string(),
            self.framerate_x100.to_string(),
            self.duration_ms.to_string(),
            self.stalling.clone(),
            self.vheight.to_string(),
            self.vwidth.to_string(),
            self.startup_ms.to_string(),
        ]
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(100..=500).contains(&self.mos_x100) {
            return Err(format!("mos {} outside [100, 500]", self.mos_x100));
        }
        parse_stalling_string(&self.stalling).map_err(|e| e.to_string())?;
        Ok(())
    }
}

/// How `load_csv` treats rows that fail to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowPolicy {
    #[default]
    Fatal,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadReport {
    pub records: Vec<SessionRecord>,
    /// Extra column names in file order.
    pub extra_columns: Vec<String>,
    /// `(line, message)` for each skipped row.
    pub skipped: Vec<(u64, String)>,
}

fn canonical_name(header: &str) -> &str {
    let h = header.trim();
    ALIASES
        .iter()
        .find(|(alias, _)| *alias == h)
        .map_or(h, |(_, canonical)| canonical)
}

/// Reads a dataset from any reader. Canonical columns may appear in any
/// order; other columns are carried as extras.
pub fn read_csv<R: Read>(reader: R, policy: RowPolicy) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();

    let mut positions = [usize::MAX; 14];
    let mut extras = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match COLUMNS.iter().position(|c| *c == canonical_name(h)) {
            Some(slot) if positions[slot] == usize::MAX => positions[slot] = i,
            _ => extras.push((i, h.to_string())),
        }
    }
    if let Some(slot) = positions.iter().position(|p| *p == usize::MAX) {
        return Err(DatasetError::HeaderMismatch {
            missing: COLUMNS[slot].to_string(),
        });
    }

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                match policy {
                    RowPolicy::Fatal => {
                        return Err(DatasetError::RowParseError {
                            line,
                            message: e.to_string(),
                        })
                    }
                    RowPolicy::Skip => {
                        log::warn!("line {line}: skipping unreadable row: {e}");
                        skipped.push((line, e.to_string()));
                        continue;
                    }
                }
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, &positions, &extras) {
            Ok(rec) => records.push(rec),
            Err(message) => match policy {
                RowPolicy::Fatal => return Err(DatasetError::RowParseError { line, message }),
                RowPolicy::Skip => {
                    log::warn!("line {line}: skipping row: {message}");
                    skipped.push((line, message));
                }
            },
        }
    }
    Ok(LoadReport {
        records,
        extra_columns: extras.into_iter().map(|(_, h)| h).collect(),
        skipped,
    })
}

fn parse_row(
    row: &csv::StringRecord,
    positions: &[usize; 14],
    extras: &[(usize, String)],
) -> std::result::Result<SessionRecord, String> {
    let field = |slot: usize| row.get(positions[slot]).unwrap_or("").trim();
    let int = |slot: usize| -> std::result::Result<i64, String> {
        let raw = field(slot);
        raw.parse::<i64>()
            .map_err(|_| format!("column `{}`: `{raw}` is not an integer", COLUMNS[slot]))
    };
    let rec = SessionRecord {
        mos_x100: int(0)?,
        loss_x100: int(1)?,
        jitter_ms: int(2)?,
        delay_ms: int(3)?,
        bitrate_kbps: int(4)?,
        throughput_bps: int(5)?,
        rebuffering_ms: int(6)?,
        buffering_ms: int(7)?,
        framerate_x100: int(8)?,
        duration_ms: int(9)?,
        stalling: field(10).to_string(),
        vheight: int(11)?,
        vwidth: int(12)?,
        startup_ms: int(13)?,
        extra: extras
            .iter()
            .map(|(i, h)| (h.clone(), row.get(*i).unwrap_or("").to_string()))
            .collect(),
    };
    rec.validate()?;
    Ok(rec)
}

/// Writes records in canonical column order, followed by `extra_columns`.
pub fn write_csv<W: Write>(writer: W, records: &[SessionRecord], extra_columns: &[String]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(COLUMNS.iter().copied().chain(extra_columns.iter().map(String::as_str)))?;
    for rec in records {
        let extras = extra_columns
            .iter()
            .map(|name| rec.extra_value(name).unwrap_or("").to_string());
        wtr.write_record(rec.canonical_fields().into_iter().chain(extras))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_csv(path: &Path, policy: RowPolicy) -> Result<LoadReport> {
    read_csv(File::open(path)?, policy)
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn save_csv(path: &Path, records: &[SessionRecord], extra_columns: &[String]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let file = File::create(&tmp)?;
        write_csv(std::io::BufWriter::new(file), records, extra_columns)?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Row counts from a cleaning pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub loaded: usize,
    pub dropped_delay: usize,
    pub dropped_bitrate: usize,
    pub jitter_adjusted: usize,
}

impl Provenance {
    pub fn retained(&self) -> usize {
        self.loaded - self.dropped_delay - self.dropped_bitrate
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanDataset {
    pub records: Vec<SessionRecord>,
    pub provenance: Provenance,
}

const MISSING: i64 = -1000;

/// Drops rows whose delay is 0 or -1000 or whose bitrate is 0, and sets
/// jitter of 0 or -1000 to 1. A row with both a bad delay and a bad bitrate
/// counts as a delay drop.
pub fn clean(records: &[SessionRecord]) -> CleanDataset {
    let mut provenance = Provenance {
        loaded: records.len(),
        ..Default::default()
    };
    let mut kept = Vec::with_capacity(records.len());
    for rec in records {
        if rec.delay_ms == 0 || rec.delay_ms == MISSING {
            provenance.dropped_delay += 1;
            continue;
        }
        if rec.bitrate_kbps == 0 {
            provenance.dropped_bitrate += 1;
            continue;
        }
        let mut rec = rec.clone();
        if rec.jitter_ms == 0 || rec.jitter_ms == MISSING {
            rec.jitter_ms = 1;
            provenance.jitter_adjusted += 1;
        }
        kept.push(rec);
    }
    CleanDataset {
        records: kept,
        provenance,
    }
}
