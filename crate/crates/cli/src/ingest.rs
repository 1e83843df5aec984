use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use qoekit_core::har::{build_capture, parse_duration_manifest, parse_har_log, DurationSource, SessionCapture};
use qoekit_core::stall::detect_stalls_timeline;
use regex::Regex;
use serde::Serialize;

use crate::{write_atomic, CliError, PipelineConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum IngestStatus {
    Ok {
        capture_path: PathBuf,
        segments: usize,
        startup_ms: u64,
        stalling: String,
    },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub files: Vec<(PathBuf, IngestStatus)>,
    pub summary_path: PathBuf,
}

impl IngestOutcome {
    pub fn succeeded(&self) -> usize {
        self.files
            .iter()
            .filter(|(_, s)| matches!(s, IngestStatus::Ok { .. }))
            .count()
    }
}

#[derive(Serialize)]
struct CaptureDocument<'a> {
    seed: u64,
    capture: &'a SessionCapture,
    stalling: String,
    stall_total_ms: u64,
}

fn ingest_one(path: &Path, pattern: &Regex, durations: &DurationSource) -> anyhow::Result<(SessionCapture, String, u64)> {
    let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let log = parse_har_log(&raw)?;
    let capture = build_capture(&log, pattern, durations, &path.display().to_string())?;
    let stalls = detect_stalls_timeline(&capture.segments, capture.startup_ms)?;
    Ok((capture, stalls.to_stalling_string()?, stalls.total_ms))
}

/// Ingests every HAR file, writing one capture document per success and a
/// CSV summary. Failures are logged and the batch continues; the call only
/// fails when no file could be ingested.
pub fn cmd_ingest(har_paths: &[PathBuf], durations_manifest: Option<&Path>, config: &PipelineConfig) -> Result<IngestOutcome, CliError> {
    if har_paths.is_empty() {
        return Err(CliError::Usage("ingest needs at least one HAR file".into()));
    }
    let pattern = Regex::new(&config.segment_pattern)
        .map_err(|e| CliError::Config(format!("segment_pattern: {e}")))?;
    let durations = match durations_manifest {
        Some(p) => {
            crate::require_file(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            DurationSource::PerSegment(
                parse_duration_manifest(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            )
        }
        None => DurationSource::Uniform(config.segment_duration_ms),
    };

    let dir = config.output_dir.join("captures");
    let mut used = BTreeSet::new();
    let mut files = Vec::new();
    let mut summary = String::from("file,status,segments,startup_ms,stalling,error\n");
    for path in har_paths {
        let status = match ingest_one(path, &pattern, &durations) {
            Ok((capture, stalling, stall_total_ms)) => {
                let stem = path.file_stem().map_or("capture".into(), |s| s.to_string_lossy().into_owned());
                let mut name = format!("{stem}.capture.json");
                let mut k = 1;
                while !used.insert(name.clone()) {
                    name = format!("{stem}-{k}.capture.json");
                    k += 1;
                }
                let out = dir.join(name);
                let doc = CaptureDocument {
                    seed: config.seed,
                    capture: &capture,
                    stalling: stalling.clone(),
                    stall_total_ms,
                };
                let bytes = serde_json::to_vec_pretty(&doc).context("encoding capture")?;
                write_atomic(&out, &bytes).with_context(|| format!("writing {}", out.display()))?;
                log::info!("{}: {} segments, startup {} ms", path.display(), capture.segments.len(), capture.startup_ms);
                IngestStatus::Ok {
                    capture_path: out,
                    segments: capture.segments.len(),
                    startup_ms: capture.startup_ms,
                    stalling,
                }
            }
            Err(e) => {
                log::warn!("{}: {e:#}", path.display());
                IngestStatus::Failed(format!("{e:#}"))
            }
        };
        let row = match &status {
            IngestStatus::Ok { segments, startup_ms, stalling, .. } => {
                format!("{},ok,{segments},{startup_ms},{stalling},\n", csv_cell(&path.display().to_string()))
            }
            IngestStatus::Failed(e) => format!("{},failed,,,,{}\n", csv_cell(&path.display().to_string()), csv_cell(e)),
        };
        summary.push_str(&row);
        files.push((path.clone(), status));
    }

    let summary_path = config.output_dir.join("ingest_summary.csv");
    write_atomic(&summary_path, summary.as_bytes()).with_context(|| format!("writing {}", summary_path.display()))?;
    let outcome = IngestOutcome { files, summary_path };
    if outcome.succeeded() == 0 {
        return Err(CliError::Failed(anyhow::anyhow!("none of the {} HAR files could be ingested", har_paths.len())));
    }
    Ok(outcome)
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
