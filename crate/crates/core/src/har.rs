//! HAR 1.2 ingestion and media-segment timeline reconstruction.
//!
//! A segment reaches the player at `t_seg = t_start + t_s + t_w + t_r`, where
//! the addends come from the HAR request dispatch time and its `send`,
//! `wait` and `receive` timings. All times are integer milliseconds relative
//! to the session epoch, which is the `startedDateTime` of the earliest entry.

use chrono::{DateTime, Duration, FixedOffset, SecondsFormat};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Matches transport-stream segment URLs, with or without a query string.
pub const DEFAULT_SEGMENT_PATTERN: &str = r"\.ts(\?.*)?$";

/// Segment playback length used when no manifest is supplied.
pub const DEFAULT_SEGMENT_DURATION_MS: u64 = 10_000;

#[derive(Debug, Error)]
pub enum HarError {
    #[error("malformed HAR: {0}")]
    MalformedHar(String),
    #[error("entry {index} has negative `{field}` timing {value}")]
    NegativeTiming {
        index: usize,
        field: &'static str,
        value: f64,
    },
    #[error("no request URL matched the segment pattern `{pattern}`")]
    NoSegmentsFound { pattern: String },
    #[error("invalid segment pattern: {0}")]
    BadPattern(#[from] regex::Error),
    #[error("duration manifest lists {available} durations but {needed} segments were found")]
    ManifestTooShort { needed: usize, available: usize },
    #[error("segment {index} has zero playback duration")]
    ZeroDuration { index: u32 },
    #[error("bad duration manifest: {0}")]
    BadManifest(String),
}

pub type Result<T, E = HarError> = std::result::Result<T, E>;

/// One request from a HAR capture, with timings normalized to integer ms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarEntry {
    pub url: String,
    /// Dispatch time, ms since the session epoch.
    pub started_at: u64,
    pub send_ms: u64,
    pub wait_ms: u64,
    pub receive_ms: u64,
    pub body_size: u64,
}

/// A parsed HAR log: entries in dispatch order plus session-level metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct HarLog {
    pub entries: Vec<HarEntry>,
    /// Wall-clock time of the earliest entry; `None` for an empty log.
    pub epoch: Option<DateTime<FixedOffset>>,
    /// `onLoad` of the first page, 0 when absent or not applicable.
    pub page_load_ms: u64,
}

/// Per-segment delivery timing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentTiming {
    /// 1-based ordinal in dispatch order.
    pub index: u32,
    pub t_start: u64,
    pub t_s: u64,
    pub t_w: u64,
    pub t_r: u64,
    /// Arrival at the player.
    pub t_seg: u64,
    /// Playback length; not present in HAR and filled from config or manifest.
    pub duration_ms: Option<u64>,
    pub size_bytes: u64,
}

impl SegmentTiming {
    pub fn new(index: u32, t_start: u64, t_s: u64, t_w: u64, t_r: u64, size_bytes: u64) -> Self {
        Self {
            index,
            t_start,
            t_s,
            t_w,
            t_r,
            t_seg: t_start + t_s + t_w + t_r,
            duration_ms: None,
            size_bytes,
        }
    }

    pub fn with_duration(mut self, duration_ms: u64) -> Self {
        self.duration_ms = Some(duration_ms);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureMeta {
    pub source: String,
    /// RFC 3339 timestamp of the session epoch.
    pub epoch: Option<String>,
}

/// Segment timeline of one playback session, handed to the stall engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCapture {
    pub segments: Vec<SegmentTiming>,
    pub page_load_ms: u64,
    /// Time from the session epoch until the first segment reached the player.
    pub startup_ms: u64,
    pub capture_meta: CaptureMeta,
}

/// Where segment playback durations come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DurationSource {
    Uniform(u64),
    PerSegment(Vec<u64>),
}

impl Default for DurationSource {
    fn default() -> Self {
        DurationSource::Uniform(DEFAULT_SEGMENT_DURATION_MS)
    }
}

// --- raw HAR document -------------------------------------------------------

#[derive(Deserialize)]
struct RawHar {
    log: RawLog,
}

#[derive(Deserialize)]
struct RawLog {
    entries: Vec<RawEntry>,
    #[serde(default)]
    pages: Vec<RawPage>,
}

#[derive(Deserialize)]
struct RawPage {
    #[serde(rename = "pageTimings", default)]
    page_timings: Option<RawPageTimings>,
}

#[derive(Deserialize)]
struct RawPageTimings {
    #[serde(rename = "onLoad", default)]
    on_load: Option<f64>,
}

#[derive(Deserialize)]
struct RawEntry {
    #[serde(rename = "startedDateTime")]
    started_date_time: String,
    request: RawRequest,
    #[serde(default)]
    response: Option<RawResponse>,
    timings: RawTimings,
}

#[derive(Deserialize)]
struct RawRequest {
    url: String,
}

#[derive(Deserialize)]
struct RawResponse {
    #[serde(rename = "bodySize", default)]
    body_size: Option<f64>,
    #[serde(default)]
    content: Option<RawContent>,
}

#[derive(Deserialize)]
struct RawContent {
    #[serde(default)]
    size: Option<f64>,
}

#[derive(Deserialize)]
struct RawTimings {
    #[serde(default)]
    send: Option<f64>,
    #[serde(default)]
    wait: Option<f64>,
    #[serde(default)]
    receive: Option<f64>,
}

fn timing_ms(index: usize, field: &'static str, value: Option<f64>) -> Result<u64> {
    match value {
        // -1 means "not applicable" in HAR 1.2
        None => Ok(0),
        Some(v) if v == -1.0 => {
            log::warn!("entry {index}: `{field}` timing is -1 (not applicable), using 0 ms");
            Ok(0)
        }
        Some(v) if v < 0.0 || !v.is_finite() => Err(HarError::NegativeTiming {
            index,
            field,
            value: v,
        }),
        Some(v) => Ok(v.round() as u64),
    }
}

fn body_size(response: Option<&RawResponse>) -> u64 {
    let Some(resp) = response else { return 0 };
    let from_body = resp.body_size.filter(|s| *s >= 0.0);
    let from_content = resp
        .content
        .as_ref()
        .and_then(|c| c.size)
        .filter(|s| *s >= 0.0);
    from_body.or(from_content).map_or(0, |s| s.round() as u64)
}

/// Parses a HAR 1.2 document, keeping session-level metadata.
pub fn parse_har_log(raw: &[u8]) -> Result<HarLog> {
    let doc: RawHar =
        serde_json::from_slice(raw).map_err(|e| HarError::MalformedHar(e.to_string()))?;

    let mut stamped = Vec::with_capacity(doc.log.entries.len());
    for (i, entry) in doc.log.entries.iter().enumerate() {
        let at = DateTime::parse_from_rfc3339(&entry.started_date_time).map_err(|e| {
            HarError::MalformedHar(format!(
                "entry {i}: bad startedDateTime `{}`: {e}",
                entry.started_date_time
            ))
        })?;
        stamped.push((at, entry));
    }

    let epoch = stamped.iter().map(|(at, _)| *at).min();
    let mut entries = Vec::with_capacity(stamped.len());
    for (i, (at, raw)) in stamped.iter().enumerate() {
        let offset = (*at - epoch.expect("non-empty")).num_milliseconds();
        entries.push(HarEntry {
            url: raw.request.url.clone(),
            started_at: offset as u64,
            send_ms: timing_ms(i, "send", raw.timings.send)?,
            wait_ms: timing_ms(i, "wait", raw.timings.wait)?,
            receive_ms: timing_ms(i, "receive", raw.timings.receive)?,
            body_size: body_size(raw.response.as_ref()),
        });
    }
    // stable: ties keep document order
    entries.sort_by_key(|e| e.started_at);

    let page_load_ms = doc
        .log
        .pages
        .first()
        .and_then(|p| p.page_timings.as_ref())
        .and_then(|t| t.on_load)
        .filter(|v| *v >= 0.0)
        .map_or(0, |v| v.round() as u64);

    Ok(HarLog {
        entries,
        epoch,
        page_load_ms,
    })
}

/// Parses a HAR 1.2 document into entries ordered by dispatch time.
pub fn parse_har(raw: &[u8]) -> Result<Vec<HarEntry>> {
    parse_har_log(raw).map(|log| log.entries)
}

/// Writes entries back out as a minimal HAR 1.2 document anchored at `epoch`.
pub fn serialize_har(entries: &[HarEntry], epoch: DateTime<FixedOffset>) -> String {
    let entries: Vec<_> = entries
        .iter()
        .map(|e| {
            let at = epoch + Duration::milliseconds(e.started_at as i64);
            serde_json::json!({
                "startedDateTime": at.to_rfc3339_opts(SecondsFormat::Millis, true),
                "time": e.send_ms + e.wait_ms + e.receive_ms,
                "request": { "method": "GET", "url": e.url, "httpVersion": "HTTP/1.1",
                             "headers": [], "queryString": [], "cookies": [],
                             "headersSize": -1, "bodySize": 0 },
                "response": { "status": 200, "statusText": "OK", "httpVersion": "HTTP/1.1",
                              "headers": [], "cookies": [], "redirectURL": "",
                              "content": { "size": e.body_size, "mimeType": "video/mp2t" },
                              "headersSize": -1, "bodySize": e.body_size },
                "cache": {},
                "timings": { "send": e.send_ms, "wait": e.wait_ms, "receive": e.receive_ms },
            })
        })
        .collect();
    let doc = serde_json::json!({
        "log": {
            "version": "1.2",
            "creator": { "name": "qoekit", "version": env!("CARGO_PKG_VERSION") },
            "entries": entries,
        }
    });
    serde_json::to_string_pretty(&doc).expect("HAR document is always serializable")
}

/// Keeps entries whose URL matches `pattern` and numbers them 1..N in
/// dispatch order. Durations are left unset.
pub fn extract_segments(entries: &[HarEntry], pattern: &Regex) -> Result<Vec<SegmentTiming>> {
    let mut matching: Vec<&HarEntry> = entries.iter().filter(|e| pattern.is_match(&e.url)).collect();
    if matching.is_empty() {
        return Err(HarError::NoSegmentsFound {
            pattern: pattern.as_str().to_string(),
        });
    }
    matching.sort_by_key(|e| e.started_at);
    Ok(matching
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            SegmentTiming::new(
                i as u32 + 1,
                e.started_at,
                e.send_ms,
                e.wait_ms,
                e.receive_ms,
                e.body_size,
            )
        })
        .collect())
}

/// Fills `duration_ms` on every segment.
pub fn assign_durations(segments: &mut [SegmentTiming], source: &DurationSource) -> Result<()> {
    match source {
        DurationSource::Uniform(ms) => {
            for s in segments.iter_mut() {
                s.duration_ms = Some(*ms);
            }
        }
        DurationSource::PerSegment(list) => {
            if list.len() < segments.len() {
                return Err(HarError::ManifestTooShort {
                    needed: segments.len(),
                    available: list.len(),
                });
            }
            for (s, ms) in segments.iter_mut().zip(list) {
                s.duration_ms = Some(*ms);
            }
        }
    }
    if let Some(s) = segments.iter().find(|s| s.duration_ms == Some(0)) {
        return Err(HarError::ZeroDuration { index: s.index });
    }
    Ok(())
}

/// Reads a sidecar duration manifest: either a JSON array of milliseconds or
/// an object with a `segment_durations_ms` array.
pub fn parse_duration_manifest(text: &str) -> Result<Vec<u64>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Manifest {
        List(Vec<u64>),
        Object { segment_durations_ms: Vec<u64> },
    }
    match serde_json::from_str::<Manifest>(text) {
        Ok(Manifest::List(v)) | Ok(Manifest::Object { segment_durations_ms: v }) => Ok(v),
        Err(e) => Err(HarError::BadManifest(e.to_string())),
    }
}

/// Full ingest: segment extraction, durations and startup time.
pub fn build_capture(
    log: &HarLog,
    pattern: &Regex,
    durations: &DurationSource,
    source: &str,
) -> Result<SessionCapture> {
    let mut segments = extract_segments(&log.entries, pattern)?;
    assign_durations(&mut segments, durations)?;
    let startup_ms = segments[0].t_seg;
    Ok(SessionCapture {
        segments,
        page_load_ms: log.page_load_ms,
        startup_ms,
        capture_meta: CaptureMeta {
            source: source.to_string(),
            epoch: log
                .epoch
                .map(|e| e.to_rfc3339_opts(SecondsFormat::Millis, true)),
        },
    })
}
