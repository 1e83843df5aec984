//! Stall detection from segment arrival timelines and from 1 Hz player
//! polling, plus the `"<start> - <duration> | ..."` stalling-string encoding.
//!
//! Timeline rule: with `d_i` the playback length of segment `i` and `S_i` its
//! stall, segment `n+1` stalls playback by
//!
//! ```text
//! S_{n+1} = T_seg(n+1) - sum_{i<=n} (d_i + S_i)   when positive, else 0
//! ```
//!
//! with arrivals measured from the playback origin. The stall begins at media
//! position `sum_{i<=n} d_i`. Time before the first segment arrives is startup,
//! never stall.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::har::SegmentTiming;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StallError {
    #[error("segment {index} has no playback duration")]
    MissingDurations { index: u32 },
    #[error("segment {index} arrives before segment {prev}")]
    NonMonotoneArrivals { index: u32, prev: u32 },
    #[error("segment indices are not contiguous at {index}")]
    NonContiguous { index: u32 },
    #[error("player trace is empty")]
    EmptyTrace,
    #[error("bad stalling clause `{clause}`")]
    BadStallSyntax { clause: String },
    #[error("stall events must have positive duration and strictly increasing onsets")]
    Overlapping,
}

pub type Result<T, E = StallError> = std::result::Result<T, E>;

/// One playback interruption. `start_ms` is the media position at which
/// playback froze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StallEvent {
    pub start_ms: u64,
    pub duration_ms: u64,
}

impl StallEvent {
    pub fn from_secs(start_s: u64, duration_s: u64) -> Self {
        Self {
            start_ms: start_s * 1000,
            duration_ms: duration_s * 1000,
        }
    }

    pub fn start_s(&self) -> f64 {
        self.start_ms as f64 / 1000.0
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ms as f64 / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMethod {
    Timeline,
    Poller,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StallReport {
    pub events: Vec<StallEvent>,
    pub total_ms: u64,
    pub method: DetectionMethod,
}

impl StallReport {
    pub fn new(events: Vec<StallEvent>, method: DetectionMethod) -> Self {
        let total_ms = events.iter().map(|e| e.duration_ms).sum();
        Self {
            events,
            total_ms,
            method,
        }
    }

    pub fn empty(method: DetectionMethod) -> Self {
        Self::new(Vec::new(), method)
    }

    pub fn total_s(&self) -> f64 {
        self.total_ms as f64 / 1000.0
    }

    pub fn to_stalling_string(&self) -> Result<String> {
        format_stalling_string(&self.events)
    }
}

/// Playback origin: the later of the configured startup instant and the
/// first arrival, since playback cannot begin before segment 1 exists.
fn playback_origin(segments: &[SegmentTiming], startup_ms: u64) -> u64 {
    segments.first().map_or(startup_ms, |s| s.t_seg.max(startup_ms))
}

fn validate(segments: &[SegmentTiming]) -> Result<Vec<u64>> {
    let mut durations = Vec::with_capacity(segments.len());
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            let prev = &segments[i - 1];
            if seg.index != prev.index + 1 {
                return Err(StallError::NonContiguous { index: seg.index });
            }
            if seg.t_seg < prev.t_seg {
                return Err(StallError::NonMonotoneArrivals {
                    index: seg.index,
                    prev: prev.index,
                });
            }
        }
        match seg.duration_ms {
            Some(d) => durations.push(d),
            None => return Err(StallError::MissingDurations { index: seg.index }),
        }
    }
    Ok(durations)
}

/// Timeline detector.
pub fn detect_stalls_timeline(segments: &[SegmentTiming], startup_ms: u64) -> Result<StallReport> {
    let durations = validate(segments)?;
    let origin = playback_origin(segments, startup_ms) as i64;

    let mut events = Vec::new();
    // sum of (d_i + S_i) over the segments already handled, relative to origin
    let mut deadline: i64 = 0;
    let mut media_pos: u64 = 0;
    for (n, (seg, d)) in segments.iter().zip(&durations).enumerate() {
        if n > 0 {
            let arrival = seg.t_seg as i64 - origin;
            if arrival > deadline {
                let stall = (arrival - deadline) as u64;
                events.push(StallEvent {
                    start_ms: media_pos,
                    duration_ms: stall,
                });
                deadline = arrival;
            }
        }
        deadline += *d as i64;
        media_pos += d;
    }
    Ok(StallReport::new(events, DetectionMethod::Timeline))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerState {
    Playing,
    Stalled,
}

/// Poller detector over a 1 Hz trace starting at playback start. The onset of
/// a stall is the number of seconds already played when it was first seen.
pub fn detect_stalls_poller(trace: &[PlayerState]) -> Result<StallReport> {
    if trace.is_empty() {
        return Err(StallError::EmptyTrace);
    }
    let mut events = Vec::new();
    let mut played: u64 = 0;
    let mut current: Option<StallEvent> = None;
    for state in trace {
        match state {
            PlayerState::Stalled => match current.as_mut() {
                Some(ev) => ev.duration_ms += 1000,
                None => {
                    current = Some(StallEvent {
                        start_ms: played * 1000,
                        duration_ms: 1000,
                    })
                }
            },
            PlayerState::Playing => {
                events.extend(current.take());
                played += 1;
            }
        }
    }
    events.extend(current.take());
    Ok(StallReport::new(events, DetectionMethod::Poller))
}

/// Samples, once per second from playback start, the player state implied by
/// a segment timeline. Runs until the last segment finishes playing.
pub fn player_trace_from_timeline(
    segments: &[SegmentTiming],
    startup_ms: u64,
) -> Result<Vec<PlayerState>> {
    let report = detect_stalls_timeline(segments, startup_ms)?;
    let media_ms: u64 = segments.iter().filter_map(|s| s.duration_ms).sum();
    let wall_ms = media_ms + report.total_ms;

    // stall intervals in wall time: onset shifted by stalls already suffered
    let mut intervals = Vec::with_capacity(report.events.len());
    let mut stalled_before = 0;
    for ev in &report.events {
        let from = ev.start_ms + stalled_before;
        intervals.push((from, from + ev.duration_ms));
        stalled_before += ev.duration_ms;
    }

    let samples = wall_ms.div_ceil(1000);
    Ok((0..samples)
        .map(|k| {
            let t = k * 1000;
            if intervals.iter().any(|(a, b)| (*a..*b).contains(&t)) {
                PlayerState::Stalled
            } else {
                PlayerState::Playing
            }
        })
        .collect())
}

fn parse_int(part: &str, clause: &str) -> Result<u64> {
    let part = part.trim();
    if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(StallError::BadStallSyntax {
            clause: clause.to_string(),
        });
    }
    part.parse().map_err(|_| StallError::BadStallSyntax {
        clause: clause.to_string(),
    })
}

/// Parses `"3 - 20 | 7 - 10"` into whole-second events. `"0 - 0"` means no
/// stalling. Onset order is not enforced; recorded datasets contain both.
pub fn parse_stalling_string(s: &str) -> Result<Vec<StallEvent>> {
    let mut events = Vec::new();
    let clauses: Vec<&str> = s.split('|').collect();
    for clause in &clauses {
        let (start, duration) = clause.split_once('-').ok_or_else(|| StallError::BadStallSyntax {
            clause: clause.trim().to_string(),
        })?;
        let start = parse_int(start, clause.trim())?;
        let duration = parse_int(duration, clause.trim())?;
        if duration == 0 {
            if start == 0 && clauses.len() == 1 {
                return Ok(Vec::new());
            }
            return Err(StallError::BadStallSyntax {
                clause: clause.trim().to_string(),
            });
        }
        events.push(StallEvent::from_secs(start, duration));
    }
    Ok(events)
}

/// Encodes events as a stalling string. Onsets are floored and durations
/// rounded up to whole seconds, so a real stall never encodes as zero.
pub fn format_stalling_string(events: &[StallEvent]) -> Result<String> {
    if events.is_empty() {
        return Ok("0 - 0".to_string());
    }
    if events.iter().any(|e| e.duration_ms == 0)
        || events.windows(2).any(|w| w[1].start_ms <= w[0].start_ms)
    {
        return Err(StallError::Overlapping);
    }
    Ok(events
        .iter()
        .map(|e| format!("{} - {}", e.start_ms / 1000, e.duration_ms.div_ceil(1000)))
        .collect::<Vec<_>>()
        .join(" | "))
}
