//! Network profiles and a deterministic segment-delivery simulator.
//!
//! Profiles use the `config.txt` grammar:
//!
//! ```text
//! // Good 4G Network Profile:
//! -incoming
//! delay 20ms
//! delay-distro 5ms
//! loss 0%
//! rate 10Mbps
//! -outgoing
//! ...
//! ```
//!
//! The simulator works at segment grain. Loss inflates transfer time through
//! an effective rate `R (1 - L)`, and jitter is a uniform draw of half-width
//! `delay-distro` per direction. The player keeps at most two segments
//! buffered ahead of the one playing.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::har::SegmentTiming;
use crate::quality::SegmentMedia;
use crate::seed::rng_for;

/// Request size used for the upstream leg `t_s`.
pub const REQUEST_BYTES: u64 = 500;
/// Segments the player may hold beyond the one playing.
pub const BUFFER_AHEAD: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum EmulatorError {
    #[error("line {line}: {message}")]
    ProfileSyntaxError { line: usize, message: String },
    #[error("profile `{name}` (ending line {line}) has no `-{direction}` section")]
    MissingDirection {
        name: String,
        direction: &'static str,
        line: usize,
    },
    #[error("profile `{0}` drops every packet (loss 100%)")]
    DegenerateProfile(String),
    #[error("no media segments to deliver")]
    EmptyMedia,
    #[error("invalid media: {0}")]
    InvalidMedia(String),
}

pub type Result<T, E = EmulatorError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSpec {
    pub delay_ms: f64,
    /// Jitter half-width.
    pub delay_distro_ms: f64,
    pub loss_pct: f64,
    pub rate_bps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub name: String,
    pub incoming: DirectionSpec,
    pub outgoing: DirectionSpec,
}

/// Session-level network measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSample {
    pub delay_ms: f64,
    pub jitter_ms: f64,
    pub packet_loss_pct: f64,
    pub throughput_bps: f64,
    pub bitrate_kbps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSession {
    pub segments: Vec<SegmentTiming>,
    pub kpis: KpiSample,
}

// --- profile parsing ---------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum Dir {
    In,
    Out,
}

#[derive(Default)]
struct PartialDirection {
    delay_ms: Option<f64>,
    delay_distro_ms: Option<f64>,
    loss_pct: Option<f64>,
    rate_bps: Option<u64>,
    line: usize,
}

impl PartialDirection {
    fn finish(self, label: &str) -> Result<DirectionSpec> {
        let rate_bps = self.rate_bps.ok_or_else(|| EmulatorError::ProfileSyntaxError {
            line: self.line,
            message: format!("`-{label}` section has no `rate`"),
        })?;
        Ok(DirectionSpec {
            delay_ms: self.delay_ms.unwrap_or(0.0),
            delay_distro_ms: self.delay_distro_ms.unwrap_or(0.0),
            loss_pct: self.loss_pct.unwrap_or(0.0),
            rate_bps,
        })
    }
}

#[derive(Default)]
struct Block {
    name: Option<String>,
    incoming: Option<PartialDirection>,
    outgoing: Option<PartialDirection>,
    section: Option<Dir>,
}

impl Block {
    fn is_blank(&self) -> bool {
        self.name.is_none() && self.incoming.is_none() && self.outgoing.is_none()
    }

    fn has_direction(&self) -> bool {
        self.incoming.is_some() || self.outgoing.is_some()
    }
}

fn profile_name(comment: &str) -> String {
    let mut name = comment.trim().trim_end_matches(':').trim();
    for suffix in [" Network Profile", " network profile", " Profile", " profile"] {
        if let Some(stripped) = name.strip_suffix(suffix) {
            name = stripped.trim();
            break;
        }
    }
    name.to_string()
}

fn number(text: &str, line: usize, what: &str) -> Result<f64> {
    let syntax = || EmulatorError::ProfileSyntaxError {
        line,
        message: format!("bad {what} value `{text}`"),
    };
    let v: f64 = text.trim().parse().map_err(|_| syntax())?;
    if !v.is_finite() || v < 0.0 {
        return Err(syntax());
    }
    Ok(v)
}

fn with_unit<'a>(value: &'a str, units: &[&str]) -> Option<(&'a str, usize)> {
    let lower = value.to_ascii_lowercase();
    units.iter().enumerate().find_map(|(i, u)| {
        lower
            .ends_with(u)
            .then(|| (&value[..value.len() - u.len()], i))
    })
}

fn parse_param(key: &str, value: &str, line: usize, target: &mut PartialDirection) -> Result<()> {
    let unit_error = |expected: &str| EmulatorError::ProfileSyntaxError {
        line,
        message: format!("`{key} {value}`: expected {expected}"),
    };
    match key {
        "delay" | "delay-distro" => {
            let (n, _) = with_unit(value, &["ms"]).ok_or_else(|| unit_error("a value in ms"))?;
            let v = number(n, line, key)?;
            if key == "delay" {
                target.delay_ms = Some(v);
            } else {
                target.delay_distro_ms = Some(v);
            }
        }
        "loss" => {
            let (n, _) = with_unit(value, &["%"]).ok_or_else(|| unit_error("a percentage"))?;
            let v = number(n, line, key)?;
            if v > 100.0 {
                return Err(unit_error("a percentage in [0, 100]"));
            }
            target.loss_pct = Some(v);
        }
        "rate" => {
            // longest suffixes first so `Mbps` is not read as `bps`
            let (n, unit) = with_unit(value, &["gbps", "mbps", "kbps", "bps"])
                .ok_or_else(|| unit_error("Gbps, Mbps, Kbps or bps"))?;
            let scale = [1e9, 1e6, 1e3, 1.0][unit];
            let bps = (number(n, line, key)? * scale).round();
            if bps < 1.0 {
                return Err(unit_error("a positive rate"));
            }
            target.rate_bps = Some(bps as u64);
        }
        other => {
            return Err(EmulatorError::ProfileSyntaxError {
                line,
                message: format!("unknown parameter `{other}`"),
            })
        }
    }
    Ok(())
}

fn finish_block(block: Block, index: usize, line: usize, out: &mut Vec<NetworkProfile>) -> Result<()> {
    if block.is_blank() {
        return Ok(());
    }
    let name = block.name.unwrap_or_else(|| format!("custom-{index}"));
    let missing = |direction| EmulatorError::MissingDirection {
        name: name.clone(),
        direction,
        line,
    };
    let incoming = block.incoming.ok_or_else(|| missing("incoming"))?;
    let outgoing = block.outgoing.ok_or_else(|| missing("outgoing"))?;
    out.push(NetworkProfile {
        incoming: incoming.finish("incoming")?,
        outgoing: outgoing.finish("outgoing")?,
        name,
    });
    Ok(())
}

/// Parses every profile block in a `config.txt` document.
pub fn parse_profiles(config_text: &str) -> Result<Vec<NetworkProfile>> {
    let mut profiles = Vec::new();
    let mut block = Block::default();
    let mut last_line = 0;

    for (i, raw) in config_text.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if text.is_empty() {
            continue;
        }
        last_line = line;
        if let Some(comment) = text.strip_prefix("//") {
            if block.has_direction() {
                let done = std::mem::take(&mut block);
                finish_block(done, profiles.len() + 1, line - 1, &mut profiles)?;
            }
            block.name = Some(profile_name(comment));
            continue;
        }
        if let Some(marker) = text.strip_prefix('-') {
            let dir = match marker.trim() {
                "incoming" => Dir::In,
                "outgoing" => Dir::Out,
                other => {
                    return Err(EmulatorError::ProfileSyntaxError {
                        line,
                        message: format!("unknown section `-{other}`"),
                    })
                }
            };
            let taken = match dir {
                Dir::In => block.incoming.is_some(),
                Dir::Out => block.outgoing.is_some(),
            };
            if taken {
                let done = std::mem::take(&mut block);
                finish_block(done, profiles.len() + 1, line - 1, &mut profiles)?;
            }
            let fresh = Some(PartialDirection {
                line,
                ..Default::default()
            });
            match dir {
                Dir::In => block.incoming = fresh,
                Dir::Out => block.outgoing = fresh,
            }
            block.section = Some(dir);
            continue;
        }

        let mut parts = text.split_whitespace();
        let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(EmulatorError::ProfileSyntaxError {
                line,
                message: format!("expected `<parameter> <value>`, got `{text}`"),
            });
        };
        let target = match block.section {
            Some(Dir::In) => block.incoming.as_mut(),
            Some(Dir::Out) => block.outgoing.as_mut(),
            None => None,
        }
        .ok_or_else(|| EmulatorError::ProfileSyntaxError {
            line,
            message: format!("`{key}` outside an -incoming/-outgoing section"),
        })?;
        parse_param(key, value, line, target)?;
    }
    finish_block(block, profiles.len() + 1, last_line, &mut profiles)?;
    Ok(profiles)
}

fn render_rate(bps: u64) -> String {
    if bps % 1_000_000_000 == 0 {
        format!("{}Gbps", bps / 1_000_000_000)
    } else if bps % 1_000_000 == 0 {
        format!("{}Mbps", bps / 1_000_000)
    } else if bps % 1_000 == 0 {
        format!("{}Kbps", bps / 1_000)
    } else {
        format!("{bps}bps")
    }
}

/// Writes profiles back in the `config.txt` grammar.
pub fn render_profiles(profiles: &[NetworkProfile]) -> String {
    let mut out = String::new();
    for (i, p) in profiles.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "// {} Network Profile:", p.name);
        for (label, d) in [("incoming", &p.incoming), ("outgoing", &p.outgoing)] {
            let _ = writeln!(out, "-{label}");
            let _ = writeln!(out, "delay {}ms", d.delay_ms);
            let _ = writeln!(out, "delay-distro {}ms", d.delay_distro_ms);
            let _ = writeln!(out, "loss {}%", d.loss_pct);
            let _ = writeln!(out, "rate {}", render_rate(d.rate_bps));
        }
    }
    out
}

// --- delivery simulation ------------------------------------------------------

/// Simulates delivery of `media` over `profile`. Identical inputs give
/// identical outputs.
pub fn simulate_session(profile: &NetworkProfile, media: &[SegmentMedia], seed: u64) -> Result<SimulatedSession> {
    if media.is_empty() {
        return Err(EmulatorError::EmptyMedia);
    }
    for m in media {
        m.validate()
            .map_err(|e| EmulatorError::InvalidMedia(e.to_string()))?;
    }
    let (inc, out) = (&profile.incoming, &profile.outgoing);
    if inc.loss_pct >= 100.0 {
        return Err(EmulatorError::DegenerateProfile(profile.name.clone()));
    }

    let mut rng = rng_for(seed, "emulator", 0);
    let effective_in_bps = inc.rate_bps as f64 * (1.0 - inc.loss_pct / 100.0);
    let t_s = (REQUEST_BYTES as f64 * 8_000.0 / out.rate_bps as f64).round() as u64;
    let base_delay = inc.delay_ms + out.delay_ms;

    let mut segments = Vec::with_capacity(media.len());
    let mut play_start: Vec<u64> = Vec::with_capacity(media.len());
    let mut durations: Vec<u64> = Vec::with_capacity(media.len());
    let mut prev_arrival = 0u64;
    for (n, m) in media.iter().enumerate() {
        let size_bytes = (m.bitrate_kbps * m.duration_s * 125.0).round() as u64;
        let duration_ms = (m.duration_s * 1000.0).round() as u64;

        // both draws always happen so the stream does not depend on the profile
        let u_in: f64 = rng.random();
        let u_out: f64 = rng.random();
        let jitter = inc.delay_distro_ms * (2.0 * u_in - 1.0) + out.delay_distro_ms * (2.0 * u_out - 1.0);
        let t_w = (base_delay + jitter).round().max(0.0) as u64;
        let t_r = (size_bytes as f64 * 8_000.0 / effective_in_bps).round() as u64;

        let gate = if n >= BUFFER_AHEAD { play_start[n - BUFFER_AHEAD] } else { 0 };
        let t_start = prev_arrival.max(gate);
        let seg = SegmentTiming::new(n as u32 + 1, t_start, t_s, t_w, t_r, size_bytes).with_duration(duration_ms);
        let arrival = seg.t_seg;

        let start = match n {
            0 => arrival,
            _ => (play_start[n - 1] + durations[n - 1]).max(arrival),
        };
        play_start.push(start);
        durations.push(duration_ms);
        prev_arrival = arrival;
        segments.push(seg);
    }

    let kpis = measure_kpis(&segments, media, inc.loss_pct);
    Ok(SimulatedSession { segments, kpis })
}

fn measure_kpis(segments: &[SegmentTiming], media: &[SegmentMedia], loss_pct: f64) -> KpiSample {
    let n = segments.len() as f64;
    let delay_ms = segments.iter().map(|s| s.t_w as f64).sum::<f64>() / n;
    let jitter_ms = if segments.len() > 1 {
        segments
            .windows(2)
            .map(|w| (w[1].t_w as f64 - w[0].t_w as f64).abs())
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let total_bytes: u64 = segments.iter().map(|s| s.size_bytes).sum();
    let first = segments.first().map_or(0, |s| s.t_start);
    let last = segments.iter().map(|s| s.t_seg).max().unwrap_or(0);
    let wall_ms = last.saturating_sub(first);
    let throughput_bps = if wall_ms == 0 {
        0.0
    } else {
        total_bytes as f64 * 8_000.0 / wall_ms as f64
    };
    let bitrate_kbps = media.iter().map(|m| m.bitrate_kbps).sum::<f64>() / media.len() as f64;
    KpiSample {
        delay_ms,
        jitter_ms,
        packet_loss_pct: loss_pct,
        throughput_bps,
        bitrate_kbps,
    }
}
