//! Mode 0 surrogate.
//!
//! This is not the ITU reference model. It is a small, deterministic stand-in
//! with the qualitative behaviour a Mode 0 model must have:
//!
//! * video quality per second saturates in bitrate, picture area and frame
//!   rate: `O22 = 1 + 4 (1 - exp(-x))` with
//!   `x = 0.50 ln(1 + kbps/300) + 0.35 ln(1 + area/230400) + 0.25 ln(1 + fps/24)`;
//! * audio quality per second is a constant per codec;
//! * `O34 = 1 + (O22 - 1) (0.8 + 0.2 (O21 - 1) / 4)`, `O35` is the mean of `O34`;
//! * `O23 = 1 + 4 exp(-(0.045 total_stall_s + 0.12 stall_count))`, exactly 5
//!   without stalls;
//! * `O46 = 1 + (O35 - 1)(O23 - 1) / 4`, which never exceeds `O35` or `O23`.

use super::{AudioCodec, Mode, QualityScores, Result, SegmentMedia};
use crate::stall::StallReport;

const BITRATE_KNEE_KBPS: f64 = 300.0;
const AREA_KNEE_PX: f64 = 640.0 * 360.0;
const FPS_KNEE: f64 = 24.0;
const BITRATE_WEIGHT: f64 = 0.50;
const AREA_WEIGHT: f64 = 0.35;
const FPS_WEIGHT: f64 = 0.25;

const STALL_SECONDS_SLOPE: f64 = 0.045;
const STALL_EVENT_SLOPE: f64 = 0.12;

const AUDIO_SHARE: f64 = 0.2;

pub fn video_quality(media: &SegmentMedia) -> f64 {
    let x = BITRATE_WEIGHT * (media.bitrate_kbps / BITRATE_KNEE_KBPS).ln_1p()
        + AREA_WEIGHT * (media.area() / AREA_KNEE_PX).ln_1p()
        + FPS_WEIGHT * (media.framerate_fps / FPS_KNEE).ln_1p();
    1.0 + 4.0 * (1.0 - (-x).exp())
}

pub fn audio_quality(codec: AudioCodec) -> f64 {
    match codec {
        AudioCodec::AacLc => 4.5,
        AudioCodec::HeAac => 4.3,
        AudioCodec::Ac3 => 4.4,
        AudioCodec::Mp2 => 4.0,
    }
}

pub fn stall_quality(stalls: &StallReport) -> f64 {
    let penalty =
        STALL_SECONDS_SLOPE * stalls.total_s() + STALL_EVENT_SLOPE * stalls.events.len() as f64;
    1.0 + 4.0 * (-penalty).exp()
}

fn audiovisual(video: f64, audio: f64) -> f64 {
    1.0 + (video - 1.0) * ((1.0 - AUDIO_SHARE) + AUDIO_SHARE * (audio - 1.0) / 4.0)
}

fn clamp_score(v: f64) -> f64 {
    v.clamp(1.0, 5.0)
}

/// Scores a session from segment metadata and its stall report.
pub fn score_surrogate(segments: &[SegmentMedia], stalls: &StallReport) -> Result<QualityScores> {
    for seg in segments {
        seg.validate()?;
    }
    let total_s: f64 = segments.iter().map(|s| s.duration_s).sum();
    let seconds = total_s.ceil() as usize;

    let mut o21 = Vec::with_capacity(seconds);
    let mut o22 = Vec::with_capacity(seconds);
    let mut o34 = Vec::with_capacity(seconds);
    // walk the media timeline: second k is scored by the segment playing at k
    let mut seg_iter = segments.iter();
    let mut current = seg_iter.next();
    let mut seg_end = current.map_or(0.0, |s| s.duration_s);
    for k in 0..seconds {
        let t = k as f64;
        while t >= seg_end {
            match seg_iter.next() {
                Some(next) => {
                    seg_end += next.duration_s;
                    current = Some(next);
                }
                None => break,
            }
        }
        let seg = current.expect("seconds > 0 implies a segment");
        let v = clamp_score(video_quality(seg));
        let a = clamp_score(audio_quality(seg.audio_codec));
        o21.push(a);
        o22.push(v);
        o34.push(clamp_score(audiovisual(v, a)));
    }

    let o35 = if o34.is_empty() {
        1.0
    } else {
        clamp_score(o34.iter().sum::<f64>() / o34.len() as f64)
    };
    let o23 = clamp_score(stall_quality(stalls));
    let o46 = clamp_score(1.0 + (o35 - 1.0) * (o23 - 1.0) / 4.0);

    Ok(QualityScores {
        o21,
        o22,
        o23,
        o34,
        o35,
        o46,
        mode: Mode::Mode0,
        stream_id: 0,
    })
}
