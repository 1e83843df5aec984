//! P.1203-style quality scoring.
//!
//! Two backends share one output type: a self-contained Mode 0 surrogate
//! (metadata only) and an adapter that shells out to an external reference
//! implementation and reads its JSON output (`O21` .. `O46`).

mod external;
mod surrogate;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stall::StallReport;

pub use external::{
    mode0_input_document, parse_scores_document, score_external, ExternalInput,
    DEFAULT_EXTERNAL_TIMEOUT,
};
pub use surrogate::{audio_quality, score_surrogate, stall_quality, video_quality};

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("mode {0} is not available on the surrogate backend (Mode 0 only)")]
    UnsupportedMode(u8),
    #[error("invalid mode {0}, expected 0..=3")]
    InvalidMode(i64),
    #[error("invalid segment media: {0}")]
    InvalidMedia(String),
    #[error("external scorer failed: {0}")]
    ExternalToolFailure(String),
    #[error("external scorer output does not match the expected schema: {0}")]
    SchemaMismatch(String),
    #[error("score {key} = {value} is outside [1, 5]")]
    ScoreOutOfRange { key: String, value: f64 },
    #[error("no external command configured")]
    NoExternalCommand,
}

pub type Result<T, E = QualityError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VideoCodec {
    H264,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioCodec {
    AacLc,
    HeAac,
    Mp2,
    Ac3,
}

/// Mode 0 metadata for one media segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMedia {
    pub bitrate_kbps: f64,
    pub width: u32,
    pub height: u32,
    pub framerate_fps: f64,
    pub duration_s: f64,
    pub codec: VideoCodec,
    pub audio_codec: AudioCodec,
}

impl SegmentMedia {
    pub fn h264(bitrate_kbps: f64, width: u32, height: u32, framerate_fps: f64, duration_s: f64) -> Self {
        Self {
            bitrate_kbps,
            width,
            height,
            framerate_fps,
            duration_s,
            codec: VideoCodec::H264,
            audio_codec: AudioCodec::AacLc,
        }
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.bitrate_kbps)
            || !positive(self.framerate_fps)
            || !positive(self.duration_s)
            || self.width == 0
            || self.height == 0
        {
            return Err(QualityError::InvalidMedia(format!("{self:?}")));
        }
        Ok(())
    }
}

/// P.1203 input richness level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, PartialOrd, Ord, Hash)]
pub enum Mode {
    #[default]
    Mode0,
    Mode1,
    Mode2,
    Mode3,
}

impl Mode {
    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

impl TryFrom<i64> for Mode {
    type Error = QualityError;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            0 => Ok(Mode::Mode0),
            1 => Ok(Mode::Mode1),
            2 => Ok(Mode::Mode2),
            3 => Ok(Mode::Mode3),
            other => Err(QualityError::InvalidMode(other)),
        }
    }
}

impl Serialize for Mode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Mode::try_from(v).map_err(serde::de::Error::custom)
    }
}

/// Scores in the reference tool's vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    /// Per-second audio quality.
    pub o21: Vec<f64>,
    /// Per-second video quality.
    pub o22: Vec<f64>,
    /// Stalling quality.
    pub o23: f64,
    /// Per-second audiovisual quality.
    pub o34: Vec<f64>,
    /// Audiovisual quality of the whole session.
    pub o35: f64,
    /// Overall quality.
    pub o46: f64,
    pub mode: Mode,
    /// Carried through, unused.
    pub stream_id: i64,
}

impl QualityScores {
    /// Every score, keyed by its output name.
    pub fn iter_scores(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        let lists = [("O21", &self.o21), ("O22", &self.o22), ("O34", &self.o34)];
        lists
            .into_iter()
            .flat_map(|(k, v)| v.iter().map(move |x| (k, *x)))
            .chain([("O23", self.o23), ("O35", self.o35), ("O46", self.o46)])
    }

    pub fn check_range(&self) -> Result<()> {
        for (key, value) in self.iter_scores() {
            if !(1.0..=5.0).contains(&value) {
                return Err(QualityError::ScoreOutOfRange {
                    key: key.to_string(),
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Surrogate,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScorerConfig {
    pub mode: Mode,
    pub backend: Backend,
    /// Command template, e.g. `python3 -m itu_p1203 {use_average} -m {mode} {inputs}`.
    pub external_command: Option<String>,
    pub use_average: bool,
    pub timeout: Duration,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Mode0,
            backend: Backend::Surrogate,
            external_command: None,
            use_average: false,
            timeout: DEFAULT_EXTERNAL_TIMEOUT,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        match self.backend {
            Backend::Surrogate if self.mode != Mode::Mode0 => {
                Err(QualityError::UnsupportedMode(self.mode.as_u8()))
            }
            Backend::External if self.external_command.is_none() => {
                Err(QualityError::NoExternalCommand)
            }
            _ => Ok(()),
        }
    }
}

/// What a scorer is asked to score.
#[derive(Debug, Clone)]
pub enum ScoringInput<'a> {
    Media {
        segments: &'a [SegmentMedia],
        stalls: &'a StallReport,
    },
    External(ExternalInput),
}

/// Dispatches to the configured backend.
pub fn score(config: &ScorerConfig, input: ScoringInput<'_>) -> Result<QualityScores> {
    config.validate()?;
    match (config.backend, input) {
        (Backend::Surrogate, ScoringInput::Media { segments, stalls }) => {
            score_surrogate(segments, stalls)
        }
        (Backend::External, ScoringInput::External(ext)) => score_external(&ext, config),
        (Backend::External, ScoringInput::Media { segments, stalls }) => {
            // hand the tool a Mode 0 input document
            let dir = std::env::temp_dir();
            let path: PathBuf = dir.join(format!(
                "qoekit-mode0-{}-{}.json",
                std::process::id(),
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_nanos())
            ));
            let doc = mode0_input_document(segments, stalls, 0);
            std::fs::write(&path, serde_json::to_vec_pretty(&doc).expect("json"))
                .map_err(|e| QualityError::ExternalToolFailure(e.to_string()))?;
            let out = score_external(&ExternalInput::Spec(path.clone()), config);
            let _ = std::fs::remove_file(&path);
            out
        }
        (Backend::Surrogate, ScoringInput::External(_)) => Err(QualityError::InvalidMedia(
            "the surrogate scores segment metadata, not media files".into(),
        )),
    }
}

/// Session MOS: the overall score.
pub fn mos_from_scores(q: &QualityScores) -> f64 {
    q.o46
}
