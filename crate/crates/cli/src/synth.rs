//! Synthetic dataset generation: emulated delivery, stall detection and
//! scoring for every (profile, session) pair.

use std::path::{Path, PathBuf};

use anyhow::Context;
use qoekit_core::dataset::{encode_mos, scale, write_csv, SessionRecord};
use qoekit_core::emulator::{parse_profiles, simulate_session, EmulatorError, NetworkProfile};
use qoekit_core::quality::{mos_from_scores, score, ScoringInput, SegmentMedia};
use qoekit_core::seed::{derive_seed, rng_for};
use qoekit_core::stall::detect_stalls_timeline;
use rand::Rng;

use crate::{require_file, sha256_hex, write_atomic, CliError, PipelineConfig};

/// `(width, height, kbps)` rungs.
pub const MEDIA_LADDER: [(u32, u32, u32); 7] = [
    (256, 144, 150),
    (426, 240, 250),
    (426, 240, 330),
    (640, 360, 420),
    (640, 360, 540),
    (854, 480, 650),
    (1280, 720, 820),
];

const FRAMERATES: [f64; 3] = [24.0, 25.0, 30.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutcome {
    pub path: PathBuf,
    pub rows: usize,
    pub sha256: String,
}

fn session_index(profile: usize, session: usize) -> u64 {
    ((profile as u64) << 32) | session as u64
}

fn synthesize_one(
    profile: &NetworkProfile,
    index: u64,
    config: &PipelineConfig,
) -> Result<SessionRecord, CliError> {
    let mut rng = rng_for(config.seed, "synth-media", index);
    let (width, height, kbps) = MEDIA_LADDER[rng.random_range(0..MEDIA_LADDER.len())];
    let fps = FRAMERATES[rng.random_range(0..FRAMERATES.len())];
    let n_segments = (config.session_duration_s / config.segment_length_s) as usize;
    let media = vec![
        SegmentMedia::h264(kbps as f64, width, height, fps, config.segment_length_s as f64);
        n_segments
    ];

    let sim = simulate_session(profile, &media, derive_seed(config.seed, "synth-net", index)).map_err(|e| match e {
        EmulatorError::DegenerateProfile(_) => CliError::Config(e.to_string()),
        other => CliError::Failed(other.into()),
    })?;
    let startup_ms = sim.segments[0].t_seg;
    let stalls = detect_stalls_timeline(&sim.segments, startup_ms).context("stall detection")?;
    let scores = score(
        &config.scorer,
        ScoringInput::Media {
            segments: &media,
            stalls: &stalls,
        },
    )
    .context("scoring")?;
    let k = &sim.kpis;
    Ok(SessionRecord {
        mos_x100: encode_mos(mos_from_scores(&scores)).context("encoding MOS")?,
        loss_x100: scale(k.packet_loss_pct),
        jitter_ms: k.jitter_ms.round() as i64,
        delay_ms: k.delay_ms.round() as i64,
        bitrate_kbps: k.bitrate_kbps.round() as i64,
        throughput_bps: k.throughput_bps.round() as i64,
        rebuffering_ms: stalls.total_ms as i64,
        buffering_ms: (startup_ms + stalls.total_ms) as i64,
        framerate_x100: scale(fps),
        duration_ms: (n_segments as u64 * config.segment_length_s as u64 * 1000) as i64,
        stalling: stalls.to_stalling_string().context("formatting stalls")?,
        vheight: height as i64,
        vwidth: width as i64,
        startup_ms: startup_ms as i64,
        extra: vec![
            ("profile".to_string(), profile.name.clone()),
            ("seed".to_string(), config.seed.to_string()),
        ],
    })
}

/// Writes `n_sessions` rows per profile to `out` (default
/// `<output_dir>/dataset.csv`). The file is a pure function of the profile
/// text, the session count and the configuration.
pub fn cmd_synthesize(
    profile_path: Option<&Path>,
    n_sessions: usize,
    out: Option<&Path>,
    config: &PipelineConfig,
) -> Result<SynthOutcome, CliError> {
    let profile_path = profile_path
        .or(config.profile_path.as_deref())
        .ok_or_else(|| CliError::Usage("synthesize needs a profile file".into()))?;
    require_file(profile_path)?;
    config.validate()?;
    let text = std::fs::read_to_string(profile_path).context("reading profiles")?;
    let profiles =
        parse_profiles(&text).map_err(|e| CliError::Config(format!("{}: {e}", profile_path.display())))?;

    let mut records = Vec::with_capacity(profiles.len() * n_sessions);
    for (p, profile) in profiles.iter().enumerate() {
        for s in 0..n_sessions {
            records.push(synthesize_one(profile, session_index(p, s), config)?);
        }
        log::info!("profile `{}`: {n_sessions} sessions", profile.name);
    }

    let mut bytes = Vec::new();
    write_csv(&mut bytes, &records, &["profile".to_string(), "seed".to_string()]).context("encoding CSV")?;
    let path = out.map_or_else(|| config.output_dir.join("dataset.csv"), Path::to_path_buf);
    write_atomic(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(SynthOutcome {
        path,
        rows: records.len(),
        sha256: sha256_hex(&bytes),
    })
}
