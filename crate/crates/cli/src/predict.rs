use std::path::Path;

use anyhow::Context;
use qoekit_core::features::{FeatureMatrix, FeatureVector, ENGINEERED_FEATURES};
use qoekit_core::learner::load_model;

use crate::{require_file, CliError};

/// The five network KPIs, in dataset units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kpis {
    pub delay_ms: f64,
    pub bitrate_kbps: f64,
    pub jitter_ms: f64,
    pub throughput_bps: f64,
    pub packet_loss_pct: f64,
}

const MISSING: f64 = -1000.0;

/// Predicts MOS for one KPI sample. Inputs get the same treatment as the
/// training rows: a delay of 0 or -1000 or a zero bitrate is rejected,
/// and a jitter of 0 or -1000 becomes 1.
pub fn cmd_predict(model_path: &Path, kpis: Kpis) -> Result<f64, CliError> {
    require_file(model_path)?;
    if kpis.delay_ms == 0.0 || kpis.delay_ms == MISSING || kpis.delay_ms < 0.0 {
        return Err(CliError::Usage(format!(
            "delay {} ms is not usable: rows with a delay of 0 or -1000 are dropped during cleaning, \
             so the model was never trained on such input",
            kpis.delay_ms
        )));
    }
    if kpis.bitrate_kbps <= 0.0 {
        return Err(CliError::Usage(format!(
            "bitrate {} kbps is not usable: rows with a zero bitrate are dropped during cleaning",
            kpis.bitrate_kbps
        )));
    }
    let mut jitter = kpis.jitter_ms;
    if jitter == 0.0 || jitter == MISSING {
        log::warn!("jitter {jitter} ms treated as 1 ms, as in cleaning");
        jitter = 1.0;
    }
    if jitter < 0.0 {
        log::warn!("negative jitter {jitter} ms is outside the training range");
    }
    if !(0.0..=100.0).contains(&kpis.packet_loss_pct) {
        log::warn!("packet loss {}% is outside [0, 100]", kpis.packet_loss_pct);
    }
    if kpis.throughput_bps < 0.0 {
        log::warn!("negative throughput {} bps is outside the training range", kpis.throughput_bps);
    }

    let model = load_model(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let v = FeatureVector::from_kpis(kpis.delay_ms, kpis.bitrate_kbps, jitter, kpis.throughput_bps, kpis.packet_loss_pct);
    let x = FeatureMatrix::new(
        ENGINEERED_FEATURES.iter().map(|s| s.to_string()).collect(),
        vec![v.to_array().to_vec()],
        vec![0.0],
    );
    let pred = model.predict(&x).context("predicting")?;
    if pred.clamped > 0 {
        log::warn!("raw prediction fell outside [1, 5] and was clamped");
    }
    Ok(pred.values[0])
}
