//! Baseline versus enhanced training run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use qoekit_core::dataset::{clean, load_csv, Provenance, RowPolicy};
use qoekit_core::features::{engineer, split, FeatureMatrix, BASE_FEATURES};
use qoekit_core::learner::{evaluate, fit_forest, ForestParams, fit_linear, min_max_normalize, save_model, EvalMetrics, Model};
use serde::{Deserialize, Serialize};

use crate::{require_file, write_atomic, CliError, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub mae: f64,
}

/// Contents of one metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub features: Vec<String>,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub mse: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub mae: f64,
    /// Test predictions clamped into [1, 5].
    pub clamped: usize,
    /// The same metrics with MOS mapped onto [0, 1].
    pub normalized: NormalizedMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub baseline: MetricsReport,
    pub enhanced: MetricsReport,
    pub provenance: Provenance,
    pub report: String,
    pub model_paths: [PathBuf; 2],
    pub metrics_paths: [PathBuf; 2],
}

fn assess(model: &Model, test: &FeatureMatrix, train_rows: usize, seed: u64) -> anyhow::Result<MetricsReport> {
    let pred = model.predict(test)?;
    let m: EvalMetrics = evaluate(&pred.values, &test.target)?;
    let n: EvalMetrics = evaluate(&min_max_normalize(&pred.values), &min_max_normalize(&test.target))?;
    Ok(MetricsReport {
        model: model.name().to_string(),
        features: model.feature_names().to_vec(),
        seed,
        train_rows,
        test_rows: test.len(),
        mse: m.mse,
        rmse: m.rmse,
        r2: m.r2,
        mae: m.mae,
        clamped: pred.clamped,
        normalized: NormalizedMetrics {
            mse: n.mse,
            rmse: n.rmse,
            r2: n.r2,
            mae: n.mae,
        },
    })
}

fn fmt_r2(r2: Option<f64>) -> String {
    r2.map_or_else(|| "undefined (constant target)".to_string(), |v| format!("{v:.4}"))
}

fn render_report(base: &MetricsReport, enh: &MetricsReport, prov: &Provenance) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "rows: loaded {}, dropped (delay) {}, dropped (bitrate) {}, jitter adjusted {}, retained {}",
        prov.loaded,
        prov.dropped_delay,
        prov.dropped_bitrate,
        prov.jitter_adjusted,
        prov.retained()
    );
    let _ = writeln!(s, "split: {} train / {} test, seed {}", base.train_rows, base.test_rows, base.seed);
    let _ = writeln!(s);
    let _ = writeln!(s, "Baseline model ({}, {} features):", base.model, base.features.len());
    let _ = writeln!(s, "  Old MSE: {:.4e}", base.mse);
    let _ = writeln!(s, "  Old RMSE: {:.4}", base.rmse);
    let _ = writeln!(s, "  R-squared: {}", fmt_r2(base.r2));
    let _ = writeln!(s, "  MAE: {:.4}", base.mae);
    let _ = writeln!(s);
    let _ = writeln!(s, "Enhanced model ({}, {} features):", enh.model, enh.features.len());
    let _ = writeln!(s, "  New MSE: {:.4e}", enh.mse);
    let _ = writeln!(s, "  New RMSE: {:.4}", enh.rmse);
    let _ = writeln!(s, "  R-squared: {}", fmt_r2(enh.r2));
    let _ = writeln!(s, "  MAE: {:.4}", enh.mae);
    let _ = writeln!(s);
    let _ = writeln!(s, "On MOS normalized to [0, 1]:");
    for r in [base, enh] {
        let _ = writeln!(
            s,
            "  {}: MSE {:.4e}, RMSE {:.4}, MAE {:.4}",
            r.model, r.normalized.mse, r.normalized.rmse, r.normalized.mae
        );
    }
    s
}

/// Cleans, engineers and splits the dataset, then fits the linear baseline
/// on the five base KPIs and the forest on all engineered features.
pub fn cmd_train(dataset_path: Option<&Path>, config: &PipelineConfig) -> Result<TrainOutcome, CliError> {
    let path = dataset_path
        .or(config.dataset_path.as_deref())
        .ok_or_else(|| CliError::Usage("train needs a dataset file".into()))?;
    require_file(path)?;
    config.validate()?;

    let loaded = load_csv(path, RowPolicy::Fatal).with_context(|| format!("loading {}", path.display()))?;
    let cleaned = clean(&loaded.records);
    let matrix = engineer(&cleaned).context("engineering features")?;
    let (train, test) = split(&matrix, config.test_fraction, config.seed).context("splitting")?;
    log::info!("training on {} rows, testing on {}", train.len(), test.len());

    let base_train = train.select(&BASE_FEATURES).context("selecting base features")?;
    let linear = Model::Linear(fit_linear(&base_train, config.ridge).context("fitting linear baseline")?);
    let forest_params = ForestParams {
        seed: config.seed,
        ..config.forest
    };
    let forest = Model::Forest(fit_forest(&train, &forest_params).context("fitting forest")?);

    let baseline = assess(&linear, &test, train.len(), config.seed)?;
    let enhanced = assess(&forest, &test, train.len(), config.seed)?;
    let report = render_report(&baseline, &enhanced, &cleaned.provenance);

    let out = &config.output_dir;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let model_paths = [out.join("model_linear.json"), out.join("model_forest.bin")];
    save_model(&model_paths[0], &linear).context("saving linear model")?;
    save_model(&model_paths[1], &forest).context("saving forest")?;
    let metrics_paths = [out.join("metrics_linear.json"), out.join("metrics_forest.json")];
    for (p, m) in metrics_paths.iter().zip([&baseline, &enhanced]) {
        let mut bytes = serde_json::to_vec_pretty(m).context("encoding metrics")?;
        bytes.push(b'\n');
        write_atomic(p, &bytes).with_context(|| format!("writing {}", p.display()))?;
    }
    write_atomic(&out.join("report.txt"), report.as_bytes()).context("writing report")?;

    Ok(TrainOutcome {
        baseline,
        enhanced,
        provenance: cleaned.provenance,
        report,
        model_paths,
        metrics_paths,
    })
}
