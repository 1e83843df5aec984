use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde_json::Value;

use crate::{require_file, write_atomic, CliError, PipelineConfig};

fn field(doc: &Value, key: &str, path: &Path) -> anyhow::Result<String> {
    match doc.get(key) {
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(Value::Null) if key == "r2" => Ok(String::new()),
        Some(other) => Err(anyhow!("{}: `{key}` should be a number, found {other}", path.display())),
        None => Err(anyhow!("{}: schema mismatch, missing `{key}`", path.display())),
    }
}

/// Merges metrics files into a `model,R2,MSE,RMSE,MAE` table, written to
/// `out` (default `<output_dir>/results_chart.csv`).
pub fn cmd_plot_data(metrics: &[PathBuf], out: Option<&Path>, config: &PipelineConfig) -> Result<(PathBuf, String), CliError> {
    if metrics.is_empty() {
        return Err(CliError::Usage("plot-data needs at least one metrics file".into()));
    }
    let mut table = String::from("model,R2,MSE,RMSE,MAE\n");
    for path in metrics {
        require_file(path)?;
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let model = doc
            .get("model")
            .and_then(Value::as_str)
            .ok_or_else(|| anyhow!("{}: schema mismatch, missing `model`", path.display()))?;
        if model.contains([',', '"', '\n']) {
            return Err(anyhow!("{}: model name `{model}` cannot appear in a CSV cell", path.display()).into());
        }
        let row = [
            field(&doc, "r2", path)?,
            field(&doc, "mse", path)?,
            field(&doc, "rmse", path)?,
            field(&doc, "mae", path)?,
        ];
        table.push_str(&format!("{model},{}\n", row.join(",")));
    }
    let path = out.map_or_else(|| config.output_dir.join("results_chart.csv"), Path::to_path_buf);
    write_atomic(&path, table.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    Ok((path, table))
}
