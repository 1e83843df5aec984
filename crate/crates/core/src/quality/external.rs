//! Adapter for an external P.1203 implementation.
//!
//! The tool is run once per call with a command template. Its stdout must be
//! the reference JSON output: either one score object, or an object keyed by
//! input path whose values are score objects. `//` line comments, as they
//! appear in the tool's documentation, are tolerated.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

use serde_json::{json, Map, Value};
use wait_timeout::ChildExt;

use super::{Mode, QualityError, QualityScores, Result, ScorerConfig, SegmentMedia};
use crate::stall::StallReport;

pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(120);

/// Audio bitrate written into Mode 0 input documents; segment metadata does
/// not carry one.
const MODE0_AUDIO_KBPS: f64 = 128.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExternalInput {
    /// Media segment files, passed straight to the tool.
    Segments(Vec<PathBuf>),
    /// A mode-N JSON input specification.
    Spec(PathBuf),
}

impl ExternalInput {
    fn paths(&self) -> Vec<String> {
        match self {
            ExternalInput::Segments(p) => p.iter().map(|p| p.display().to_string()).collect(),
            ExternalInput::Spec(p) => vec![p.display().to_string()],
        }
    }
}

/// Expands `{mode}`, `{use_average}` and `{inputs}` in a whitespace-separated
/// command template. Inputs are appended when `{inputs}` is absent.
pub(crate) fn expand_template(template: &str, config: &ScorerConfig, inputs: &[String]) -> Vec<String> {
    let mut argv = Vec::new();
    let mut placed_inputs = false;
    for token in template.split_whitespace() {
        match token {
            "{inputs}" => {
                argv.extend(inputs.iter().cloned());
                placed_inputs = true;
            }
            "{use_average}" => {
                if config.use_average {
                    argv.push("--use-average".to_string());
                }
            }
            other => argv.push(other.replace("{mode}", &config.mode.as_u8().to_string())),
        }
    }
    if !placed_inputs {
        argv.extend(inputs.iter().cloned());
    }
    argv
}

/// Runs the configured external tool and parses its single session result.
pub fn score_external(input: &ExternalInput, config: &ScorerConfig) -> Result<QualityScores> {
    let template = config
        .external_command
        .as_deref()
        .ok_or(QualityError::NoExternalCommand)?;
    let argv = expand_template(template, config, &input.paths());
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| QualityError::ExternalToolFailure("empty command".into()))?;

    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| QualityError::ExternalToolFailure(format!("spawning `{program}`: {e}")))?;

    // drain pipes on helper threads so a chatty tool cannot block on a full pipe
    let mut stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let out_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        stdout.read_to_end(&mut buf).map(|_| buf)
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let status = match child.wait_timeout(config.timeout) {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(QualityError::ExternalToolFailure(format!(
                "`{program}` timed out after {:?}",
                config.timeout
            )));
        }
        Err(e) => return Err(QualityError::ExternalToolFailure(e.to_string())),
    };
    let stdout = out_reader
        .join()
        .expect("reader thread")
        .map_err(|e| QualityError::ExternalToolFailure(e.to_string()))?;
    let stderr = err_reader.join().expect("reader thread");

    if !status.success() {
        return Err(QualityError::ExternalToolFailure(format!(
            "`{program}` exited with {status}: {}",
            String::from_utf8_lossy(&stderr).trim()
        )));
    }
    let text = String::from_utf8(stdout)
        .map_err(|e| QualityError::SchemaMismatch(format!("output is not UTF-8: {e}")))?;
    let mut entries = parse_scores_document(&text)?;
    if entries.len() != 1 {
        return Err(QualityError::SchemaMismatch(format!(
            "expected one session result, got {}",
            entries.len()
        )));
    }
    Ok(entries.remove(0).1)
}

/// Removes `//` comments that sit outside JSON strings.
fn strip_line_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    let mut in_string = false;
    let mut escaped = false;
    while let Some(c) = chars.next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            '/' if chars.peek() == Some(&'/') => {
                for skipped in chars.by_ref() {
                    if skipped == '\n' {
                        out.push('\n');
                        break;
                    }
                }
            }
            _ => out.push(c),
        }
    }
    out
}

fn scalar(obj: &Map<String, Value>, key: &str) -> Result<f64> {
    obj.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| QualityError::SchemaMismatch(format!("missing numeric `{key}`")))
}

fn series(obj: &Map<String, Value>, key: &str) -> Result<Vec<f64>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| QualityError::SchemaMismatch(format!("non-numeric entry in `{key}`")))
            })
            .collect(),
        Some(_) => Err(QualityError::SchemaMismatch(format!("`{key}` is not an array"))),
    }
}

fn scores_from_object(obj: &Map<String, Value>) -> Result<QualityScores> {
    let mode = match obj.get("mode") {
        Some(v) => {
            let m = v
                .as_i64()
                .ok_or_else(|| QualityError::SchemaMismatch("`mode` is not an integer".into()))?;
            Mode::try_from(m)?
        }
        None => return Err(QualityError::SchemaMismatch("missing `mode`".into())),
    };
    let scores = QualityScores {
        o21: series(obj, "O21")?,
        o22: series(obj, "O22")?,
        o23: scalar(obj, "O23")?,
        o34: series(obj, "O34")?,
        o35: scalar(obj, "O35")?,
        o46: scalar(obj, "O46")?,
        mode,
        stream_id: obj.get("streamId").and_then(Value::as_i64).unwrap_or(0),
    };
    scores.check_range()?;
    Ok(scores)
}

/// Parses the tool's output into `(input key, scores)` pairs in key
/// order. A bare score object is returned under the empty key.
pub fn parse_scores_document(text: &str) -> Result<Vec<(String, QualityScores)>> {
    let value: Value = serde_json::from_str(&strip_line_comments(text))
        .map_err(|e| QualityError::SchemaMismatch(format!("not JSON: {e}")))?;
    let Value::Object(top) = value else {
        return Err(QualityError::SchemaMismatch("top level is not an object".into()));
    };
    if top.contains_key("O46") {
        return Ok(vec![(String::new(), scores_from_object(&top)?)]);
    }
    if top.is_empty() {
        return Err(QualityError::SchemaMismatch("missing `O46`".into()));
    }
    top.iter()
        .map(|(key, v)| match v {
            Value::Object(obj) if obj.contains_key("O46") => {
                Ok((key.clone(), scores_from_object(obj)?))
            }
            Value::Object(_) => Err(QualityError::SchemaMismatch(format!("`{key}` is missing `O46`"))),
            _ => Err(QualityError::SchemaMismatch(format!("`{key}` is not a score object"))),
        })
        .collect()
}

/// Builds a Mode 0 input document (`I11`, `I13`, `I23`, `IGen`) for the
/// reference tool from segment metadata and a stall report.
pub fn mode0_input_document(segments: &[SegmentMedia], stalls: &StallReport, stream_id: i64) -> Value {
    let mut start = 0.0;
    let mut video = Vec::with_capacity(segments.len());
    let mut audio = Vec::with_capacity(segments.len());
    for seg in segments {
        video.push(json!({
            "bitrate": seg.bitrate_kbps,
            "codec": "h264",
            "duration": seg.duration_s,
            "fps": seg.framerate_fps,
            "resolution": format!("{}x{}", seg.width, seg.height),
            "start": start,
        }));
        audio.push(json!({
            "bitrate": MODE0_AUDIO_KBPS,
            "codec": match seg.audio_codec {
                super::AudioCodec::AacLc => "aaclc",
                super::AudioCodec::HeAac => "heaac",
                super::AudioCodec::Mp2 => "mp2",
                super::AudioCodec::Ac3 => "ac3",
            },
            "duration": seg.duration_s,
            "start": start,
        }));
        start += seg.duration_s;
    }
    let stalling: Vec<Value> = stalls
        .events
        .iter()
        .map(|e| json!([e.start_s(), e.duration_s()]))
        .collect();
    json!({
        "I11": { "segments": audio, "streamId": stream_id },
        "I13": { "segments": video, "streamId": stream_id },
        "I23": { "stalling": stalling, "streamId": stream_id },
        "IGen": { "device": "pc", "displaySize": "1920x1080", "viewingDistance": "150cm" },
    })
}
