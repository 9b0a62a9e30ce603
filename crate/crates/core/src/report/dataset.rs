//! Line-delimited JSON preference datasets.
//!
//! Each non-blank line is one object:
//! `{"prompt_class": 0, "y_w": [1, 2], "y_l": [3]}`.

use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::policy::{PreferenceExample, VocabSpec};

fn field_error(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Dataset {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn as_index(value: &Value, line: usize, field: &str) -> Result<usize> {
    value
        .as_u64()
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| field_error(line, field, format!("expected a non-negative integer, got {value}")))
}

fn parse_tokens(obj: &serde_json::Map<String, Value>, line: usize, field: &str) -> Result<Vec<usize>> {
    let items = obj
        .get(field)
        .ok_or_else(|| field_error(line, field, "missing"))?
        .as_array()
        .ok_or_else(|| field_error(line, field, "expected an array of token ids"))?;
    if items.is_empty() {
        return Err(field_error(line, field, "response is empty"));
    }
    items.iter().map(|v| as_index(v, line, field)).collect()
}

fn parse_line(text: &str, line: usize) -> Result<PreferenceExample> {
    let value: Value = serde_json::from_str(text).map_err(|e| field_error(line, "<record>", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| field_error(line, "<record>", "expected a JSON object"))?;
    if let Some(key) = obj.keys().find(|k| !matches!(k.as_str(), "prompt_class" | "y_w" | "y_l")) {
        return Err(field_error(line, key, "unknown field"));
    }
    let prompt_class = as_index(
        obj.get("prompt_class").ok_or_else(|| field_error(line, "prompt_class", "missing"))?,
        line,
        "prompt_class",
    )?;
    let y_w = parse_tokens(obj, line, "y_w")?;
    let y_l = parse_tokens(obj, line, "y_l")?;
    if y_w == y_l {
        return Err(field_error(line, "y_l", "identical to y_w"));
    }
    Ok(PreferenceExample { prompt_class, y_w, y_l })
}

/// Parse a whole dataset. Blank lines are skipped; line numbers in errors
/// are 1-based positions in `text`.
pub fn parse_dataset_str(text: &str) -> Result<Vec<PreferenceExample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

pub fn parse_dataset(path: &Path) -> Result<Vec<PreferenceExample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_dataset_str(&text)
}

pub fn serialize_dataset(data: &[PreferenceExample]) -> String {
    let mut out = String::new();
    for ex in data {
        let line = serde_json::json!({
            "prompt_class": ex.prompt_class,
            "y_w": ex.y_w,
            "y_l": ex.y_l,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Check every record against a vocabulary; errors carry the record's
/// 1-based index as the line.
pub fn validate_dataset(data: &[PreferenceExample], spec: &VocabSpec, prompt_classes: usize) -> Result<()> {
    for (i, ex) in data.iter().enumerate() {
        let line = i + 1;
        if ex.prompt_class >= prompt_classes {
            return Err(field_error(line, "prompt_class", format!("must be < {prompt_classes}")));
        }
        for (field, y) in [("y_w", &ex.y_w), ("y_l", &ex.y_l)] {
            if y.len() > spec.max_len {
                return Err(field_error(line, field, format!("length {} exceeds max_len {}", y.len(), spec.max_len)));
            }
            if let Some(t) = y.iter().find(|&&t| t >= spec.vocab_size) {
                return Err(field_error(line, field, format!("token {t} >= vocab_size {}", spec.vocab_size)));
            }
        }
        ex.validate(spec, prompt_classes)
            .map_err(|e| field_error(line, "<record>", e.to_string()))?;
    }
    Ok(())
}
