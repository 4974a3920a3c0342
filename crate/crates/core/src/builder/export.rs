//! Conversation-style export for instruction tuning.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::format::{Format, QaPair};

pub const IMAGE_TOKEN: &str = "<image>";
const LETTERS: [&str; 4] = ["A", "B", "C", "D"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportTarget {
    /// One image token, one image.
    SingleTurnVqa,
    /// One image token per image, in tuple order.
    MultiImageChat,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExportError {
    #[error("record {id}: {reason}")]
    SchemaViolation { id: String, reason: String },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
}

fn violation(id: &str, reason: impl Into<String>) -> ExportError {
    ExportError::SchemaViolation {
        id: id.to_string(),
        reason: reason.into(),
    }
}

fn turns(q: &QaPair, target: ExportTarget) -> Result<(String, String), ExportError> {
    let tokens = match target {
        ExportTarget::SingleTurnVqa => {
            if q.image_ids.len() != 1 {
                return Err(violation(&q.qa_id, format!("{} images in a single-image target", q.image_ids.len())));
            }
            format!("{IMAGE_TOKEN}\n")
        }
        ExportTarget::MultiImageChat => {
            if q.image_ids.is_empty() {
                return Err(violation(&q.qa_id, "no images"));
            }
            format!("{IMAGE_TOKEN}\n").repeat(q.image_ids.len())
        }
    };
    match q.format_params.format {
        Format::Short => Ok((format!("{tokens}{}", q.question), q.short_answer.clone())),
        Format::Mc => {
            if !q.mc_is_sound() || !q.has_mc() {
                return Err(violation(&q.qa_id, "multiple-choice record without a sound option set"));
            }
            let block: Vec<String> = q
                .mc_options
                .iter()
                .zip(LETTERS)
                .map(|(o, l)| format!("{l}. {o}"))
                .collect();
            let idx = q.mc_answer_index.expect("checked above");
            Ok((format!("{tokens}{}\n{}", q.question, block.join("\n")), LETTERS[idx].to_string()))
        }
    }
}

/// One conversation record. The `metadata` field carries the full QA so the
/// mapping can be inverted.
pub fn export_record(q: &QaPair, target: ExportTarget) -> Result<Value, ExportError> {
    let (human, assistant) = turns(q, target)?;
    let mut v = json!({ "id": q.qa_id });
    if q.image_ids.len() == 1 {
        v["image"] = json!(q.image_ids[0]);
    } else {
        v["images"] = json!(q.image_ids);
    }
    v["conversations"] = json!([
        {"from": "human", "value": human},
        {"from": "assistant", "value": assistant},
    ]);
    let mut meta = serde_json::to_value(q).expect("records serialize");
    meta.as_object_mut().expect("object").remove("qa_id");
    v["metadata"] = meta;
    Ok(v)
}

pub fn export_conversations(records: &[QaPair], target: ExportTarget) -> Result<String, ExportError> {
    let mut out = String::new();
    for q in records {
        out.push_str(&export_record(q, target)?.to_string());
        out.push('\n');
    }
    Ok(out)
}

/// Recovers a QA from an exported record, checking the conversation agrees
/// with the metadata.
pub fn import_record(v: &Value, target: ExportTarget) -> Result<QaPair, ExportError> {
    let id = v.get("id").and_then(Value::as_str).unwrap_or("?").to_string();
    let mut meta = v.get("metadata").cloned().ok_or_else(|| violation(&id, "missing metadata"))?;
    meta.as_object_mut()
        .ok_or_else(|| violation(&id, "metadata is not an object"))?
        .insert("qa_id".into(), json!(id));
    let q: QaPair = serde_json::from_value(meta).map_err(|e| violation(&id, e.to_string()))?;
    let expected = export_record(&q, target)?;
    if expected != *v {
        return Err(violation(&id, "conversation does not match its metadata"));
    }
    Ok(q)
}

pub fn import_conversations(text: &str, target: ExportTarget) -> Result<Vec<QaPair>, ExportError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Value = serde_json::from_str(l).map_err(|e| ExportError::Json {
                line: i + 1,
                message: e.to_string(),
            })?;
            import_record(&v, target)
        })
        .collect()
}
