//! Mixing generated records into a base instruction dataset.

use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::seed::{derive_seed, rng, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    #[default]
    Augment,
    Replace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixRecipe {
    pub base: Option<PathBuf>,
    pub ours: Option<PathBuf>,
    pub ratio: f64,
    pub mode: MixMode,
    pub seed: u64,
    /// Shuffle the output; when off, replaced records keep their slots and
    /// added records follow the base.
    pub shuffle: bool,
}

impl Default for MixRecipe {
    fn default() -> Self {
        MixRecipe {
            base: None,
            ours: None,
            ratio: 0.05,
            mode: MixMode::Augment,
            seed: 0,
            shuffle: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MixError {
    #[error("need {needed} of our records, have {available}")]
    InsufficientOurData { needed: usize, available: usize },
    #[error("ratio {0} is not usable for this mode")]
    InvalidRatio(f64),
    #[error("recipe names no {0} dataset")]
    MissingInput(&'static str),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
}

/// Exact accounting of a mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixManifest {
    pub base_count: usize,
    pub ours_available: usize,
    /// round(ratio * base_count).
    pub count: usize,
    pub record_count: usize,
    pub removed_ids: Vec<String>,
    pub added_ids: Vec<String>,
    pub recipe: MixRecipe,
    pub content_hash: String,
}

/// Identifier of a JSONL record: its `id`, else its `qa_id`, else
/// `{source}#{line}`.
pub fn record_id(line: &str, source: &str, index: usize) -> String {
    let v: Option<Value> = serde_json::from_str(line).ok();
    let field = |k: &str| {
        v.as_ref().and_then(|v| v.get(k)).and_then(|x| match x {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
    };
    field("id")
        .or_else(|| field("qa_id"))
        .unwrap_or_else(|| format!("{source}#{index}"))
}

fn sampled(n: usize, amount: usize, seed: u64, purpose: &str) -> Vec<usize> {
    let mut r = rng(derive_seed(&[&seed.to_le_bytes(), purpose.as_bytes()]));
    let mut v = index::sample(&mut r, n, amount).into_vec();
    v.sort_unstable();
    v
}

/// Mixes record lines. Lines are passed through byte for byte.
pub fn mix_records(base: &[String], ours: &[String], recipe: &MixRecipe) -> Result<(Vec<String>, MixManifest), MixError> {
    let r = recipe.ratio;
    let bounded = match recipe.mode {
        MixMode::Augment => r.is_finite() && r >= 0.0,
        MixMode::Replace => (0.0..=1.0).contains(&r),
    };
    if !bounded {
        return Err(MixError::InvalidRatio(r));
    }
    let count = (r * base.len() as f64).round() as usize;
    if ours.len() < count {
        return Err(MixError::InsufficientOurData {
            needed: count,
            available: ours.len(),
        });
    }
    let picked = sampled(ours.len(), count, recipe.seed, "ours");
    let added_ids: Vec<String> = picked.iter().map(|&i| record_id(&ours[i], "ours", i)).collect();
    let mut out: Vec<String> = base.to_vec();
    let mut removed_ids = Vec::new();
    match recipe.mode {
        MixMode::Augment => out.extend(picked.iter().map(|&i| ours[i].clone())),
        MixMode::Replace => {
            let slots = sampled(base.len(), count, recipe.seed, "replace");
            for (&slot, &i) in slots.iter().zip(&picked) {
                removed_ids.push(record_id(&base[slot], "base", slot));
                out[slot] = ours[i].clone();
            }
        }
    }
    if recipe.shuffle {
        out.shuffle(&mut rng(derive_seed(&[&recipe.seed.to_le_bytes(), b"shuffle"])));
    }
    let mut bytes = String::new();
    for l in &out {
        bytes.push_str(l);
        bytes.push('\n');
    }
    let manifest = MixManifest {
        base_count: base.len(),
        ours_available: ours.len(),
        count,
        record_count: out.len(),
        removed_ids,
        added_ids,
        recipe: recipe.clone(),
        content_hash: sha256_hex(bytes.as_bytes()),
    };
    Ok((out, manifest))
}

fn read_lines(path: &Path) -> Result<Vec<String>, MixError> {
    let text = std::fs::read_to_string(path).map_err(|e| MixError::Io(path.to_path_buf(), e))?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect())
}

/// Reads both inputs named by the recipe, mixes them and writes `out` plus
/// `out.manifest.json`.
pub fn mix_datasets(recipe: &MixRecipe, out: &Path) -> Result<MixManifest, MixError> {
    let base = read_lines(recipe.base.as_deref().ok_or(MixError::MissingInput("base"))?)?;
    let ours = read_lines(recipe.ours.as_deref().ok_or(MixError::MissingInput("our"))?)?;
    let (lines, manifest) = mix_records(&base, &ours, recipe)?;
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    std::fs::write(out, text).map_err(|e| MixError::Io(out.to_path_buf(), e))?;
    let m = super::manifest_path(out);
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&m, body).map_err(|e| MixError::Io(m, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn lines(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{{\"id\":\"{prefix}{i}\"}}")).collect()
    }

    #[test]
    fn augment_five_percent() {
        let (out, m) = mix_records(
            &lines("b", 1000),
            &lines("o", 100),
            &MixRecipe {
                ratio: 0.05,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.len(), 1050);
        assert_eq!(m.added_ids.len(), 50);
        assert!(m.removed_ids.is_empty());
    }

    #[test]
    fn replace_twenty_percent_by_id_sets() {
        let base = lines("b", 1000);
        let (out, m) = mix_records(
            &base,
            &lines("o", 500),
            &MixRecipe {
                ratio: 0.2,
                mode: MixMode::Replace,
                seed: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.len(), 1000);
        let got: BTreeSet<String> = out.iter().enumerate().map(|(i, l)| record_id(l, "x", i)).collect();
        let base_ids: BTreeSet<String> = base.iter().enumerate().map(|(i, l)| record_id(l, "x", i)).collect();
        let absent: BTreeSet<_> = base_ids.difference(&got).cloned().collect();
        let present_ours = got.difference(&base_ids).count();
        assert_eq!(absent.len(), 200);
        assert_eq!(present_ours, 200);
        assert_eq!(absent, m.removed_ids.iter().cloned().collect());
    }

    #[test]
    fn zero_ratio_without_shuffle_is_identity() {
        let base = lines("b", 37);
        for mode in [MixMode::Augment, MixMode::Replace] {
            let (out, _) = mix_records(
                &base,
                &[],
                &MixRecipe {
                    ratio: 0.0,
                    mode,
                    shuffle: false,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(out, base);
        }
    }

    #[test]
    fn not_enough_of_ours() {
        let e = mix_records(
            &lines("b", 100),
            &lines("o", 4),
            &MixRecipe {
                ratio: 0.05,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(e, MixError::InsufficientOurData { needed: 5, available: 4 }));
    }
}
