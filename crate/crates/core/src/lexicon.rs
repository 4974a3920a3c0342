//! Word lists that generators and formatters consult: the attribute-type
//! taxonomy, the synonym table, fallback distractor pools, and the label
//! normalization table used at ingestion. Built-in copies ship with the crate;
//! each can be replaced from a user file.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{what}: {source}")]
    Json {
        what: String,
        #[source]
        source: serde_json::Error,
    },
}

/// The attribute types a typed question can ask about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrType {
    Color,
    Shape,
    Material,
    Size,
    State,
}

impl AttrType {
    pub const ALL: [AttrType; 5] = [
        AttrType::Color,
        AttrType::Shape,
        AttrType::Material,
        AttrType::Size,
        AttrType::State,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttrType::Color => "color",
            AttrType::Shape => "shape",
            AttrType::Material => "material",
            AttrType::Size => "size",
            AttrType::State => "state",
        }
    }
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttrType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        AttrType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown attribute type {s:?}"))
    }
}

/// Attribute word → type. A word belongs to at most one type; the first
/// listing wins.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    by_word: HashMap<String, AttrType>,
    by_type: BTreeMap<AttrType, Vec<String>>,
}

#[derive(Deserialize)]
struct TaxonomyFile {
    #[serde(default)]
    color: Vec<String>,
    #[serde(default)]
    shape: Vec<String>,
    #[serde(default)]
    material: Vec<String>,
    #[serde(default)]
    size: Vec<String>,
    #[serde(default)]
    state: Vec<String>,
}

impl Taxonomy {
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/attribute_taxonomy.json"))
            .expect("built-in taxonomy parses")
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let file: TaxonomyFile = serde_json::from_str(text).map_err(|source| LexiconError::Json {
            what: "attribute taxonomy".into(),
            source,
        })?;
        let mut t = Taxonomy::default();
        for (ty, words) in [
            (AttrType::Color, file.color),
            (AttrType::Shape, file.shape),
            (AttrType::Material, file.material),
            (AttrType::Size, file.size),
            (AttrType::State, file.state),
        ] {
            for w in words {
                let w = w.trim().to_lowercase();
                if !t.by_word.contains_key(&w) {
                    t.by_word.insert(w.clone(), ty);
                    t.by_type.entry(ty).or_default().push(w);
                }
            }
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::from_json(&read(path)?)
    }

    pub fn type_of(&self, attribute: &str) -> Option<AttrType> {
        self.by_word.get(attribute).copied()
    }

    pub fn words(&self, ty: AttrType) -> &[String] {
        self.by_type.get(&ty).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.by_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_word.is_empty()
    }
}

/// Symmetric synonym relation built from groups of interchangeable words.
#[derive(Debug, Clone, Default)]
pub struct Synonyms {
    groups: HashMap<String, Vec<usize>>,
}

#[derive(Deserialize)]
struct SynonymFile {
    groups: Vec<Vec<String>>,
}

impl Synonyms {
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/synonyms.json")).expect("built-in synonyms parse")
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let file: SynonymFile = serde_json::from_str(text).map_err(|source| LexiconError::Json {
            what: "synonyms".into(),
            source,
        })?;
        let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, g) in file.groups.iter().enumerate() {
            for w in g {
                groups.entry(w.to_lowercase()).or_default().push(i);
            }
        }
        Ok(Synonyms { groups })
    }

    /// True when `a` and `b` are the same word or share a synonym group.
    pub fn equivalent(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        match (self.groups.get(a), self.groups.get(b)) {
            (Some(ga), Some(gb)) => ga.iter().any(|g| gb.contains(g)),
            _ => false,
        }
    }
}

/// Global fallback pools used to pad distractor sets.
#[derive(Debug, Clone)]
pub struct Pools {
    pub labels: Vec<String>,
    pub predicates: Vec<String>,
}

impl Pools {
    pub fn builtin() -> Self {
        let labels: Vec<String> =
            serde_json::from_str(include_str!("../data/label_pool.json")).expect("label pool parses");
        let predicates: Vec<String> = serde_json::from_str(include_str!("../data/predicate_pool.json"))
            .expect("predicate pool parses");
        Pools { labels, predicates }
    }
}

/// Spelling merges applied to labels, attributes and predicates at ingestion.
#[derive(Debug, Clone, Default)]
pub struct Normalization {
    merge: HashMap<String, String>,
}

#[derive(Deserialize)]
struct NormalizationFile {
    merge: HashMap<String, String>,
}

impl Normalization {
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/normalization.json"))
            .expect("built-in normalization parses")
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let file: NormalizationFile =
            serde_json::from_str(text).map_err(|source| LexiconError::Json {
                what: "normalization table".into(),
                source,
            })?;
        Ok(Normalization {
            merge: file
                .merge
                .into_iter()
                .map(|(k, v)| (normalize_text(&k), normalize_text(&v)))
                .collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::from_json(&read(path)?)
    }

    /// Lowercases, collapses whitespace, then applies the merge table.
    pub fn apply(&self, raw: &str) -> String {
        let s = normalize_text(raw);
        match self.merge.get(&s) {
            Some(m) => m.clone(),
            None => s,
        }
    }
}

pub fn normalize_text(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn read(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}
