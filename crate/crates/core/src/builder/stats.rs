use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write;

use serde::Serialize;

use crate::format::{Format, QaPair};
use crate::qgen::Generator;

/// Counts over a dataset. Every registered generator and both formats are
/// always present, so an empty dataset gives an all-zero table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub records: usize,
    pub per_generator: BTreeMap<String, usize>,
    pub formats: BTreeMap<String, usize>,
    pub answer_types: BTreeMap<String, usize>,
    pub images_covered: usize,
    pub mc_unavailable: usize,
    /// Records whose (images, question, answer) already appeared.
    pub duplicates: usize,
}

pub fn stats<'a>(records: impl IntoIterator<Item = &'a QaPair>) -> Stats {
    let mut s = Stats {
        records: 0,
        per_generator: Generator::ALL.iter().map(|g| (g.name().to_string(), 0)).collect(),
        formats: BTreeMap::from([("mc".into(), 0), ("short".into(), 0)]),
        answer_types: BTreeMap::new(),
        images_covered: 0,
        mc_unavailable: 0,
        duplicates: 0,
    };
    let mut images = BTreeSet::new();
    let mut seen = HashSet::new();
    for r in records {
        s.records += 1;
        *s.per_generator.entry(r.generator.clone()).or_default() += 1;
        let f = match r.format_params.format {
            Format::Short => "short",
            Format::Mc => "mc",
        };
        *s.formats.entry(f.into()).or_default() += 1;
        *s.answer_types.entry(r.format_params.answer_type.clone()).or_default() += 1;
        images.extend(r.image_ids.iter().cloned());
        s.mc_unavailable += usize::from(!r.has_mc());
        if !seen.insert((r.image_ids.clone(), r.question.clone(), r.short_answer.clone())) {
            s.duplicates += 1;
        }
    }
    s.images_covered = images.len();
    s
}

impl Stats {
    /// Plain-text table, one `section key count` row per line.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let rows = self.rows();
        let width = rows.iter().map(|(_, k, _)| k.len()).max().unwrap_or(0);
        for (section, key, n) in rows {
            writeln!(out, "{section:<10} {key:<width$} {n:>9}").expect("string write");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,count\n");
        for (section, key, n) in self.rows() {
            writeln!(out, "{section},{key},{n}").expect("string write");
        }
        out
    }

    fn rows(&self) -> Vec<(&'static str, String, usize)> {
        let mut rows = vec![
            ("total", "records".to_string(), self.records),
            ("total", "images".to_string(), self.images_covered),
            ("total", "mc_unavailable".to_string(), self.mc_unavailable),
            ("total", "duplicates".to_string(), self.duplicates),
        ];
        rows.extend(self.formats.iter().map(|(k, v)| ("format", k.clone(), *v)));
        rows.extend(self.answer_types.iter().map(|(k, v)| ("answer", k.clone(), *v)));
        rows.extend(self.per_generator.iter().map(|(k, v)| ("generator", k.clone(), *v)));
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dataset_is_all_zero() {
        let s = stats([]);
        assert_eq!(s.records, 0);
        assert_eq!(s.per_generator.len(), 38);
        assert!(s.per_generator.values().chain(s.formats.values()).all(|&n| n == 0));
        assert!(s.to_table().lines().all(|l| l.trim_end().ends_with(" 0")));
    }
}
