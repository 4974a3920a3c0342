//! Generation recipes, dataset assembly, mixing, export and statistics.

mod export;
mod mix;
mod stats;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::{assemble, Assembly, Format, FormatError, Lexicon, QaPair, TemplateLibrary};
use crate::graph::{read_corpus, GraphIoError, SceneGraph};
use crate::lexicon::{LexiconError, Taxonomy};
use crate::oracle::{self, Mismatch};
use crate::qgen::{AnswerStyle, GenContext, GenError, GenOutcome, GenParams, Generator};
use crate::seed::{derive_seed, qa_seed, rng, sha256_hex, substream};

pub use export::{export_conversations, export_record, import_conversations, import_record, ExportError, ExportTarget};
pub use mix::{mix_datasets, mix_records, record_id, MixError, MixManifest, MixMode, MixRecipe};
pub use stats::{stats, Stats};

/// Multi-mode attempts allowed per requested QA.
pub const TUPLE_BUDGET_FACTOR: u64 = 10;
const MULTI_BATCH: u64 = 1024;

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("corpus unreadable: {0}")]
    CorpusUnreadable(#[from] GraphIoError),
    #[error("registry mismatch: {0}")]
    RegistryMismatch(String),
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("oracle re-check failed: {0}")]
    Oracle(#[from] Mismatch),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("{path}:{line}: {source}")]
    Record {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Single,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatPolicy {
    Short,
    Mc,
    #[default]
    HalfHalf,
}

/// Everything that determines a generated dataset, given the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationRecipe {
    pub corpus: Option<PathBuf>,
    /// Generator names; empty means every generator of the mode.
    pub generators: Vec<String>,
    pub mode: Mode,
    pub samples_per_image_per_generator: u64,
    pub samples_per_generator: u64,
    pub tuple_size: usize,
    pub format: FormatPolicy,
    pub seed: u64,
    pub answer_style: AnswerStyle,
    pub params: GenParamsEcho,
    /// Fraction of emitted QAs re-derived by the oracle during the build.
    pub verify_fraction: f64,
    pub templates: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
}

/// Generator parameters as they appear in recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParamsEcho {
    pub position_margin: f64,
    pub depth_margin: f64,
    pub retries: u32,
    pub search_retries: u32,
}

impl Default for GenParamsEcho {
    fn default() -> Self {
        GenParamsEcho::from(&GenParams::default())
    }
}

impl From<&GenParams> for GenParamsEcho {
    fn from(p: &GenParams) -> Self {
        GenParamsEcho {
            position_margin: p.position_margin,
            depth_margin: p.depth_margin,
            retries: p.retries,
            search_retries: p.search_retries,
        }
    }
}

impl From<&GenParamsEcho> for GenParams {
    fn from(p: &GenParamsEcho) -> Self {
        GenParams {
            position_margin: p.position_margin,
            depth_margin: p.depth_margin,
            retries: p.retries,
            search_retries: p.search_retries,
        }
    }
}

impl Default for GenerationRecipe {
    fn default() -> Self {
        GenerationRecipe {
            corpus: None,
            generators: Vec::new(),
            mode: Mode::Single,
            samples_per_image_per_generator: 1,
            samples_per_generator: 100_000,
            tuple_size: 2,
            format: FormatPolicy::HalfHalf,
            seed: 0,
            answer_style: AnswerStyle::Digits,
            params: GenParamsEcho::default(),
            verify_fraction: 0.01,
            templates: None,
            taxonomy: None,
        }
    }
}

impl GenerationRecipe {
    /// The allowlisted generators in registry order.
    pub fn resolve_generators(&self) -> Result<Vec<Generator>, BuildError> {
        let wanted_multi = self.mode == Mode::Multi;
        if self.generators.is_empty() {
            return Ok(Generator::ALL.iter().copied().filter(|g| g.is_multi() == wanted_multi).collect());
        }
        let mut out = Vec::new();
        for name in &self.generators {
            let g = Generator::from_name(name)
                .ok_or_else(|| BuildError::RegistryMismatch(format!("unknown generator {name:?}")))?;
            if g.is_multi() != wanted_multi {
                return Err(BuildError::RegistryMismatch(format!(
                    "{name} does not run in {:?} mode",
                    self.mode
                )));
            }
            if !out.contains(&g) {
                out.push(g);
            }
        }
        out.sort_by_key(|g| Generator::ALL.iter().position(|x| x == g));
        Ok(out)
    }

    fn check(&self) -> Result<(), BuildError> {
        if self.mode == Mode::Multi && !(2..=4).contains(&self.tuple_size) {
            return Err(BuildError::InvalidRecipe(format!("tuple_size {} is outside 2..=4", self.tuple_size)));
        }
        if !(0.0..=1.0).contains(&self.verify_fraction) {
            return Err(BuildError::InvalidRecipe(format!("verify_fraction {} is outside [0, 1]", self.verify_fraction)));
        }
        Ok(())
    }
}

/// Templates and word lists used by a build.
#[derive(Debug, Clone)]
pub struct Resources {
    pub templates: TemplateLibrary,
    pub lexicon: Lexicon,
}

impl Default for Resources {
    fn default() -> Self {
        Resources {
            templates: TemplateLibrary::builtin(),
            lexicon: Lexicon::default(),
        }
    }
}

impl Resources {
    /// Bundled resources, replaced by any files the recipe names.
    pub fn for_recipe(recipe: &GenerationRecipe) -> Result<Self, BuildError> {
        let mut r = Resources::default();
        if let Some(p) = &recipe.templates {
            r.templates = TemplateLibrary::load(p)?;
        }
        if let Some(p) = &recipe.taxonomy {
            r.lexicon.taxonomy = Some(Arc::new(Taxonomy::load(p)?));
        }
        Ok(r)
    }
}

/// Summary written next to every dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub record_count: usize,
    pub per_generator: BTreeMap<String, usize>,
    /// Skip counts by reason.
    pub skip_histogram: BTreeMap<String, usize>,
    pub skips_by_generator: BTreeMap<String, BTreeMap<String, usize>>,
    /// Generator invocations, emitted plus skipped.
    pub attempts: usize,
    pub formats: BTreeMap<String, usize>,
    /// Records left without a multiple-choice form.
    pub mc_unavailable: usize,
    pub oracle_checked: usize,
    pub graph_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_hash: Option<String>,
    pub recipe: GenerationRecipe,
    /// SHA-256 of the JSONL bytes.
    pub content_hash: String,
}

impl DatasetManifest {
    pub fn skipped(&self) -> usize {
        self.skip_histogram.values().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<QaPair>,
    pub manifest: DatasetManifest,
}

/// One line per record, each terminated by a newline.
pub fn to_jsonl<'a>(records: impl IntoIterator<Item = &'a QaPair>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn read_dataset(path: &Path) -> Result<Vec<QaPair>, BuildError> {
    let text = std::fs::read_to_string(path).map_err(|e| BuildError::Io(path.to_path_buf(), e))?;
    parse_dataset(&text).map_err(|(line, source)| BuildError::Record {
        path: path.to_path_buf(),
        line,
        source,
    })
}

/// Parses JSONL records; errors carry the 1-based line number.
pub fn parse_dataset(text: &str) -> Result<Vec<QaPair>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

/// Manifest path for a dataset file: `out.jsonl` -> `out.jsonl.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes the JSONL file and its manifest.
pub fn write_dataset(out: &Path, dataset: &Dataset) -> Result<(), BuildError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| BuildError::Io(p, e)
    };
    std::fs::write(out, to_jsonl(&dataset.records)).map_err(io(out))?;
    let m = manifest_path(out);
    let text = serde_json::to_string_pretty(&dataset.manifest).expect("manifest serializes");
    std::fs::write(&m, text + "\n").map_err(io(&m))
}

enum Attempt {
    Emitted(QaPair, bool),
    Skipped(&'static str),
}

struct Job<'a> {
    recipe: &'a GenerationRecipe,
    res: &'a Resources,
    ctx: GenContext,
    params: GenParams,
}

impl Job<'_> {
    fn attempt(&self, g: Generator, graphs: &[&SceneGraph], sample_index: u64) -> Result<Attempt, BuildError> {
        let ids: Vec<&str> = graphs.iter().map(|x| x.image.id.as_str()).collect();
        let seed = qa_seed(self.recipe.seed, &ids, g.name(), sample_index);
        let draft = match g.run(&self.ctx, graphs, &mut substream(seed, "generate"))? {
            GenOutcome::Qa(d) => d,
            GenOutcome::Skip(r) => return Ok(Attempt::Skipped(r.name())),
        };
        let checked = substream(seed, "verify").random::<f64>() < self.recipe.verify_fraction;
        if checked {
            oracle::verify(&draft, graphs, &self.ctx)?;
        }
        let qa = assemble(
            &self.res.templates,
            &self.res.lexicon,
            &draft,
            Assembly {
                corpus_seed: self.recipe.seed,
                sample_index,
                graphs,
                params: &self.params,
                style: self.recipe.answer_style,
                format: Format::Short,
            },
        )?;
        Ok(Attempt::Emitted(qa, checked))
    }
}

#[derive(Default)]
struct Tally {
    records: Vec<QaPair>,
    skips: BTreeMap<(Generator, &'static str), usize>,
    attempts: usize,
    checked: usize,
}

impl Tally {
    fn add(&mut self, g: Generator, a: Attempt) {
        self.attempts += 1;
        match a {
            Attempt::Emitted(q, checked) => {
                self.checked += usize::from(checked);
                self.records.push(q);
            }
            Attempt::Skipped(r) => *self.skips.entry((g, r)).or_default() += 1,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.records.extend(other.records);
        for (k, v) in other.skips {
            *self.skips.entry(k).or_default() += v;
        }
        self.attempts += other.attempts;
        self.checked += other.checked;
        self
    }
}

/// Picks k distinct graphs for attempt `t` of generator `g`.
fn tuple_for<'a>(graphs: &[&'a SceneGraph], k: usize, seed: u64, g: Generator, t: u64) -> Vec<&'a SceneGraph> {
    let mut r = rng(derive_seed(&[&seed.to_le_bytes(), b"tuple", g.name().as_bytes(), &t.to_le_bytes()]));
    rand::seq::index::sample(&mut r, graphs.len(), k)
        .into_iter()
        .map(|i| graphs[i])
        .collect()
}

fn run_single(job: &Job, graphs: &[&SceneGraph], gens: &[Generator]) -> Result<Tally, BuildError> {
    let n = job.recipe.samples_per_image_per_generator;
    graphs
        .par_iter()
        .map(|graph| {
            let mut t = Tally::default();
            for &g in gens {
                for s in 0..n {
                    t.add(g, job.attempt(g, &[*graph], s)?);
                }
            }
            Ok(t)
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
}

fn run_multi(job: &Job, graphs: &[&SceneGraph], gens: &[Generator]) -> Result<Tally, BuildError> {
    let target = job.recipe.samples_per_generator;
    let budget = target * TUPLE_BUDGET_FACTOR;
    let k = job.recipe.tuple_size;
    let mut total = Tally::default();
    for &g in gens {
        let mut t = Tally::default();
        if graphs.len() < k {
            t.attempts = budget as usize;
            t.skips.insert((g, "CorpusTooSmall"), budget as usize);
            total = total.merge(t);
            continue;
        }
        let mut emitted = 0u64;
        let mut next = 0u64;
        while emitted < target && next < budget {
            let end = (next + MULTI_BATCH.max(2 * (target - emitted))).min(budget);
            let batch: Vec<Attempt> = (next..end)
                .into_par_iter()
                .map(|i| job.attempt(g, &tuple_for(graphs, k, job.recipe.seed, g, i), i))
                .collect::<Result<_, _>>()?;
            for a in batch {
                if emitted == target {
                    break;
                }
                emitted += u64::from(matches!(a, Attempt::Emitted(..)));
                t.add(g, a);
            }
            next = end;
        }
        total = total.merge(t);
    }
    Ok(total)
}

/// Assigns formats. Half-half gives each generator a seeded, exactly
/// balanced split among records that have a multiple-choice form.
fn assign_formats(records: &mut [QaPair], policy: FormatPolicy, seed: u64) {
    let mut by_gen: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_gen.entry(r.generator.clone()).or_default().push(i);
    }
    for (name, mut idx) in by_gen {
        let want_mc = match policy {
            FormatPolicy::Short => 0,
            FormatPolicy::Mc => idx.len(),
            FormatPolicy::HalfHalf => idx.len() / 2,
        };
        idx.shuffle(&mut rng(derive_seed(&[&seed.to_le_bytes(), b"format", name.as_bytes()])));
        let mut mc = 0;
        for i in idx {
            let r = &mut records[i];
            r.format_params.format = if mc < want_mc && r.has_mc() {
                mc += 1;
                Format::Mc
            } else {
                Format::Short
            };
        }
        if policy == FormatPolicy::HalfHalf && mc < want_mc {
            log::warn!("{name}: only {mc} of {want_mc} multiple-choice slots could be filled");
        }
    }
}

fn sort_key(r: &QaPair) -> (&[String], &str, u64) {
    (&r.image_ids, &r.generator, r.format_params.sample_index)
}

/// Runs a recipe over in-memory graphs. The result depends only on the
/// graphs (in any order) and the recipe, never on the thread count.
pub fn build_dataset(recipe: &GenerationRecipe, graphs: &[SceneGraph], res: &Resources) -> Result<Dataset, BuildError> {
    recipe.check()?;
    let gens = recipe.resolve_generators()?;
    let mut sorted: Vec<&SceneGraph> = graphs.iter().collect();
    sorted.sort_by(|a, b| a.image.id.cmp(&b.image.id));
    let params = GenParams::from(&recipe.params);
    let job = Job {
        recipe,
        res,
        ctx: GenContext::new(params.clone(), res.lexicon.taxonomy.clone()),
        params,
    };
    let mut tally = match recipe.mode {
        Mode::Single => run_single(&job, &sorted, &gens)?,
        Mode::Multi => run_multi(&job, &sorted, &gens)?,
    };
    tally.records.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    assign_formats(&mut tally.records, recipe.format, recipe.seed);

    let mut per_generator: BTreeMap<String, usize> = gens.iter().map(|g| (g.name().to_string(), 0)).collect();
    let mut formats: BTreeMap<String, usize> = BTreeMap::from([("short".into(), 0), ("mc".into(), 0)]);
    for r in &tally.records {
        *per_generator.entry(r.generator.clone()).or_default() += 1;
        let f = match r.format_params.format {
            Format::Short => "short",
            Format::Mc => "mc",
        };
        *formats.entry(f.into()).or_default() += 1;
    }
    let mut skip_histogram = BTreeMap::new();
    let mut skips_by_generator: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for ((g, reason), n) in &tally.skips {
        *skip_histogram.entry(reason.to_string()).or_default() += n;
        *skips_by_generator
            .entry(g.name().to_string())
            .or_default()
            .entry(reason.to_string())
            .or_default() += n;
    }
    let content_hash = sha256_hex(to_jsonl(&tally.records).as_bytes());
    let manifest = DatasetManifest {
        record_count: tally.records.len(),
        per_generator,
        skip_histogram,
        skips_by_generator,
        attempts: tally.attempts,
        formats,
        mc_unavailable: tally.records.iter().filter(|r| !r.has_mc()).count(),
        oracle_checked: tally.checked,
        graph_count: graphs.len(),
        corpus_hash: None,
        recipe: recipe.clone(),
        content_hash,
    };
    Ok(Dataset {
        records: tally.records,
        manifest,
    })
}

/// Loads the recipe's corpus and resources, then builds.
pub fn build_from_recipe(recipe: &GenerationRecipe) -> Result<Dataset, BuildError> {
    let path = recipe
        .corpus
        .as_deref()
        .ok_or_else(|| BuildError::InvalidRecipe("no corpus given".into()))?;
    let bytes = std::fs::read(path).map_err(|e| BuildError::CorpusUnreadable(GraphIoError::Io(e)))?;
    let graphs = read_corpus(path, true)?;
    let res = Resources::for_recipe(recipe)?;
    let mut ds = build_dataset(recipe, &graphs, &res)?;
    ds.manifest.corpus_hash = Some(sha256_hex(&bytes));
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_corpus, SynthParams};

    fn recipe() -> GenerationRecipe {
        GenerationRecipe {
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn empty_corpus_gives_empty_dataset() {
        let ds = build_dataset(&recipe(), &[], &Resources::default()).unwrap();
        assert_eq!(ds.manifest.record_count, 0);
        assert_eq!(ds.manifest.attempts, 0);
        assert!(ds.manifest.per_generator.values().all(|&n| n == 0));
        assert_eq!(ds.manifest.content_hash, sha256_hex(b""));
    }

    #[test]
    fn shortfall_equals_skips() {
        let graphs = synth_corpus(12, 3, "img", &SynthParams::fuzz());
        let ds = build_dataset(&recipe(), &graphs, &Resources::default()).unwrap();
        let m = &ds.manifest;
        assert_eq!(m.attempts, 12 * 24);
        assert_eq!(m.record_count + m.skipped(), m.attempts);
        assert_eq!(m.per_generator.values().sum::<usize>(), m.record_count);
    }

    #[test]
    fn order_of_input_graphs_is_irrelevant() {
        let mut graphs = synth_corpus(8, 5, "img", &SynthParams::fuzz());
        let a = build_dataset(&recipe(), &graphs, &Resources::default()).unwrap();
        graphs.reverse();
        let b = build_dataset(&recipe(), &graphs, &Resources::default()).unwrap();
        assert_eq!(a.manifest.content_hash, b.manifest.content_hash);
    }

    #[test]
    fn half_half_balances_each_generator() {
        let graphs = synth_corpus(30, 9, "img", &SynthParams::fuzz());
        let ds = build_dataset(&recipe(), &graphs, &Resources::default()).unwrap();
        let mut split: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for r in &ds.records {
            let e = split.entry(&r.generator).or_default();
            match r.format_params.format {
                Format::Short => e.0 += 1,
                Format::Mc => e.1 += 1,
            }
        }
        for (g, (s, m)) in split {
            let all_mc = ds.records.iter().filter(|r| r.generator == g).all(QaPair::has_mc);
            if all_mc {
                assert!(s.abs_diff(m) <= 1, "{g}: {s}/{m}");
            }
        }
    }

    #[test]
    fn multi_mode_meets_target_or_exhausts_budget() {
        let graphs = synth_corpus(10, 1, "img", &SynthParams::fuzz());
        let r = GenerationRecipe {
            mode: Mode::Multi,
            samples_per_generator: 20,
            ..recipe()
        };
        let ds = build_dataset(&r, &graphs, &Resources::default()).unwrap();
        for (name, &n) in &ds.manifest.per_generator {
            let skipped: usize = ds.manifest.skips_by_generator.get(name).map_or(0, |m| m.values().sum());
            assert!(n == 20 || n + skipped == 200, "{name}: {n} + {skipped}");
        }
        assert!(ds.records.iter().all(|q| q.image_ids.len() == 2));
    }

    #[test]
    fn registry_mismatch() {
        let r = GenerationRecipe {
            generators: vec!["CountObjectMultiGenerator".into()],
            ..recipe()
        };
        assert!(matches!(r.resolve_generators(), Err(BuildError::RegistryMismatch(_))));
        let r = GenerationRecipe {
            generators: vec!["Nope".into()],
            ..recipe()
        };
        assert!(matches!(r.resolve_generators(), Err(BuildError::RegistryMismatch(_))));
    }
}
