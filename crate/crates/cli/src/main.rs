use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use sgqa::annotate::{self, AnnotateConfig, RelationLibrary, TokenF1};
use sgqa::builder::{
    self, build_from_recipe, export_conversations, manifest_path, mix_datasets, read_dataset, stats, BuildError,
    ExportTarget, GenerationRecipe, MixError, MixRecipe,
};
use sgqa::graph::{read_corpus, validate_graph, write_corpus, write_corpus_with_rasters, GraphIoError};
use sgqa::ingest::{filter_corpus, parse_visual_genome, CorpusManifest, CorpusSource, FilterParams, SkipRecord, VgFiles};
use sgqa::lexicon::Normalization;
use sgqa::synth::{synth_corpus, SynthParams};

const EXIT_INVALID: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "sgqa", version, about = "Build visual instruction data from augmented scene graphs")]
struct Cli {
    /// Recipe file (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Recipe override, `key=value` with dotted keys (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Source {
    Vg,
    Canonical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Short,
    Mc,
    HalfHalf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Augment,
    Replace,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    SingleTurnVqa,
    MultiImageChat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    Fuzz,
    Scale,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Convert Visual Genome or canonical graphs into a filtered canonical corpus.
    Ingest {
        #[arg(long, value_enum)]
        source: Source,
        /// VG directory, or a canonical JSONL file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep every graph regardless of size.
        #[arg(long)]
        no_filter: bool,
    },
    /// Annotate an image list through a backend.
    Annotate {
        /// JSONL of {"id", "width", "height", "uri"?}.
        #[arg(long)]
        images: PathBuf,
        /// `mock`, `mock:<script.json>` or `external:<command>`.
        #[arg(long, default_value = "mock")]
        backend: String,
        #[arg(long)]
        out: PathBuf,
        /// JSON array of canonical predicates.
        #[arg(long)]
        relations: Option<PathBuf>,
        #[arg(long, default_value_t = 0.75)]
        gate: f64,
        #[arg(long, default_value_t = 60)]
        timeout_secs: u64,
        #[arg(long, default_value_t = 2)]
        retries: u32,
    },
    /// Run a generation recipe.
    Generate {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mix generated records into a base dataset.
    Mix {
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        ours: Option<PathBuf>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Keep base order instead of shuffling.
        #[arg(long)]
        no_shuffle: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a dataset to conversation records.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "single-turn-vqa")]
        target: TargetArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a dataset.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a graph corpus or a dataset.
    Validate {
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        graphs: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Write a seeded synthetic corpus.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum, default_value = "scale")]
        profile: Profile,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Io(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Io(_) => EXIT_IO,
            Failure::Usage(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Io(m) | Failure::Usage(m) => f.write_str(m),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn graph_err(e: GraphIoError) -> Failure {
    match e {
        GraphIoError::Io(_) => Failure::Io(e.to_string()),
        _ => Failure::Invalid(e.to_string()),
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Io(..) | BuildError::CorpusUnreadable(GraphIoError::Io(_)) => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<MixError> for Failure {
    fn from(e: MixError) -> Self {
        match e {
            MixError::Io(..) => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_skips(out: &Path, skips: &[SkipRecord]) -> Result<(), Failure> {
    let mut p = out.as_os_str().to_owned();
    p.push(".skips.jsonl");
    let p = PathBuf::from(p);
    let text: String = skips
        .iter()
        .map(|s| serde_json::to_string(s).expect("serializable") + "\n")
        .collect();
    std::fs::write(&p, text).map_err(io_err(&p))
}

/// Parses a `--set` value as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), Failure> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {spec:?}")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut t = table;
    for p in parents {
        t = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Failure::Invalid(format!("override {key:?}: {p} is not a table")))?;
    }
    t.insert(last.to_string(), override_value(raw.trim()));
    Ok(())
}

/// Config file plus overrides, deserialized into `T`. Unknown keys are
/// rejected by `T`.
fn load_config<T: DeserializeOwned>(cli: &Cli, extra: &[(&str, Option<toml::Value>)]) -> Result<T, Failure> {
    let mut table = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for spec in &cli.overrides {
        apply_override(&mut table, spec)?;
    }
    if let Some(s) = cli.seed {
        table.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    for (k, v) in extra {
        if let Some(v) = v {
            table.insert(k.to_string(), v.clone());
        }
    }
    T::deserialize(toml::Value::Table(table)).map_err(|e| Failure::Invalid(format!("recipe: {e}")))
}

fn path_value(p: &Option<PathBuf>) -> Option<toml::Value> {
    p.as_ref().map(|p| toml::Value::String(p.display().to_string()))
}

fn str_value(s: &str) -> Option<toml::Value> {
    Some(toml::Value::String(s.to_string()))
}

fn ingest(source: Source, input: &Path, out: &Path, no_filter: bool) -> Result<(), Failure> {
    let (graphs, mut skips, kind) = match source {
        Source::Vg => {
            let (g, s) = parse_visual_genome(&VgFiles::in_dir(input), &Normalization::builtin())
                .map_err(|e| match e {
                    sgqa::ingest::IngestError::Io(..) => Failure::Io(e.to_string()),
                    _ => Failure::Invalid(e.to_string()),
                })?;
            (g, s, CorpusSource::VisualGenome)
        }
        Source::Canonical => (read_corpus(input, false).map_err(graph_err)?, Vec::new(), CorpusSource::Canonical),
    };
    let filter = (!no_filter).then(FilterParams::default);
    let graphs = match filter {
        Some(f) => {
            let (kept, dropped) = filter_corpus(graphs, f);
            skips.extend(dropped);
            kept
        }
        None => graphs,
    };
    write_corpus(out, &graphs).map_err(graph_err)?;
    let mut m = CorpusManifest::for_file(out, kind).map_err(io_err(out))?;
    m.filter = filter;
    m.skipped = skips.len();
    write_json(&manifest_path(out), &m)?;
    write_skips(out, &skips)?;
    log::info!("{} graphs written, {} skipped", m.graph_count, skips.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn annotate_cmd(
    images: &Path,
    backend: &str,
    out: &Path,
    relations: Option<&Path>,
    gate: f64,
    timeout: Duration,
    retries: u32,
) -> Result<(), Failure> {
    let text = std::fs::read_to_string(images).map_err(io_err(images))?;
    let list = annotate::read_image_list(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", images.display())))?;
    let library = match relations {
        Some(p) => RelationLibrary::load(p).map_err(|e| Failure::Invalid(e.to_string()))?,
        None => RelationLibrary::builtin(),
    };
    let mut backend = annotate::parse_backend(backend, timeout, retries).map_err(|e| Failure::Usage(e.to_string()))?;
    let cfg = AnnotateConfig {
        gate,
        ..Default::default()
    };
    let (mut graphs, skips) = annotate::run_batch(&list, backend.as_mut(), &library, &TokenF1, &cfg);
    write_corpus_with_rasters(out, &mut graphs).map_err(graph_err)?;
    let mut m = CorpusManifest::for_file(out, CorpusSource::Pipeline).map_err(io_err(out))?;
    m.filter = Some(cfg.filter);
    m.skipped = skips.len();
    write_json(&manifest_path(out), &m)?;
    write_skips(out, &skips)
}

fn validate(graphs: Option<&Path>, dataset: Option<&Path>) -> Result<(), Failure> {
    if let Some(p) = graphs {
        let corpus = read_corpus(p, true).map_err(graph_err)?;
        let mut total = 0;
        for g in &corpus {
            for v in validate_graph(g) {
                println!("{}\t{v}", g.image.id);
                total += 1;
            }
        }
        println!("{} graphs, {total} violations", corpus.len());
        return if total == 0 {
            Ok(())
        } else {
            Err(Failure::Invalid(format!("{total} violations")))
        };
    }
    let p = dataset.expect("clap requires one input");
    let records = read_dataset(p)?;
    let mut problems = 0;
    for r in &records {
        if !r.mc_is_sound() {
            println!("{}\tmultiple-choice options are not sound", r.qa_id);
            problems += 1;
        }
    }
    let mp = manifest_path(p);
    if mp.exists() {
        let text = std::fs::read_to_string(&mp).map_err(io_err(&mp))?;
        let m: builder::DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", mp.display())))?;
        let bytes = std::fs::read(p).map_err(io_err(p))?;
        if m.content_hash != sgqa::seed::sha256_hex(&bytes) || m.record_count != records.len() {
            println!("manifest does not match {}", p.display());
            problems += 1;
        }
    }
    println!("{} records, {problems} violations", records.len());
    if problems == 0 {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{problems} violations")))
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Cmd::Ingest {
            source,
            input,
            out,
            no_filter,
        } => ingest(*source, input, out, *no_filter),
        Cmd::Annotate {
            images,
            backend,
            out,
            relations,
            gate,
            timeout_secs,
            retries,
        } => annotate_cmd(
            images,
            backend,
            out,
            relations.as_deref(),
            *gate,
            Duration::from_secs(*timeout_secs),
            *retries,
        ),
        Cmd::Generate { corpus, format, out } => {
            let format = format.map(|f| match f {
                FormatArg::Short => "short",
                FormatArg::Mc => "mc",
                FormatArg::HalfHalf => "half_half",
            });
            let recipe: GenerationRecipe =
                load_config(cli, &[("corpus", path_value(corpus)), ("format", format.and_then(str_value))])?;
            let ds = build_from_recipe(&recipe)?;
            builder::write_dataset(out, &ds)?;
            log::info!(
                "{} records, {} skipped, {} oracle checks",
                ds.manifest.record_count,
                ds.manifest.skipped(),
                ds.manifest.oracle_checked
            );
            Ok(())
        }
        Cmd::Mix {
            base,
            ours,
            ratio,
            mode,
            no_shuffle,
            out,
        } => {
            let mode = mode.map(|m| match m {
                ModeArg::Augment => "augment",
                ModeArg::Replace => "replace",
            });
            let mut recipe: MixRecipe = load_config(
                cli,
                &[
                    ("base", path_value(base)),
                    ("ours", path_value(ours)),
                    ("ratio", ratio.map(toml::Value::Float)),
                    ("mode", mode.and_then(str_value)),
                ],
            )?;
            if *no_shuffle {
                recipe.shuffle = false;
            }
            let m = mix_datasets(&recipe, out)?;
            log::info!("{} records ({} ours)", m.record_count, m.added_ids.len());
            Ok(())
        }
        Cmd::Export { input, target, out } => {
            let records = read_dataset(input)?;
            let target = match target {
                TargetArg::SingleTurnVqa => ExportTarget::SingleTurnVqa,
                TargetArg::MultiImageChat => ExportTarget::MultiImageChat,
            };
            let text = export_conversations(&records, target).map_err(|e| Failure::Invalid(e.to_string()))?;
            std::fs::write(out, text).map_err(io_err(out))
        }
        Cmd::Stats { input, csv, out } => {
            let records = read_dataset(input)?;
            let s = stats(&records);
            let text = if *csv { s.to_csv() } else { s.to_table() };
            match out {
                Some(p) => std::fs::write(p, text).map_err(io_err(p)),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Cmd::Validate { graphs, dataset } => validate(graphs.as_deref(), dataset.as_deref()),
        Cmd::Synth { count, profile, out } => {
            let params = match profile {
                Profile::Fuzz => SynthParams::fuzz(),
                Profile::Scale => SynthParams::default(),
            };
            let mut graphs = synth_corpus(*count, cli.seed.unwrap_or(0), "syn", &params);
            write_corpus_with_rasters(out, &mut graphs).map_err(graph_err)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
