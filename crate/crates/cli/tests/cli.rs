//! The binary against the library: same inputs, byte-identical outputs.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::{Path, PathBuf};
use std::process::Command;

use sgqa::annotate::{read_image_list, run_batch, AnnotateConfig, MockBackend, RelationLibrary, TokenF1};
use sgqa::builder::{
    build_from_recipe, export_conversations, manifest_path, mix_records, read_dataset, stats, to_jsonl, ExportTarget,
    GenerationRecipe, MixMode, MixRecipe,
};
use sgqa::graph::{to_canonical_line, write_corpus, write_corpus_with_rasters};
use sgqa::ingest::{filter_corpus, parse_visual_genome, FilterParams, VgFiles};
use sgqa::lexicon::Normalization;
use sgqa::synth::{synth_corpus, SynthParams};

fn sgqa(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sgqa")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = sgqa(args);
    assert_eq!(code, 0, "sgqa {args:?} failed: {stderr}");
    stdout
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("fixture.jsonl");
    write_corpus_with_rasters(&path, &mut support::fixture()).unwrap();
    path
}

#[test]
fn generate_matches_the_library_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture_corpus(dir.path());
    let config = dir.path().join("recipe.toml");
    std::fs::write(&config, "mode = \"multi\"\nsamples_per_generator = 30\nseed = 4\n[params]\nposition_margin = 0.03\n").unwrap();
    let mut outs = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("qa{jobs}.jsonl"));
        ok(&["--config", s(&config), "--jobs", jobs, "generate", "--corpus", s(&corpus), "--out", s(&out)]);
        outs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);

    let mut recipe: GenerationRecipe = toml::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    recipe.corpus = Some(corpus.clone());
    let lib = build_from_recipe(&recipe).unwrap();
    assert_eq!(outs[0], to_jsonl(&lib.records).into_bytes());
    let m: sgqa::builder::DatasetManifest =
        serde_json::from_str(&std::fs::read_to_string(manifest_path(&dir.path().join("qa1.jsonl"))).unwrap()).unwrap();
    assert_eq!(m, lib.manifest);
}

#[test]
fn overrides_and_flags_reach_the_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture_corpus(dir.path());
    let out = dir.path().join("qa.jsonl");
    ok(&["--seed", "9", "--set", "params.retries=3", "generate", "--corpus", s(&corpus), "--format", "mc", "--out", s(&out)]);
    let lib = build_from_recipe(&GenerationRecipe {
        corpus: Some(corpus),
        seed: 9,
        format: sgqa::builder::FormatPolicy::Mc,
        params: sgqa::builder::GenParamsEcho { retries: 3, ..Default::default() },
        ..Default::default()
    })
    .unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), to_jsonl(&lib.records));
}

#[test]
fn synth_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cli.jsonl");
    ok(&["--seed", "3", "synth", "--count", "12", "--profile", "fuzz", "--out", s(&out)]);
    let lib = dir.path().join("lib.jsonl");
    write_corpus_with_rasters(&lib, &mut synth_corpus(12, 3, "syn", &SynthParams::fuzz())).unwrap();
    let cli_text = std::fs::read_to_string(&out).unwrap().replace("cli_depth/", "");
    let lib_text = std::fs::read_to_string(&lib).unwrap().replace("lib_depth/", "");
    assert_eq!(cli_text, lib_text);
    assert!(ok(&["validate", "--graphs", s(&out)]).ends_with("12 graphs, 0 violations\n"));
}

#[test]
fn ingest_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let vg = dir.path().join("vg");
    std::fs::create_dir(&vg).unwrap();
    support::write_vg_excerpt(&vg, 15, 8);
    let out = dir.path().join("vg.jsonl");
    ok(&["ingest", "--source", "vg", "--input", s(&vg), "--out", s(&out)]);
    let (graphs, _) = parse_visual_genome(&VgFiles::in_dir(&vg), &Normalization::builtin()).unwrap();
    let (kept, _) = filter_corpus(graphs, FilterParams::default());
    let lib = dir.path().join("lib.jsonl");
    write_corpus(&lib, &kept).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&lib).unwrap());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(manifest["graph_count"], kept.len());
}

#[test]
fn mix_export_and_stats_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture_corpus(dir.path());
    let ours = dir.path().join("ours.jsonl");
    ok(&["generate", "--corpus", s(&corpus), "--out", s(&ours)]);
    let base = dir.path().join("base.jsonl");
    let base_lines: Vec<String> = (0..400).map(|i| format!("{{\"id\":\"base-{i}\"}}")).collect();
    std::fs::write(&base, base_lines.join("\n") + "\n").unwrap();

    let mixed = dir.path().join("mixed.jsonl");
    ok(&["--seed", "2", "mix", "--base", s(&base), "--ours", s(&ours), "--ratio", "0.05", "--mode", "replace", "--out", s(&mixed)]);
    let ours_lines: Vec<String> = std::fs::read_to_string(&ours).unwrap().lines().map(str::to_string).collect();
    let recipe = MixRecipe { ratio: 0.05, mode: MixMode::Replace, seed: 2, ..MixRecipe::default() };
    let (lines, manifest) = mix_records(&base_lines, &ours_lines, &recipe).unwrap();
    assert_eq!(std::fs::read_to_string(&mixed).unwrap(), lines.join("\n") + "\n");
    assert_eq!(manifest.count, 20);

    let records = read_dataset(&ours).unwrap();
    let conv = dir.path().join("conv.jsonl");
    ok(&["export", "--input", s(&ours), "--out", s(&conv)]);
    assert_eq!(std::fs::read_to_string(&conv).unwrap(), export_conversations(&records, ExportTarget::SingleTurnVqa).unwrap());

    assert_eq!(ok(&["stats", "--input", s(&ours), "--csv"]), stats(&records).to_csv());
    assert!(ok(&["validate", "--dataset", s(&ours)]).ends_with(&format!("{} records, 0 violations\n", records.len())));
}

#[test]
fn annotate_with_a_script_matches_the_library() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/annotate");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pipeline.jsonl");
    let backend = format!("mock:{}", fixtures.join("script.json").display());
    ok(&["annotate", "--images", s(&fixtures.join("images.jsonl")), "--backend", &backend, "--out", s(&out)]);

    let images = read_image_list(&std::fs::read_to_string(fixtures.join("images.jsonl")).unwrap()).unwrap();
    let mut mock = MockBackend::from_json(&std::fs::read_to_string(fixtures.join("script.json")).unwrap()).unwrap();
    let (graphs, skips) = run_batch(&images, &mut mock, &RelationLibrary::builtin(), &TokenF1, &AnnotateConfig::default());
    let expected: String = graphs.iter().map(|g| to_canonical_line(g) + "\n").collect();
    // the CLI additionally records where each raster was written
    let written = std::fs::read_to_string(&out).unwrap();
    let stripped: String = written
        .lines()
        .map(|l| {
            let mut g = sgqa::graph::parse_graph(l).unwrap();
            g.dense_depth_ref = None;
            to_canonical_line(&g) + "\n"
        })
        .collect();
    assert_eq!(stripped, expected);
    assert_eq!(std::fs::read_to_string(dir.path().join("pipeline.jsonl.skips.jsonl")).unwrap().lines().count(), skips.len());
    assert!(ok(&["validate", "--graphs", s(&out)]).ends_with("7 graphs, 0 violations\n"));
}

#[test]
fn exit_codes_separate_usage_input_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sgqa(&["generate"]).0, 64);
    assert_eq!(sgqa(&["--help"]).0, 0);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "sead = 3\n").unwrap();
    let out = dir.path().join("x.jsonl");
    assert_eq!(sgqa(&["--config", s(&bad), "generate", "--out", s(&out)]).0, 1);
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(sgqa(&["generate", "--corpus", s(&missing), "--out", s(&out)]).0, 2);
    assert_eq!(sgqa(&["annotate", "--images", s(&missing), "--out", s(&out)]).0, 2);
}
