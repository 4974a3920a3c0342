use std::collections::BTreeSet;
use std::sync::OnceLock;

use proptest::prelude::*;
use sgqa::annotate::{ground_relation, RelationLibrary, Scorer, TokenF1};
use sgqa::builder::{record_id, mix_records, MixError, MixMode, MixRecipe};
use sgqa::format::{assemble, Assembly, Format, Lexicon, TemplateLibrary};
use sgqa::graph::{object_depth, parse_graph, to_canonical_line, validate_graph, SceneGraph};
use sgqa::lexicon::{Pools, Taxonomy};
use sgqa::oracle;
use sgqa::qgen::{Answer, AnswerStyle, Draft, GenContext, GenOutcome, GenParams, Generator, Probe};
use sgqa::seed::rng;
use sgqa::synth::{synth_graph, SynthParams};

fn vocab() -> &'static (Taxonomy, Pools) {
    static V: OnceLock<(Taxonomy, Pools)> = OnceLock::new();
    V.get_or_init(|| (Taxonomy::builtin(), Pools::builtin()))
}

fn fuzz_graph(seed: u64, id: &str) -> SceneGraph {
    let (tax, pools) = vocab();
    synth_graph(id, &SynthParams::fuzz(), tax, pools, &mut rng(seed))
}

fn tuple(seed: u64, k: usize) -> Vec<SceneGraph> {
    (0..k).map(|i| fuzz_graph(seed.wrapping_add(i as u64 * 7919), &format!("t{i}"))).collect()
}

fn resources() -> &'static (TemplateLibrary, Lexicon) {
    static R: OnceLock<(TemplateLibrary, Lexicon)> = OnceLock::new();
    R.get_or_init(|| (TemplateLibrary::builtin(), Lexicon::default()))
}

fn inputs(g: Generator, graph_seed: u64, k: usize) -> Vec<SceneGraph> {
    if g.is_multi() {
        tuple(graph_seed, k)
    } else {
        vec![fuzz_graph(graph_seed, "g")]
    }
}

fn any_generator() -> impl Strategy<Value = Generator> {
    (0..Generator::ALL.len()).prop_map(|i| Generator::ALL[i])
}

fn ctx_with(position_margin: f64, depth_margin: f64) -> GenContext {
    GenContext {
        params: GenParams {
            position_margin,
            depth_margin,
            ..GenParams::default()
        },
        ..GenContext::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(384))]

    #[test]
    fn emitted_answers_survive_the_oracle(g in any_generator(), gs in any::<u64>(), s in any::<u64>(), k in 2usize..=4) {
        let ctx = GenContext::default();
        let graphs = inputs(g, gs, k);
        let refs: Vec<&SceneGraph> = graphs.iter().collect();
        if let GenOutcome::Qa(d) = g.run(&ctx, &refs, &mut rng(s)).unwrap() {
            prop_assert_eq!(oracle::verify(&d, &refs, &ctx), Ok(()));
        }
    }

    #[test]
    fn generation_is_a_function_of_graph_and_seed(g in any_generator(), gs in any::<u64>(), s in any::<u64>()) {
        let ctx = GenContext::default();
        let graphs = inputs(g, gs, 2);
        let refs: Vec<&SceneGraph> = graphs.iter().collect();
        let a = g.run(&ctx, &refs, &mut rng(s)).unwrap();
        // a fresh copy of the graphs has a cold depth cache
        let again = inputs(g, gs, 2);
        let refs2: Vec<&SceneGraph> = again.iter().collect();
        prop_assert_eq!(a, g.run(&ctx, &refs2, &mut rng(s)).unwrap());
    }

    #[test]
    fn wider_margins_only_turn_answers_into_skips(
        g in any_generator(),
        gs in any::<u64>(),
        s in any::<u64>(),
        p in 0.0f64..0.2,
        dp in 0.0f64..0.2,
        d in 0.0f64..0.3,
    ) {
        let graphs = inputs(g, gs, 2);
        let refs: Vec<&SceneGraph> = graphs.iter().collect();
        let narrow = g.run(&ctx_with(p, d), &refs, &mut rng(s)).unwrap();
        let wide = g.run(&ctx_with(p + dp, d + dp), &refs, &mut rng(s)).unwrap();
        if let GenOutcome::Qa(w) = &wide {
            prop_assert_eq!(narrow.qa(), Some(w));
        }
    }

    #[test]
    fn object_depth_is_stable(gs in any::<u64>()) {
        let g = fuzz_graph(gs, "g");
        for o in &g.objects {
            let a = object_depth(&g, &o.id).map(f64::to_bits).ok();
            let b = object_depth(&g, &o.id).map(f64::to_bits).ok();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn canonical_form_round_trips(gs in any::<u64>()) {
        let g = fuzz_graph(gs, "g");
        prop_assert!(validate_graph(&g).is_empty());
        let line = to_canonical_line(&g);
        let back = parse_graph(&line).unwrap();
        prop_assert_eq!(to_canonical_line(&back), line);
    }

    #[test]
    fn every_record_has_one_correct_option_in_either_style(g in any_generator(), gs in any::<u64>(), s in any::<u64>()) {
        let ctx = GenContext::default();
        let (lib, lex) = resources();
        let graphs = inputs(g, gs, 2);
        let refs: Vec<&SceneGraph> = graphs.iter().collect();
        let Some(d) = g.run(&ctx, &refs, &mut rng(s)).unwrap().qa().cloned() else { return Ok(()) };
        let mk = |style| {
            assemble(lib, lex, &d, Assembly {
                corpus_seed: s,
                sample_index: 0,
                graphs: &refs,
                params: &ctx.params,
                style,
                format: Format::Mc,
            })
            .unwrap()
        };
        let (digits, words) = (mk(AnswerStyle::Digits), mk(AnswerStyle::Words));
        prop_assert!(digits.mc_is_sound(), "{digits:?}");
        prop_assert!(words.mc_is_sound(), "{words:?}");
        prop_assert_eq!(digits.mc_answer_index, words.mc_answer_index);
        prop_assert_eq!(digits.question, words.question);
    }

    #[test]
    fn permuting_the_tuple_permutes_the_chosen_image(
        g in (0..8usize).prop_map(|i| Generator::ALL.iter().copied().filter(|g| g.is_multi()).nth(i).unwrap()),
        gs in any::<u64>(),
        s in any::<u64>(),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let ctx = GenContext::default();
        let graphs = tuple(gs, 3);
        let refs: Vec<&SceneGraph> = graphs.iter().collect();
        let permuted: Vec<&SceneGraph> = perm.iter().map(|&i| &graphs[i]).collect();
        let a = g.run(&ctx, &refs, &mut rng(s)).unwrap();
        let b = g.run(&ctx, &permuted, &mut rng(s)).unwrap();
        match (a, b) {
            (GenOutcome::Qa(a), GenOutcome::Qa(b)) => {
                prop_assert_eq!(&a.probe, &b.probe);
                match (a.answer, b.answer) {
                    (Answer::Image(i), Answer::Image(j)) => prop_assert_eq!(perm[j], i),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
            (a, b) => prop_assert_eq!(a.skip(), b.skip()),
        }
    }

    #[test]
    fn tuple_count_is_the_sum_of_image_counts(gs in any::<u64>(), s in any::<u64>(), k in 2usize..=4) {
        let ctx = GenContext::default();
        let graphs = tuple(gs, k);
        let refs: Vec<&SceneGraph> = graphs.iter().collect();
        let GenOutcome::Qa(d) = Generator::CountObjectMulti.run(&ctx, &refs, &mut rng(s)).unwrap() else {
            return Ok(());
        };
        let Probe::Label { label } = &d.probe else { panic!("count probe is a label") };
        let per_image: u64 = graphs
            .iter()
            .map(|g| {
                let probe = Draft {
                    generator: Generator::ExistsObject,
                    probe: Probe::Label { label: label.clone() },
                    answer: Answer::Count(0),
                    hints: vec![],
                };
                match oracle::expected_answer(&probe, &[g], &ctx) {
                    Ok(Answer::Count(n)) => n,
                    _ => 0,
                }
            })
            .sum();
        prop_assert_eq!(d.answer, Answer::Count(per_image));
    }

    #[test]
    fn selection_answers_are_unique(
        g in (0..8usize).prop_map(|i| Generator::ALL.iter().copied().filter(|g| g.is_multi()).nth(i).unwrap()),
        gs in any::<u64>(),
        s in any::<u64>(),
        k in 2usize..=4,
    ) {
        let ctx = GenContext::default();
        let graphs = tuple(gs, k);
        let refs: Vec<&SceneGraph> = graphs.iter().collect();
        let GenOutcome::Qa(d) = g.run(&ctx, &refs, &mut rng(s)).unwrap() else { return Ok(()) };
        let Answer::Image(i) = d.answer else { panic!("selection answers name an image") };
        // no other image may be offered as the answer by the oracle
        for j in (0..k).filter(|&j| j != i) {
            let swapped = Draft { answer: Answer::Image(j), ..d.clone() };
            prop_assert!(oracle::verify(&swapped, &refs, &ctx).is_err());
        }
    }
}

fn lines(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{{\"id\":\"{prefix}{i}\"}}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn augment_appends_round_r_b(b in 0usize..3000, r in 0.0f64..1.5, seed in any::<u64>(), extra in 0usize..50) {
        let count = (r * b as f64).round() as usize;
        let recipe = MixRecipe { ratio: r, mode: MixMode::Augment, seed, ..MixRecipe::default() };
        let (out, m) = mix_records(&lines("b", b), &lines("o", count + extra), &recipe).unwrap();
        prop_assert_eq!(out.len(), b + count);
        prop_assert_eq!(m.added_ids.len(), count);
        prop_assert!(m.removed_ids.is_empty());
        let ids: BTreeSet<&str> = m.added_ids.iter().map(String::as_str).collect();
        prop_assert_eq!(ids.len(), count);
    }

    #[test]
    fn replace_swaps_exactly_round_r_b(b in 0usize..3000, r in 0.0f64..=1.0, seed in any::<u64>(), shuffle in any::<bool>()) {
        let count = (r * b as f64).round() as usize;
        let recipe = MixRecipe { ratio: r, mode: MixMode::Replace, seed, shuffle, ..MixRecipe::default() };
        let base = lines("b", b);
        let (out, m) = mix_records(&base, &lines("o", count), &recipe).unwrap();
        prop_assert_eq!(out.len(), b);
        let out_ids: BTreeSet<String> = out.iter().map(|l| record_id(l, "", 0)).collect();
        let base_ids: BTreeSet<String> = base.iter().map(|l| record_id(l, "", 0)).collect();
        let removed: BTreeSet<String> = base_ids.difference(&out_ids).cloned().collect();
        let added: BTreeSet<String> = out_ids.difference(&base_ids).cloned().collect();
        prop_assert_eq!(removed.len(), count);
        prop_assert_eq!(added.len(), count);
        prop_assert_eq!(removed, m.removed_ids.iter().cloned().collect::<BTreeSet<_>>());
        prop_assert_eq!(added, m.added_ids.iter().cloned().collect::<BTreeSet<_>>());
    }

    #[test]
    fn short_supply_is_reported(b in 1usize..2000, r in 0.01f64..1.0) {
        let count = (r * b as f64).round() as usize;
        prop_assume!(count > 0);
        let recipe = MixRecipe { ratio: r, ..MixRecipe::default() };
        let err = mix_records(&lines("b", b), &lines("o", count - 1), &recipe).unwrap_err();
        let reported = matches!(err, MixError::InsufficientOurData { needed, available } if needed == count && available == count - 1);
        prop_assert!(reported, "{}", err);
    }
}

struct Scaled(f64);

impl Scorer for Scaled {
    fn score(&self, raw: &str, candidate: &str) -> f64 {
        TokenF1.score(raw, candidate) * self.0
    }
}

proptest! {
    #[test]
    fn grounding_ignores_positive_score_scaling(
        words in proptest::collection::vec("[a-z]{1,7}|on|of|left|side|top|near|front|behind", 1..5),
        c in 1e-6f64..1e6,
    ) {
        let lib = RelationLibrary::builtin();
        let raw = words.join(" ");
        prop_assert_eq!(
            ground_relation(&raw, &lib, &TokenF1).unwrap(),
            ground_relation(&raw, &lib, &Scaled(c)).unwrap()
        );
    }
}
