//! Multiple-choice conversion.
//!
//! Distractors are typed answers of the same kind as the truth. Candidates
//! are tried in order of preference and kept when they render differently
//! from the truth and from every option already chosen and are not synonyms
//! of the truth. The four options are then shuffled.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{FormatError, Lexicon};
use crate::graph::SceneGraph;
use crate::qgen::{render_answer, Answer, AnswerStyle, Comparison, Draft, Generator, Probe};
use crate::render::NormPoint;

pub const OPTION_COUNT: usize = 4;
/// Largest tuple size; image answers are padded with indices below it.
const MAX_IMAGES: usize = 4;
const VARIATION_ATTEMPTS: usize = 200;

/// Four typed options, one of which is the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipleChoice {
    pub options: Vec<Answer>,
    pub answer_index: usize,
}

fn shuffled<T, R: Rng + ?Sized>(mut v: Vec<T>, rng: &mut R) -> Vec<T> {
    v.shuffle(rng);
    v
}

fn graph_labels(graphs: &[&SceneGraph]) -> Vec<String> {
    graphs
        .iter()
        .flat_map(|g| g.objects.iter().map(|o| o.label.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn covering(g: &SceneGraph, p: NormPoint) -> BTreeSet<&str> {
    let (x, y) = p.to_pixel(g.image.width, g.image.height);
    g.objects
        .iter()
        .filter(|o| o.mask.as_ref().is_some_and(|m| m.contains_pixel(x, y)))
        .map(|o| o.id.as_str())
        .collect()
}

/// Whether a random point would also answer a segmentation question.
fn point_is_wrong(draft: &Draft, graphs: &[&SceneGraph], p: NormPoint) -> bool {
    let (Probe::PointChoice { anchor: Some(anchor), .. }, [g]) = (&draft.probe, graphs) else {
        return true;
    };
    let a = covering(g, *anchor);
    let c = covering(g, p);
    let shares = !a.is_disjoint(&c);
    match draft.generator {
        Generator::SameObjectSeg => !shares,
        Generator::DiffObjectSeg => shares || c.is_empty(),
        _ => true,
    }
}

/// A word of the same taxonomy type as `w` (any known attribute when `w` is
/// untyped), avoiding `avoid`.
fn sibling_attribute<R: Rng + ?Sized>(lex: &Lexicon, w: &str, avoid: &[String], rng: &mut R) -> Option<String> {
    let tax = lex.taxonomy.as_deref()?;
    let pool: Vec<&String> = match tax.type_of(w) {
        Some(t) => tax.words(t).iter().collect(),
        None => crate::lexicon::AttrType::ALL.iter().flat_map(|t| tax.words(*t)).collect(),
    };
    let c = pool[rng.random_range(0..pool.len())];
    (!avoid.contains(c) && !lex.synonyms.equivalent(c, w)).then(|| c.clone())
}

fn from_pool<R: Rng + ?Sized>(lex: &Lexicon, pool: &[String], w: &str, avoid: &[String], rng: &mut R) -> Option<String> {
    let c = &pool[rng.random_range(0..pool.len())];
    (!avoid.contains(c) && !lex.synonyms.equivalent(c, w)).then(|| c.clone())
}

/// Replaces one element of `truth` using `swap`.
fn vary<R: Rng + ?Sized>(
    truth: &[String],
    rng: &mut R,
    mut swap: impl FnMut(&str, &[String], &mut R) -> Option<String>,
) -> Option<Vec<String>> {
    if truth.is_empty() {
        return None;
    }
    let i = rng.random_range(0..truth.len());
    let w = swap(&truth[i], truth, rng)?;
    let mut v = truth.to_vec();
    v[i] = w;
    Some(v)
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

/// Candidate distractors in order of preference; may contain repeats.
fn candidates<R: Rng + ?Sized>(draft: &Draft, graphs: &[&SceneGraph], lex: &Lexicon, rng: &mut R) -> Vec<Answer> {
    let hinted = draft.hints.iter().filter(|h| h.type_name() == draft.answer.type_name()).cloned();
    let mut out: Vec<Answer> = hinted.collect();
    match &draft.answer {
        Answer::Count(n) => {
            let near: Vec<u64> = (n.saturating_sub(3)..=n + 3).filter(|c| c != n).collect();
            out.extend(shuffled(near, rng).into_iter().map(Answer::Count));
        }
        Answer::Image(i) => {
            let k = graphs.len();
            let inside: Vec<usize> = (0..k).filter(|j| j != i).collect();
            out.extend(shuffled(inside, rng).into_iter().map(Answer::Image));
            out.extend((k..MAX_IMAGES.max(k)).filter(|j| j != i).map(Answer::Image));
        }
        Answer::Label(_) => {
            out.extend(shuffled(graph_labels(graphs), rng).into_iter().map(Answer::Label));
            out.extend(shuffled(lex.pools.labels.clone(), rng).into_iter().map(Answer::Label));
        }
        Answer::Point(_) => {
            for _ in 0..VARIATION_ATTEMPTS {
                let p = NormPoint {
                    x: rng.random_range(0..=100),
                    y: rng.random_range(0..=100),
                };
                if point_is_wrong(draft, graphs, p) {
                    out.push(Answer::Point(p));
                }
            }
        }
        Answer::Attributes(truth) => {
            for _ in 0..VARIATION_ATTEMPTS {
                if let Some(v) = vary(truth, rng, |w, avoid, r| sibling_attribute(lex, w, avoid, r)) {
                    out.push(Answer::Attributes(sorted(v)));
                }
            }
        }
        Answer::Labels(truth) => {
            let mut pool = graph_labels(graphs);
            pool.extend(lex.pools.labels.iter().cloned());
            for _ in 0..VARIATION_ATTEMPTS {
                if let Some(v) = vary(truth, rng, |w, avoid, r| from_pool(lex, &pool, w, avoid, r)) {
                    out.push(Answer::Labels(sorted(v)));
                }
            }
        }
        Answer::Predicates(truth) => {
            for _ in 0..VARIATION_ATTEMPTS {
                if let Some(v) = vary(truth, rng, |w, avoid, r| from_pool(lex, &lex.pools.predicates, w, avoid, r)) {
                    out.push(Answer::Predicates(v));
                }
            }
        }
        Answer::Comparison(c) => {
            let relation = c.object.is_some();
            for _ in 0..VARIATION_ATTEMPTS {
                if c.entries.is_empty() {
                    break;
                }
                let e = rng.random_range(0..c.entries.len());
                let varied = vary(&c.entries[e].1, rng, |w, avoid, r| {
                    if relation {
                        from_pool(lex, &lex.pools.predicates, w, avoid, r)
                    } else {
                        sibling_attribute(lex, w, avoid, r)
                    }
                });
                if let Some(v) = varied {
                    let mut entries = c.entries.clone();
                    entries[e].1 = v;
                    out.push(Answer::Comparison(Comparison { entries, ..c.clone() }));
                }
            }
        }
    }
    out
}

fn is_synonym(lex: &Lexicon, a: &Answer, b: &Answer) -> bool {
    match (a, b) {
        (Answer::Label(x), Answer::Label(y)) => lex.synonyms.equivalent(x, y),
        _ => false,
    }
}

/// Builds four options with exactly one correct.
pub fn to_multiple_choice<R: Rng + ?Sized>(
    draft: &Draft,
    graphs: &[&SceneGraph],
    lex: &Lexicon,
    rng: &mut R,
) -> Result<MultipleChoice, FormatError> {
    let key = |a: &Answer| render_answer(a, AnswerStyle::Digits);
    let truth = key(&draft.answer);
    let mut seen: BTreeSet<String> = BTreeSet::from([truth]);
    let mut chosen: Vec<Answer> = Vec::with_capacity(OPTION_COUNT);
    for c in candidates(draft, graphs, lex, rng) {
        if chosen.len() == OPTION_COUNT - 1 {
            break;
        }
        if is_synonym(lex, &c, &draft.answer) || !seen.insert(key(&c)) {
            continue;
        }
        chosen.push(c);
    }
    if chosen.len() < OPTION_COUNT - 1 {
        return Err(FormatError::DistractorExhaustion {
            generator: draft.generator.name().to_string(),
            found: chosen.len(),
        });
    }
    chosen.push(draft.answer.clone());
    chosen.shuffle(rng);
    let answer_index = chosen
        .iter()
        .position(|o| *o == draft.answer)
        .expect("truth is among the options");
    Ok(MultipleChoice {
        options: chosen,
        answer_index,
    })
}
