//! Single-image generators.

mod attribute;
mod compositional;
mod depth;
mod relation;
mod segmentation;

use rand::Rng;

use super::util::{label_counts, pick, sample};
use super::{Answer, Draft, GenContext, GenOutcome, Generator, Probe, SkipReason};
use crate::graph::SceneGraph;

pub use attribute::{gen_attribute, AttributeKind};
pub use compositional::{gen_compositional, CompositionalKind};
pub use depth::{gen_depth, DepthKind};
pub use relation::{gen_relation, RelationKind};
pub use segmentation::{gen_segmentation, SegKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    ExistsObject,
    MostObject,
    LeastObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionKind {
    LeftMost,
    RightMost,
    TopMost,
    BottomMost,
}

impl PositionKind {
    pub fn generator(self) -> Generator {
        match self {
            PositionKind::LeftMost => Generator::LeftMostObject,
            PositionKind::RightMost => Generator::RightMostObject,
            PositionKind::TopMost => Generator::TopMostObject,
            PositionKind::BottomMost => Generator::BottomMostObject,
        }
    }

    /// Whether the kind measures the horizontal axis.
    pub fn horizontal(self) -> bool {
        matches!(self, PositionKind::LeftMost | PositionKind::RightMost)
    }

    /// Whether smaller coordinates win (left, top).
    pub fn minimizes(self) -> bool {
        matches!(self, PositionKind::LeftMost | PositionKind::TopMost)
    }
}

fn draft(generator: Generator, probe: Probe, answer: Answer, hints: Vec<Answer>) -> GenOutcome {
    GenOutcome::Qa(Draft {
        generator,
        probe,
        answer,
        hints,
    })
}

fn other_labels(labels: &[String], answer: &str) -> Vec<Answer> {
    labels
        .iter()
        .filter(|l| *l != answer)
        .map(|l| Answer::Label(l.clone()))
        .collect()
}

/// Counting questions over object labels.
pub fn gen_object<R: Rng + ?Sized>(
    ctx: &GenContext,
    graph: &SceneGraph,
    kind: ObjectKind,
    rng: &mut R,
) -> GenOutcome {
    let counts = label_counts(graph);
    let labels: Vec<&str> = counts.keys().copied().collect();
    match kind {
        ObjectKind::ExistsObject => {
            let Some(&label) = pick(&labels, rng) else {
                return GenOutcome::Skip(SkipReason::NoEligibleObjects);
            };
            draft(
                Generator::ExistsObject,
                Probe::Label {
                    label: label.to_string(),
                },
                Answer::Count(counts[label] as u64),
                vec![],
            )
        }
        ObjectKind::MostObject | ObjectKind::LeastObject => {
            if labels.len() < 2 {
                return GenOutcome::Skip(SkipReason::NoEligibleObjects);
            }
            let most = kind == ObjectKind::MostObject;
            for _ in 0..ctx.params.retries {
                let n = rng.random_range(2..=labels.len().min(4));
                let chosen = sample(&labels, n, rng);
                let mut cs: Vec<usize> = chosen.iter().map(|l| counts[l]).collect();
                cs.sort_unstable();
                if cs.windows(2).any(|w| w[0] == w[1]) {
                    continue;
                }
                let winner = if most {
                    chosen.iter().max_by_key(|l| counts[*l])
                } else {
                    chosen.iter().min_by_key(|l| counts[*l])
                }
                .expect("at least two candidates");
                let chosen: Vec<String> = chosen.iter().map(|s| s.to_string()).collect();
                let hints = other_labels(&chosen, winner);
                return draft(
                    if most {
                        Generator::MostObject
                    } else {
                        Generator::LeastObject
                    },
                    Probe::Labels { labels: chosen.clone() },
                    Answer::Label(winner.to_string()),
                    hints,
                );
            }
            GenOutcome::Skip(SkipReason::AmbiguousTie)
        }
    }
}

/// Which of 2-4 labels is extremal along an axis, measured at box centers.
/// A label's position is that of its most extreme instance; the winner must
/// beat the runner-up by more than the positional margin.
pub fn gen_extremal_position<R: Rng + ?Sized>(
    ctx: &GenContext,
    graph: &SceneGraph,
    kind: PositionKind,
    rng: &mut R,
) -> GenOutcome {
    let counts = label_counts(graph);
    let labels: Vec<&str> = counts.keys().copied().collect();
    if labels.len() < 2 {
        return GenOutcome::Skip(SkipReason::NoEligibleObjects);
    }
    let n = rng.random_range(2..=labels.len().min(4));
    let chosen = sample(&labels, n, rng);
    let extent = if kind.horizontal() {
        f64::from(graph.image.width)
    } else {
        f64::from(graph.image.height)
    };
    // key: smaller is better
    let key = |label: &str| -> f64 {
        graph
            .objects
            .iter()
            .filter(|o| o.label == label)
            .map(|o| {
                let (cx, cy) = o.bbox.center();
                let v = if kind.horizontal() { cx } else { cy };
                if kind.minimizes() {
                    v
                } else {
                    -v
                }
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut scored: Vec<(f64, &str)> = chosen.iter().map(|l| (key(l), *l)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    if scored[1].0 - scored[0].0 <= ctx.params.position_margin * extent {
        return GenOutcome::Skip(SkipReason::AmbiguousTie);
    }
    let winner = scored[0].1.to_string();
    let chosen: Vec<String> = chosen.iter().map(|s| s.to_string()).collect();
    let hints = other_labels(&chosen, &winner);
    draft(
        kind.generator(),
        Probe::Labels { labels: chosen },
        Answer::Label(winner),
        hints,
    )
}
