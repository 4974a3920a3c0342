//! Question generators.
//!
//! A generator is a pure function from one scene graph (single-image) or a
//! tuple of scene graphs (multi-image) plus a seeded RNG to either a [`Draft`]
//! or a typed [`SkipReason`]. A draft carries the structured *probe* that the
//! question is about and the typed answer; question text is produced later by
//! [`crate::format`]. The [`crate::oracle`] module re-derives every answer from
//! the probe and the raw graphs.

mod answer;
mod multi;
mod probe;
mod registry;
mod single;
pub(crate) mod util;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::SceneGraph;
use crate::lexicon::Taxonomy;

pub use answer::{render_answer, render_comparison_with, Answer, AnswerStyle, Comparison};
pub use multi::{
    gen_multi_aggregation, gen_multi_comparison, gen_multi_selection, AggregationKind,
    ComparisonKind, SelectionKind,
};
pub use probe::{copula_phrase, Probe, RefExpr, RefRelation};
pub use registry::{Family, Generator};
pub use single::{
    gen_attribute, gen_compositional, gen_depth, gen_extremal_position, gen_object,
    gen_relation, gen_segmentation, AttributeKind, CompositionalKind, DepthKind, ObjectKind,
    PositionKind, RelationKind, SegKind,
};

/// Why a generator declined to emit a QA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SkipReason {
    NoEligibleObjects,
    AmbiguousTie,
    MissingDepth,
    MissingMask,
    NoUniqueReferent,
    InsufficientCandidates,
}

impl SkipReason {
    pub const ALL: [SkipReason; 6] = [
        SkipReason::NoEligibleObjects,
        SkipReason::AmbiguousTie,
        SkipReason::MissingDepth,
        SkipReason::MissingMask,
        SkipReason::NoUniqueReferent,
        SkipReason::InsufficientCandidates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SkipReason::NoEligibleObjects => "NoEligibleObjects",
            SkipReason::AmbiguousTie => "AmbiguousTie",
            SkipReason::MissingDepth => "MissingDepth",
            SkipReason::MissingMask => "MissingMask",
            SkipReason::NoUniqueReferent => "NoUniqueReferent",
            SkipReason::InsufficientCandidates => "InsufficientCandidates",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("{0} needs an attribute taxonomy but none is loaded")]
    TaxonomyMissing(&'static str),
    #[error("{0} expects {1} graph(s), got {2}")]
    WrongArity(&'static str, &'static str, usize),
}

/// A generated question before rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Draft {
    pub generator: Generator,
    pub probe: Probe,
    pub answer: Answer,
    /// Preferred multiple-choice distractors, most relevant first.
    pub hints: Vec<Answer>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenOutcome {
    Qa(Draft),
    Skip(SkipReason),
}

impl GenOutcome {
    pub fn qa(&self) -> Option<&Draft> {
        match self {
            GenOutcome::Qa(d) => Some(d),
            GenOutcome::Skip(_) => None,
        }
    }

    pub fn skip(&self) -> Option<SkipReason> {
        match self {
            GenOutcome::Skip(r) => Some(*r),
            GenOutcome::Qa(_) => None,
        }
    }
}

/// Tunables shared by all generators. Every field is echoed into output
/// metadata by the dataset builder.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    /// Positional tie margin as a fraction of the axis extent.
    pub position_margin: f64,
    /// Depth tie margin as a fraction of the relevant depth range.
    pub depth_margin: f64,
    /// Retry budget for count ties and candidate searches.
    pub retries: u32,
    /// Retry budget for referring-expression and multi-image searches.
    pub search_retries: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            position_margin: 0.02,
            depth_margin: 0.05,
            retries: 16,
            search_retries: 32,
        }
    }
}

/// Parameters plus the loaded taxonomy.
#[derive(Debug, Clone)]
pub struct GenContext {
    pub params: GenParams,
    pub taxonomy: Option<Arc<Taxonomy>>,
}

impl GenContext {
    pub fn new(params: GenParams, taxonomy: Option<Arc<Taxonomy>>) -> Self {
        GenContext { params, taxonomy }
    }

    pub(crate) fn taxonomy(&self, who: &'static str) -> Result<&Taxonomy, GenError> {
        self.taxonomy.as_deref().ok_or(GenError::TaxonomyMissing(who))
    }
}

impl Default for GenContext {
    fn default() -> Self {
        GenContext {
            params: GenParams::default(),
            taxonomy: Some(Arc::new(Taxonomy::builtin())),
        }
    }
}

impl Generator {
    /// Runs this generator. Single-image generators take exactly one graph;
    /// multi-image generators take 2 to 4.
    pub fn run<R: Rng + ?Sized>(
        self,
        ctx: &GenContext,
        graphs: &[&SceneGraph],
        rng: &mut R,
    ) -> Result<GenOutcome, GenError> {
        use Family::*;
        if self.is_multi() {
            if !(2..=4).contains(&graphs.len()) {
                return Err(GenError::WrongArity(self.name(), "2-4", graphs.len()));
            }
        } else if graphs.len() != 1 {
            return Err(GenError::WrongArity(self.name(), "1", graphs.len()));
        }
        let g = graphs[0];
        match self.family() {
            Object(k) => Ok(gen_object(ctx, g, k, rng)),
            Position(k) => Ok(gen_extremal_position(ctx, g, k, rng)),
            Attribute(k) => gen_attribute(ctx, g, k, rng),
            Relation(k) => Ok(gen_relation(ctx, g, k, rng)),
            Segmentation(k) => Ok(gen_segmentation(ctx, g, k, rng)),
            Depth(k) => Ok(gen_depth(ctx, g, k, rng)),
            Compositional(k) => gen_compositional(ctx, g, k, rng),
            Selection(k) => Ok(gen_multi_selection(ctx, graphs, k, rng)),
            Comparison(k) => Ok(gen_multi_comparison(ctx, graphs, k, rng)),
            Aggregation(k) => Ok(gen_multi_aggregation(ctx, graphs, k, rng)),
        }
    }
}
