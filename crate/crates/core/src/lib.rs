pub mod graph;
pub mod lexicon;
pub mod qgen;
pub mod render;
pub mod seed;
pub mod oracle;
pub mod format;
pub mod ingest;
pub mod synth;
pub mod builder;
pub mod annotate;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scene-graphs.md")]
    mod scene_graphs {}
    #[doc = include_str!("../../../book/src/generators.md")]
    mod generators {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/mixing.md")]
    mod mixing {}
    #[doc = include_str!("../../../book/src/annotation.md")]
    mod annotation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
