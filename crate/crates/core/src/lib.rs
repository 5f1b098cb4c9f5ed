//! Evaluation workbench for sentence simplification systems.
//!
//! The crate is organised by stage of the analysis pipeline:
//!
//! - [`corpus`]: multi-reference eval sets, system outputs, seeded sampling.
//! - [`textmetrics`]: SARI, BLEU, FKGL and ingestion of precomputed
//!   sentence-level scores (LENS, BERTScore).
//! - [`erroranalysis`]: the seven-type error taxonomy, consensus records,
//!   Likert ratings and their aggregate tables.
//! - [`agreement`]: overlap rate and ICC over rating matrices.
//! - [`metaeval`]: binarised human labels, point-biserial correlation,
//!   class balancing and the paired randomization test.
//! - [`promptlab`]: the prompt grid, rendering, generation clients and
//!   best-prompt selection.

pub mod agreement;
pub mod corpus;
pub mod erroranalysis;
pub mod jsonl;
pub mod metaeval;
pub mod promptlab;
pub mod textmetrics;

pub use agreement::RatingMatrix;
pub use corpus::{Dataset, EvalItem, ReferenceSet, SourceItem, Split, SystemOutput};
pub use erroranalysis::{ErrorAnnotation, ErrorRecord, ErrorType, Rating, RatingDimension, Span};
pub use metaeval::{BinaryLabelSet, PairedScores};
pub use promptlab::PromptSpec;
pub use textmetrics::{MetricReport, SentenceScore};
