//! Combinatorial fusion analysis for multi-class text classification.
//!
//! Several scoring systems each assign a score to every label of a document.
//! This crate turns those scores into rank-score characteristic curves,
//! measures how differently the systems behave (cognitive diversity and
//! diversity strength), fuses every subset of systems with average and
//! weighted score/rank combination, and scores the fused top-1 labels
//! against expert labels.
//!
//! ```
//! use cfa_core::{build_instance, combiner, LabelSet, TiePolicy};
//!
//! let labels = LabelSet::new(["SDG1", "SDG2", "SDG3"]).unwrap();
//! let inst = build_instance(
//!     "doc-1",
//!     &labels,
//!     vec![
//!         ("A".into(), vec![0.9, 0.2, 0.4]),
//!         ("B".into(), vec![0.3, 0.8, 0.1]),
//!     ],
//!     TiePolicy::Fractional,
//! )
//! .unwrap();
//! let fused = combiner::average_score_combination(&inst, &["A", "B"]).unwrap();
//! assert_eq!(fused.top1, "SDG1");
//! ```

pub mod combiner;
pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod fusion;
pub mod generation;
pub mod labels;
pub mod lexicon;
pub mod prompts;
pub mod tfidf;

pub use combiner::{CombinedModel, FusedRanking, GridResults, Strategy, WeightSource};
pub use corpus::{tokenize, Document};
pub use error::{CfaError, Result};
pub use evaluator::{EvaluationReport, ExpertLabels, Fraction, Prediction, Predictions, TieMode};
pub use fusion::{
    build_instance, DiversityProfile, FusionInstance, RscCurve, SystemScores, TiePolicy,
};
pub use labels::LabelSet;
pub use lexicon::KeywordLexicon;
pub use prompts::{Prompt, PromptSpec};
pub use tfidf::TfidfCentroidScorer;
