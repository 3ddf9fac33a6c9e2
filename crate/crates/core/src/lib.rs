//! Core algorithms for open-vocabulary extreme multi-label (keyphrase)
//! classification with missing labels.
//!
//! Everything here is a pure transformation over in-memory values and builds
//! without `std` (only `alloc` is required). File formats, the command line
//! and pipeline orchestration live in the companion `oxmc` crate.
//!
//! Module map:
//!
//! - [`corpus`]: keyphrase normalization, curated instances and datasets.
//! - [`splitter`]: seeded train/dev/test split, label-count buckets and the
//!   narrow/diverse test aggregation.
//! - [`analysis`]: coefficient of variation, hot/rare × diverse/narrow
//!   quadrants, label-count histograms, Lorenz curve and Gini index.
//! - [`metrics`]: P/R/F1@k, P/R/F1@O, B@k, #K@k and the relevance combiner.
//! - [`seqmodel`]: vocabulary, paradigm-specific training sequences and the
//!   count-based next-token scorer.
//! - [`decoder`]: top-k constrained PUSL decoding, free-running One2Seq
//!   decoding and One2One beam search.
//! - [`augmentor`]: Train-Diverse selection and rejection-sampled augmentation.
//! - [`biassim`]: synthetic label universe with self-selection-biased
//!   annotation.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod augmentor;
pub mod biassim;
pub mod corpus;
pub mod decoder;
mod error;
pub mod metrics;
pub mod rng;
pub mod seqmodel;
pub mod splitter;

pub use error::{Error, Result};
