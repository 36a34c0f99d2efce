//! omega-rater: rating-polarity analysis of product reviews from sentiment
//! proportions alone.
//!
//! Each review's (pos, neu, neg) sentiment proportions are embedded as a
//! triangle in the plane; from that triangle the pipeline derives the side
//! lengths `a` and `c` plus a growth-rate scalar `omega`, projects every
//! review into the `[a, c, omega]` space, extracts rating-polarity
//! clusters there with DBSCAN, and characterizes each cluster's rating
//! distribution with Dirichlet-multinomial Bayesian inference - ratings
//! are held out of everything except the final evaluation and inference.
//!
//! # Modules
//!
//! - [`ingest`] - CSV/JSONL review datasets into a normalized record stream
//! - [`sentiment`] - sentiment triples via a lexicon scorer or passthrough
//! - [`geometry`] - the triangle embedding and side lengths
//! - [`features`] - alpha, beta, gamma, omega and the `[a, c, omega]` vector
//! - [`cluster`] - grid-indexed DBSCAN plus rating-free polarity labels
//! - [`inference`] - conjugate Dirichlet posterior and MCMC sampling
//! - [`pipeline`] - the end-to-end run and its file outputs
//! - [`synth`] - seeded synthetic review generator for demos and validation
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --example score_text          # lexicon scoring -> triples
//! cargo run --example triangle_features   # triple -> [a, c, omega]
//! cargo run --example cluster_blobs       # DBSCAN + polarity labels
//! cargo run --example rating_posterior    # conjugate vs MCMC posterior
//! cargo run --example load_dataset        # dirty-CSV ingestion report
//! cargo run --example full_pipeline       # synthetic end-to-end run
//! ```
//!
//! The `omega-rater` binary wraps [`pipeline`] with `run`, `features`,
//! `cluster` and `infer` subcommands.

pub mod cluster;
pub mod error;
pub mod features;
pub mod geometry;
pub mod inference;
pub mod ingest;
pub mod pipeline;
pub mod sentiment;
pub mod synth;

pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureRecord, FeatureVector};
pub use geometry::AngleMode;
pub use pipeline::{run_pipeline, RunConfig, RunManifest};
pub use sentiment::{score_text, Lexicon, SentimentTriple};
