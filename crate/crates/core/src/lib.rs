//! Construction and analysis of mobile-phone calling networks.
//!
//! The pipeline reads call detail records ([`ingest`]), aggregates them into
//! directed pair statistics, and builds the directed calling network (DCN) and
//! the mutual calling network (MCN) ([`netbuild`]). Each directed link can be
//! tested against a random-matching null hypothesis with a hypergeometric
//! over-expression test and a Bonferroni threshold ([`validate`]), producing
//! the statistically validated networks SVDCN and SVMCN.
//!
//! The remaining modules compute the statistics of these networks:
//! components and ego balls ([`components`]), degree/strength/clustering/
//! overlap measures and conditional averages ([`metrics`]), and least-squares
//! fits of heavy-tailed distributions ([`fitting`]). [`synth`] generates
//! synthetic records with known ground truth.

pub mod components;
pub mod fitting;
pub mod ingest;
pub mod metrics;
pub mod netbuild;
pub mod synth;
pub mod validate;

pub use ingest::{CallRecord, PairStats, UserId};
pub use netbuild::{CallNetwork, NetworkKind};
