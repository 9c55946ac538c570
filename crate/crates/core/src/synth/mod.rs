//! Seeded generators for the isomorphism corpora and the periodic link-prediction stream.

pub mod corpus;
pub mod csl;
pub mod cuneiform;
pub mod periodic;

pub use corpus::{cuneiform_corpus, oscillating_corpus, read_corpus, write_corpus, LabeledPair, OscillatingConfig, PairRecord};
pub use csl::{csl_snapshot, gen_csl, gen_oscillating_csl, oscillating_csl, CslSpec, OscillationSpec};
pub use cuneiform::{fig4_fixture, gen_cuneiform_like, hard_family, CuneiformConfig, Sign};
pub use periodic::{gen_periodic_bipartite, PeriodicSpec};
