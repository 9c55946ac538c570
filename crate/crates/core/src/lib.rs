//! Recurrent temporal revision (RTR) for continuous-time dynamic graphs.
//!
//! The crate has two halves that share one event model:
//!
//! * a trainable model ([`model`]) built on a small fp64 reverse-mode engine ([`nn`]),
//!   evaluated on temporal link prediction by [`harness`];
//! * exact, interning-based expressiveness engines ([`expressive`]) that decide
//!   temporal graph isomorphism questions deterministically, together with the
//!   synthetic corpora in [`synth`].

pub mod error;
pub mod expressive;
pub mod features;
pub mod graph;
pub mod harness;
pub mod model;
pub mod nn;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Event, NodeId, TemporalGraph};
