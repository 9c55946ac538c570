//! The RTR temporal graph network.

pub mod config;
mod rtr;
pub mod state;

pub use config::{Ablations, Aggregation, BaseMode, MultiEvent, RtrConfig};
pub use rtr::{ModelShape, RtrModel};
pub use state::{LayerState, ModelState, NodeState};
