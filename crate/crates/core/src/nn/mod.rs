//! Dense fp64 tensors with reverse-mode differentiation, the GRU / attention /
//! linear blocks built on them, Adam, and a binary checkpoint codec.

pub mod codec;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;

pub use layers::{GruCell, Linear, MultiHeadAttention};
pub use optim::Adam;
pub use params::{Init, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
