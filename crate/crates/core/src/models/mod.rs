//! GRU/LSTM encoders (uni- or bidirectional) with a two-layer dense head.

mod checkpoint;
mod network;
mod spec;

pub use checkpoint::{ArrayEntry, Checkpoint, InputLayout};
pub(crate) use network::targets_matrix;
pub use network::{
    batch_steps, encode, gru_cell, head, lstm_cell, trace_encode, trace_forward, trace_gru_step,
    trace_head, trace_lstm_step, trace_mse, Model, TracedParams,
};
pub use spec::{CellKind, Direction, ModelSpec, ParameterSet};
