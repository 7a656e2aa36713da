//! Deterministic discrete-event simulation of asynchronous Byzantine agreement
//! on incomplete networks.

pub mod graph;
pub mod seed;
pub mod simnet;
pub mod purify;
pub mod rbcast;
pub mod agreement;
pub mod node;
pub mod adversary;
pub mod harness;
