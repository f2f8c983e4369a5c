//! Discrete-event simulation of LEDBAT sharing a drop-tail bottleneck with
//! TCP or with other LEDBAT flows.

pub mod cli;
pub mod engine;
pub mod harness;
pub mod ledbat;
pub mod metrics;
pub mod network;
pub mod tcp;
pub mod transport;
