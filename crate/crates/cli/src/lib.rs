//! Library side of the bellbound CLI: the SDPA file writer (with a
//! diagnostic reader), the seeded scaling-benchmark harness, and the peak
//! memory probe. The binary in `main.rs` is a thin clap front end over these
//! modules and the `bellbound` solver crate.

pub mod bench;
pub mod memory;
pub mod sdpa;
