//! Pure core of the hdlloop design-and-test loop.
//!
//! Everything here is deterministic and free of IO: benchmark definitions,
//! prompt rendering, Verilog header handling, verdict classification, the
//! conversation state machine and wrapper generation. The `hdlloop` crate
//! adds subprocesses, files, chat backends and the CLI.

#![no_std]

extern crate alloc;

pub mod audit;
pub mod bench;
pub mod conversation;
pub mod engine;
pub mod hdl;
pub mod outcome;
pub mod prompt;
pub mod verdict;
pub mod wrapper;
