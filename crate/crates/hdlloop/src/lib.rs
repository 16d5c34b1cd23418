//! Closed-loop harness around chat models writing Verilog: suite files,
//! simulator bridge, chat sessions, the conversation driver, suite runs,
//! replay, wrapper generation and the steering server.

pub mod cli;
pub mod compliance;
pub mod driver;
pub mod record;
pub mod replay;
pub mod report;
pub mod runner;
pub mod serve;
pub mod session;
pub mod suite;
pub mod toolchain;
pub mod wrapper_cmd;

pub use hdlloop_core as core;
