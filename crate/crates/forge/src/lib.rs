//! Std side of forge: file formats, the process executor, the HTTP chat
//! backend, split runner and the command-line interface.

pub mod cli;
pub mod exec;
pub mod http;
pub mod io;
pub mod split;

pub use forge_core as core;
