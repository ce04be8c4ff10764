//! File-based front end over the core crate: strict JSON configs in,
//! CSV/JSON/SVG artifacts plus a run manifest out.

pub mod commands;
pub mod config;
pub mod engine;
pub mod io;
