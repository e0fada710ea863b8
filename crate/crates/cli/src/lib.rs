//! Library surface of the CLI: manifest loading, deterministic input
//! generation, and command drivers, reused by the binary and test suites.

pub mod commands;
pub mod inputs;
pub mod manifest;
