//! Toolchain for a staged NPU kernel DSL.
//!
//! The pipeline is: parse `.adsl` source into a [`ast::Program`], validate it
//! with the [`semantic`] rule suite, execute it on the virtual NPU in [`vm`]
//! (functional or cycle-approximate timed mode), and lower it through four
//! structured passes in [`lowering`] into the AscendC-like [`target`] IR,
//! whose interpreter must agree bitwise with the DSL interpreter.

pub mod ast;
pub mod diag;
pub mod eval;
pub mod lexer;
pub mod parser;
pub mod render;
pub mod semantic;
pub mod vm;
pub mod target;
pub mod lowering;

pub use ast::Program;
pub use diag::{Diagnostic, Severity, Span};
pub use parser::parse_program;
pub use render::render_program;
