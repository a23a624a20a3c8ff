//! Multilingual (Python/C++) call-graph construction across pybind11
//! bindings, and physical-design linting of the binding layout.
//!
//! The pipeline is a chain of small stages over a CSV intermediate
//! representation: per-language extraction, FFI resolution, graph merge,
//! and lint.

pub mod callgraph;
pub mod cpp;
pub mod diag;
pub mod error;
pub mod ffi;
pub mod fqn;
pub mod ir;
pub mod lint;
pub mod model;
pub mod python;
pub mod reaching;

pub use error::{FieldError, IrError};
pub use ir::{Extraction, ExtractionTables};
