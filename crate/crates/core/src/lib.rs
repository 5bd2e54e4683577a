//! Weighted finite automata compiled into matrix product states and
//! operators, with transfer-matrix expectation values, cached one-site
//! variational sweeps, and signaling agents on 2D grids.
//!
//! Small sizes are checked against the brute-force routines in [`oracle`].

pub mod automaton;
pub mod compile;
pub mod complex_fmt;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod grid2d;
pub mod linalg;
pub mod mps;
pub mod oracle;
pub mod specfile;
pub mod tensor;
pub mod variational;

pub type C64 = num_complex::Complex64;

pub use automaton::{SymbolKind, SymbolTable, WeightedAutomaton};
pub use compile::{unroll, unroll_periodic, MatrixProductDiagram};
pub use error::{Error, ParseErrorKind, Result};
pub use exec::Execution;
pub use grid2d::{compile_grid, four_x_agent, GridOperator, SignalingAgent};
pub use linalg::{gen_eig_smallest, svd_split, EigenPair};
pub use mps::{expectation, inner, Boundary, MatrixProductOperator, MatrixProductState};
pub use specfile::{parse_spec, Spec};
pub use tensor::{contract, Tensor};
pub use variational::{sweep, EnvironmentCache, SweepReport};
