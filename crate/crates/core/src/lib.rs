//! Tensor-train compression built on Householder bidiagonalization, with a
//! phase-level latency/energy model of a GEMM-only edge processor and of
//! the same processor extended with a TTD engine.
//!
//! ```
//! use ttedge::sim::GemmExecutor;
//! use ttedge::tensor::Tensor;
//! use ttedge::tt::{reconstruction_error, tt_decompose};
//!
//! let w = Tensor::new(vec![2, 3, 2], (0..12).map(|x| x as f64).collect()).unwrap();
//! let cores = tt_decompose(&w, 1e-8, &mut GemmExecutor::reference()).unwrap();
//! assert!(reconstruction_error(&w, &cores).unwrap() < 1e-8);
//! ```

pub mod cli;
pub mod error;
pub mod format;
pub mod householder;
pub mod sim;
pub mod svd;
pub mod synth;
pub mod tensor;
pub mod tt;

pub use error::{Error, Result};
