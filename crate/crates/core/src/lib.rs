//! Random sparse linear systems over finite fields.
//!
//! The crate covers exact arithmetic in GF(q), sparse elimination (rank,
//! kernels, frozen variables, relations), the random k-XORSAT ensemble with
//! pinning, 2-core peeling, Warning Propagation, the threshold functions
//! `φ`/`Φ` with `d_k` and `d_k*`, and a seeded experiment harness.

mod dense;
pub mod ensemble;
pub mod error;
pub mod galois;
pub mod harness;
pub mod peel;
pub mod spmat;
pub mod theory;
pub mod wp;

pub use error::{Error, Result};
pub use galois::{FieldElement, FieldSpec};
pub use spmat::SparseMatrix;
