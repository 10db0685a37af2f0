//! Simulation of a measured system coupled to a measuring apparatus.
//!
//! The joint state `ω(t)` on `S ⊗ M` evolves unitarily under
//! `H = H_S ⊗ I + I ⊗ H_M + H_C`. The crate checks whether the coupling
//! commutes with both free Hamiltonians, propagates the joint state, and
//! reads the apparatus out in a pointer basis, either once per trial or
//! repeatedly.
//!
//! ```
//! use measim::linalg::HermitianOperator;
//! use measim::model::{check_conditions, BipartiteModel};
//!
//! let z = HermitianOperator::pauli_z();
//! let x = HermitianOperator::pauli_x();
//! let qnd = BipartiteModel::new(z.clone(), z.clone(), z.kron(&z)).unwrap();
//! let kicked = BipartiteModel::new(z.clone(), z.clone(), x.kron(&x)).unwrap();
//!
//! assert!(check_conditions(&qnd, 1e-10).unwrap().both_hold());
//! assert!(!check_conditions(&kicked, 1e-10).unwrap().both_hold());
//! ```

// `!(x <= tol)` style comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod measurement;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod sweep;
pub mod tol;

mod csv;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/linear-algebra.md")]
    mod linear_algebra {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/measurement.md")]
    mod measurement {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
