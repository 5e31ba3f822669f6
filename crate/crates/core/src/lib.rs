//! Strong Birkhoff–James orthogonality on finite-dimensional C*-algebras
//! `M_{n_1}(ℂ) ⊕ … ⊕ M_{n_m}(ℂ)`.
//!
//! `x ⊥ˢ y` holds when `‖x + yz‖ ≥ ‖x‖` for every `z` in the algebra.
//! The crate decides this relation in several independent ways, classifies
//! elements by the structure it induces, and builds and checks maps that
//! preserve it.

pub mod algebra;
pub mod error;
pub mod orthograph;
pub mod orthogonality;
pub mod preservers;
pub mod sampling;
pub mod structure;

pub use algebra::{BlockStructure, Element, Frame, SpectralData, Tolerance};
pub use error::{Error, Result};
