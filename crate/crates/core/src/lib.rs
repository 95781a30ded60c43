//! Spectral statistics of one-dimensional matrix-valued random Schrödinger
//! operators `H = -d²/dx² ⊗ I_N + V_ω(x)` with cell-wise i.i.d. disorder.
//!
//! The crate computes Lyapunov spectra of the transfer-matrix cocycle, the
//! integrated density of states (by inertia counting and by a Feynman–Kac
//! Monte-Carlo estimate of its Laplace transform), Kotani's `w`-function,
//! the Thouless relation between them, and empirical regularity diagnostics.

// NaN inputs must fail validation, which `!(x > y)` does and `x <= y` does not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod green;
pub mod ids;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod par;
pub mod regularity;
pub mod stats;
pub mod thouless;
pub mod transfer;

pub use error::{Error, Result};
pub use model::{model2_preset, model2_with, CellPotential, DisorderSpec, Distribution, Realization};
pub use transfer::{cell_transfer, exterior_power, symplectic_residual, SymplecticMatrix};
