//! Finite-truncation toolkit for the Hardy space over the polydisc.
//!
//! The crate models `H^2(D^n)` by monomials with per-variable degree caps and
//! provides shifts, multipliers, Szegő kernels, finite Blaschke products,
//! subspaces with Wold decompositions, and the factorization of doubly
//! commuting mixed invariant subspaces into `Θ H^2(D^k) ⊗ Q_1 ⊗ … ⊗ Q_{n-k}`.
//!
//! Monomials are ordered lexicographically with the last variable fastest;
//! see [`grid::ORDERING`].

pub mod error;
pub mod grid;
pub mod hardy;
pub mod instances;
pub mod io;
pub mod numkernel;
pub mod par;
pub mod subspace;
pub mod theorems;

pub use error::{Error, Result};
pub use grid::{GridSplit, MultiIndex, TruncationGrid};
pub use hardy::{HardyElement, InnerFunction, InnerStructure, KernelPoint};
pub use numkernel::{OperatorMatrix, RankDecision};
pub use subspace::{Classification, CompressedTuple, DCReport, Invariance, Layout, Subspace};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Default relative threshold for numerical rank decisions.
pub const DEFAULT_RANK_EPSILON: f64 = 1e-8;

/// Default tolerance for invariance and commutation verdicts.
pub const DEFAULT_TOL: f64 = 1e-8;
