//! Computational comparison theory for subalgebras of M_n(C).
//!
//! The toolkit works with a (possibly non-self-adjoint, possibly non-unital)
//! operator algebra A given by generators inside a complex matrix algebra,
//! and the distinguished set S_A of elements whose numerical range sits in
//! the disk |1 - z| <= 1. For such elements it computes fractional powers by
//! an explicit series, support projections, and quotient distances; on top
//! of that calculus it builds tripotents with their Peirce structure,
//! hereditary bimodules with Morita-style corner data, and decision or
//! verification procedures for the Pedersen, Blackadar, and
//! Peligrad-Zsido equivalence relations, together with their
//! ternary-ring-of-operators counterparts.
//!
//! Decision procedures return a [`verdict::Verdict`]: `yes` always carries a
//! re-verified witness, `no` carries a finite refutation, and `unknown` is
//! an explicit budget-exhaustion outcome, never a silent guess.

pub mod algebra;
pub mod bimodule;
pub mod calculus;
pub mod cmatrix;
pub mod equivalence;
pub mod error;
pub mod gen;
pub mod instances;
pub mod subspace;
pub mod tol;
pub mod tripotent;
pub mod tro;
pub mod verdict;

pub use algebra::{
    hsa_check, unit_of, wedderburn, AlgebraJson, Block, BlockDecomposition, OperatorAlgebra,
    SConvention, DEFAULT_SEED,
};
pub use cmatrix::{C64, CMatrix, Polar, Svd};
pub use error::{OatError, Result};
pub use subspace::{MatSubspace, SpanBuilder, SubspaceJson};
pub use tol::Tolerance;
pub use verdict::{Answer, Verdict, Witness};
