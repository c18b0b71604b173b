//! Numerical workbench for the C*-algebra A generated by an isometry T and a
//! normal S with T*T = I, S*S = SS*, TT* + S*S = I — the common carrier of
//! every quantum SU_q(2), q ∈ [0,1) — on truncated copies of ℓ²(ℕ×ℤ).
//!
//! The crate builds the comultiplications Δ_q through spectral-projection and
//! polar-decomposition functional calculus, the explicit orthonormal vectors
//! f^q spanning the range of Δ_q(S*S), the partial isometry Ũ_q and its
//! unitary extension U_q that intertwines Δ_0 and Δ_q, and the
//! multiplier-algebra lifts needed to probe the 2-cocycle identity for Ω_q.
//! Every identity is checked with an explicit residual and a computed error
//! budget; nothing is asserted against a hand-tuned constant.

pub mod algebra;
pub mod cocycle;
pub mod comult;
pub mod error;
pub mod multiplier;
pub mod operator;
pub mod report;
pub mod window;

pub use error::{Error, Result};
