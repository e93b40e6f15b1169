//! Numerical laboratory for fundamental solutions of 2x2 Fourier-mode wave
//! systems with oscillating time-dependent dissipation.
//!
//! The object of study is the matrix E(t, s, xi) solving
//!
//! ```text
//! D_t E = A(t, xi) E,   E(s, s, xi) = I,
//! A(t, xi) = [ 0      |xi|    ]        D_t = -i d/dt,
//!            [ |xi|   2 i b(t)]
//! ```
//!
//! where the dissipation splits as 2 b(t) = mu(t) + sigma(t) into a decaying
//! shape mu and an oscillating zero-mean part sigma. The crate provides:
//!
//! * coefficient families with closed-form derivative jets ([`coeffs`]);
//! * the stabilisation functional and limit estimation ([`stabilize`]);
//! * the zone decomposition of the (t, xi) plane ([`zones`]);
//! * direct high-accuracy propagators and the dissipative-zone Volterra
//!   iteration ([`propagator`]);
//! * the stepwise diagonalization ladder, phase-integral reconstruction in
//!   the hyperbolic zone, and the intermediate-zone factorization ([`diag`]);
//! * two-sided envelope verification, decay-rate fits, and the scattering
//!   mode limit ([`verify`]);
//! * serialization of runs ([`report`]) and the command-line surface
//!   ([`cli`]).

pub mod cli;
pub mod coeffs;
pub mod fit;
pub mod jet;
pub mod stabilize;
pub mod mat2;
pub mod diag;
pub mod propagator;
pub mod quad;
pub mod report;
pub mod verify;
pub mod zones;

/// The user guide. Each chapter of the rendered book (`book/src`) is the
/// documentation of one module here, so every example in the guide compiles
/// and runs with `cargo test --doc`.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/coefficients.md")]
    pub mod coefficients {}
    #[doc = include_str!("../../../book/src/stabilisation.md")]
    pub mod stabilisation {}
    #[doc = include_str!("../../../book/src/zones.md")]
    pub mod zones {}
    #[doc = include_str!("../../../book/src/propagator.md")]
    pub mod propagator {}
    #[doc = include_str!("../../../book/src/diagonalization.md")]
    pub mod diagonalization {}
    #[doc = include_str!("../../../book/src/verification.md")]
    pub mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
