//! Bloch-model tensor algebra, local symmetry actions, and numerically
//! verified rational invariants for multi-qubit X-states.
//!
//! An X-state on `n` qubits is a mixed state that preserves the parity
//! grading of the computational basis in some product frame. This crate
//! realizes the objects surrounding that definition over the complex
//! numbers — the sparse Bloch expansion of states ([`bloch`]), the local
//! symmetry group of per-qubit complex rotations and its Lie algebra
//! ([`group`]), the linear fibers attached to a frame with their
//! dimension formulas and the two-qubit normal form ([`geometry`]), the
//! invariant function chains that generate the invariant rational
//! functions ([`invariants`]) — and certifies the resulting dimension and
//! independence claims with seeded Jacobian-rank and residual suites
//! ([`verify`]) available both as a library API and through the `xstates`
//! binary ([`cli`]).
//!
//! The numbers the verification suites pin down at desk scale (`n = 2, 3,
//! 4`): the X-state variety has dimension `2^(2n-1) + 2n - 1`, generic
//! symmetry orbits have dimension `3n`, and the field of invariant
//! rational functions is purely transcendental of degree
//! `2^(2n-1) - n - 1` — concretely 5, 28, and 123.
//!
//! ```
//! use xstates::geometry::{dim_formulas, random_xstate, reduce_to_section2};
//! use xstates::invariants::p_invariants;
//!
//! let dims = dim_formulas(2).unwrap();
//! assert_eq!(dims.dim_variety, 11);
//! assert_eq!(dims.trdeg, 5);
//!
//! // Invariants are constant on orbits; the reducer recovers the orbit's
//! // section representative.
//! let (state, _) = random_xstate(2, 1).unwrap();
//! let (_, section) = reduce_to_section2(&state, 1e-8).unwrap();
//! let p = p_invariants(&state).unwrap();
//! let q = p_invariants(&xstates::geometry::section_embed2(&section)).unwrap();
//! assert!(p.max_relative_difference(&q) < 1e-8);
//! ```
//!
//! A narrative guide with runnable examples lives in `book/`; its code
//! blocks are compiled as doctests, so the book and the library cannot
//! drift apart.

pub mod bloch;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod group;
pub mod invariants;
pub mod json;
pub mod rng;
pub mod verify;

pub use bloch::C64;
pub use error::{Error, Result};

// Compile and run every code block of the guide as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bloch-model.md")]
    mod bloch_model {}
    #[doc = include_str!("../../../book/src/local-symmetries.md")]
    mod local_symmetries {}
    #[doc = include_str!("../../../book/src/x-states.md")]
    mod x_states {}
    #[doc = include_str!("../../../book/src/two-qubit-section.md")]
    mod two_qubit_section {}
    #[doc = include_str!("../../../book/src/quotient-coordinates.md")]
    mod quotient_coordinates {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli_reference {}
}
