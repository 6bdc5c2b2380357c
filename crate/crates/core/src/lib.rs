//! Numerics for state-constrained chemical-reaction jump processes and their
//! Hamilton-Jacobi limits.
//!
//! The library covers one pipeline end to end:
//!
//! * [`network`] — reaction networks with mass-action intensities, convex
//!   domains in the positive orthant, and the scaled lattices obtained by
//!   intersecting `h`-spaced states with a domain closure. Jumps that would
//!   leave the domain are suppressed, which is what "state-constrained" means
//!   throughout.
//! * [`simulate`] — exact (Gillespie) simulation of the constrained process,
//!   master-equation integration, and Monte-Carlo estimation of the
//!   log-transformed value `h * log E[exp(u0(X_t)/h)]`.
//! * [`dhje`] — the discrete backward Hamilton-Jacobi equation solved exactly
//!   the same value: implicit-Euler resolvents, the semigroup they generate,
//!   direct ODE integration, and the controlled-process variational form.
//! * [`segment`] — reduction of one-reaction two-species networks to a line
//!   segment, where the lattice becomes a 1-D path.
//! * [`chje`] — the continuous 1-D limit with no-flux (Neumann) boundary
//!   conditions: monotone finite differences, dynamic-programming value
//!   iteration, action/rate functions and mean-field (zero-cost) paths.
//! * [`ldp`] — cross-checks tying the levels together: mesh ladders comparing
//!   exact, sampled and continuum values, concentration bounds, and a known
//!   configuration where the naive continuum boundary condition fails.
//!
//! Mesh functions, graphs and solver outputs are plain owned data; everything
//! is deterministic given seeds, including the `parallel` code paths.

pub mod chje;
pub mod dhje;
pub mod error;
pub mod graph;
pub mod ldp;
pub mod network;
pub mod rng;
pub mod segment;
pub mod simulate;

pub use error::{Error, Result};

/// Library version, embedded in serialized reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
