//! Classical emulation of Schrödingerisation.
//!
//! Linear PDEs and linear ODE systems `du/dt = Au + b` are lifted onto an
//! extra auxiliary variable `p` with the warped phase transformation
//! `w = e^{-p} u`. After a Fourier transform in `p` the lifted system is
//! Hamiltonian, so it can be advanced with unitary evolution only. The
//! crate provides:
//!
//! * [`grid`]: periodic lattices, the spectral matrices `Φ`, `D_μ`, `P_μ`
//!   and matrix-free Kronecker operators;
//! * [`warp`]: the warped initial data, recovery of `u` from `w` and the
//!   `p`-domain sizing rules;
//! * [`ode`]: Hermitian splitting and assembly of the lifted Hamiltonian for
//!   arbitrary linear systems;
//! * [`evolve`]: exact diagonal, first-order Trotter, upwind finite
//!   difference and dense matrix-exponential engines;
//! * [`dilation`]: the parity-dilating unitary ladder with deferred
//!   post-selection;
//! * [`models`]: builders for the heat, convection, Black-Scholes,
//!   Fokker-Planck, linear Boltzmann and Liouville equations;
//! * [`resources`]: leading-order gate and query counts;
//! * [`runner`]: JSON-configured experiments that emit CSV data.

pub mod dilation;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod linalg;
pub mod models;
pub mod ode;
pub mod resources;
pub mod runner;
pub mod warp;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
