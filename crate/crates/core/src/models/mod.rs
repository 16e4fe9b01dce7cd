//! Builders that turn concrete PDEs into lifted Hamiltonians or linear
//! systems.

pub mod black_scholes;
pub mod boltzmann;
pub mod convection;
pub mod fokker_planck;
pub mod heat;
pub mod liouville;

use crate::evolve::{Basis, SplitTerm};
use crate::grid::{unflatten, Grid};

/// `Σ_l μ_{j_l}²` over the flat spatial index.
pub(crate) fn laplacian_symbol(grid: &Grid) -> Vec<f64> {
    let mu = grid.mu();
    (0..grid.total())
        .map(|n| unflatten(n, grid.m, grid.d).iter().map(|&l| mu[l] * mu[l]).sum())
        .collect()
}

/// Split term `diag(a) ⊗ D_μ` over `(x, p)`, with `a` indexed by the flat
/// spatial index and diagonal in the given spatial basis.
pub(crate) fn x_times_eta(a: &[f64], eta: &[f64], d: usize, basis: Basis) -> SplitTerm {
    let mut bases = vec![basis; d];
    bases.push(Basis::Fourier);
    SplitTerm {
        bases,
        theta: a
            .iter()
            .flat_map(|&x| eta.iter().map(move |&e| x * e))
            .collect(),
    }
}
