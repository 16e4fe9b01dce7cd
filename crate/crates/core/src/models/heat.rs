//! `∂_t u = Δu + V(x)u` on the periodic box.

use crate::error::{Error, Result};
use crate::evolve::{Basis, FdTransport};
use crate::grid::{sample, Factor, Grid, KronOperator, PGrid};
use crate::linalg::{c64, CMatrix, C64};
use crate::ode::{LiftedTerm, SchrodingerisedSystem};
use crate::warp::extend_initial_on;

use super::{laplacian_symbol, x_times_eta};

/// `H = (Σ_l P_l² − V) ⊗ P_μ`, with the Trotter pair
/// `H_D = Σ_l (D_l^μ)² ⊗ D_μ` (x-frequency) and `−V ⊗ D_μ` (position).
pub fn build_heat(
    v: impl Fn(&[f64]) -> f64,
    grid: &Grid,
    pgrid: &PGrid,
    u0: &[C64],
) -> Result<SchrodingerisedSystem> {
    let potential = sample(grid, v)?;
    build_heat_sampled(&potential, grid, pgrid, u0)
}

pub fn build_heat_sampled(
    potential: &[f64],
    grid: &Grid,
    pgrid: &PGrid,
    u0: &[C64],
) -> Result<SchrodingerisedSystem> {
    if potential.len() != grid.total() {
        return Err(Error::DimensionMismatch {
            expected: grid.total(),
            got: potential.len(),
        });
    }
    let mu = grid.mu();
    let mut terms: Vec<LiftedTerm> = (0..grid.d)
        .map(|l| {
            let factors = (0..grid.d)
                .map(|k| {
                    if k == l {
                        Factor::MomentumSquared(mu.clone())
                    } else {
                        Factor::Identity(grid.m)
                    }
                })
                .collect();
            LiftedTerm::new(KronOperator::new(factors), 1)
        })
        .collect();
    let has_potential = potential.iter().any(|&x| x != 0.0);
    if has_potential {
        let factors = vec![Factor::Diagonal(
            potential.iter().map(|&x| c64(-x, 0.0)).collect(),
        )];
        terms.push(LiftedTerm::new(KronOperator::new(factors), 1));
    }
    let w0 = extend_initial_on(grid, u0, pgrid)?;
    let sys = SchrodingerisedSystem::new(grid.dims(), pgrid.clone(), terms, w0)?;
    let eta = pgrid.eta();
    let mut split = vec![x_times_eta(&laplacian_symbol(grid), &eta, grid.d, Basis::Fourier)];
    if has_potential {
        let neg: Vec<f64> = potential.iter().map(|&x| -x).collect();
        split.push(x_times_eta(&neg, &eta, grid.d, Basis::Position));
    }
    Ok(sys.with_splitting(split))
}

/// Periodic second-difference Laplacian `Σ_l I ⊗ … ⊗ L₁ ⊗ … ⊗ I`, where
/// `L₁ = tridiag(1, −2, 1)/Δx²` with wraparound corners.
pub fn periodic_laplacian(m: usize, dx: f64, d: usize) -> CMatrix {
    let n = m.pow(d as u32);
    let h2 = 1.0 / (dx * dx);
    let mut a = CMatrix::zeros(n, n);
    for idx in 0..n {
        let j = crate::grid::unflatten(idx, m, d);
        for l in 0..d {
            for shift in [m - 1, 1] {
                let mut k = j.clone();
                k[l] = (k[l] + shift) % m;
                a[(idx, crate::grid::flatten(&k, m))] += c64(h2, 0.0);
            }
            a[(idx, idx)] -= c64(2.0 * h2, 0.0);
        }
    }
    a
}

/// Upwind transport `∂_t w + (Δ_h + V)∂_p w = 0`.
pub fn heat_fd_transport(grid: &Grid, pgrid: &PGrid, potential: Option<&[f64]>) -> Result<FdTransport> {
    let mut a = periodic_laplacian(grid.m, grid.dx(), grid.d);
    if let Some(v) = potential {
        for (k, &x) in v.iter().enumerate() {
            a[(k, k)] += c64(x, 0.0);
        }
    }
    FdTransport::new(a, pgrid.dp(), pgrid.n)
}

/// `e^{−π² d t} Π_l sin(πx_l)`-style exact solutions are built by callers;
/// this evaluates a single-mode decay `e^{−s t} u₀`.
pub fn decayed(u0: &[C64], s: f64, t: f64) -> Vec<C64> {
    let f = (-s * t).exp();
    u0.iter().map(|z| z * f).collect()
}
