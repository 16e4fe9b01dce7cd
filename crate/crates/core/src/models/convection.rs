//! `∂_t u + Σ_l ∂_{x_l} u = 0` via `w = sin(p) u` on `p ∈ [−π, π)`, and the
//! direct Hamiltonian form.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::evolve::evolve_exact_diagonal;
use crate::grid::{phi_apply, phi_inverse_apply, unflatten, Factor, Grid, KronOperator, PGrid};
use crate::linalg::{c64, C64, ZERO};
use crate::ode::{LiftedTerm, SchrodingerisedSystem};
use crate::warp::WarpedState;

/// Periodic `p` lattice on `[−π, π)`; the decay fields are unused.
pub fn sin_pgrid(n: usize) -> Result<PGrid> {
    PGrid::new(-PI, PI, n, 1.0, -PI / 2.0)
}

#[derive(Debug, Clone)]
pub struct ConvectionModel {
    pub grid: Grid,
    /// `H = −Σ_l P_l ⊗ P_μ²` acting on `sin(p) u`.
    pub system: SchrodingerisedSystem,
}

pub fn build_convection(grid: &Grid, n_p: usize, u0: &[C64]) -> Result<ConvectionModel> {
    if u0.len() != grid.total() {
        return Err(Error::DimensionMismatch {
            expected: grid.total(),
            got: u0.len(),
        });
    }
    let pgrid = sin_pgrid(n_p)?;
    let mu = grid.mu();
    let terms = (0..grid.d)
        .map(|l| {
            let factors = (0..grid.d)
                .map(|k| {
                    if k == l {
                        Factor::Momentum(mu.clone())
                    } else {
                        Factor::Identity(grid.m)
                    }
                })
                .collect();
            LiftedTerm::new(KronOperator::new(factors).scaled(c64(-1.0, 0.0)), 2)
        })
        .collect();
    let s: Vec<f64> = pgrid.points().iter().map(|p| p.sin()).collect();
    let values = u0
        .iter()
        .flat_map(|&u| s.iter().map(move |&sj| u * sj))
        .collect();
    let w0 = WarpedState {
        values,
        outer_dim: grid.total(),
        grid: Some(grid.clone()),
        pgrid: pgrid.clone(),
        t: 0.0,
    };
    Ok(ConvectionModel {
        grid: grid.clone(),
        system: SchrodingerisedSystem::new(grid.dims(), pgrid, terms, w0)?,
    })
}

/// `Σ_l μ_{j_l}` over the flat spatial index.
fn mu_sum(grid: &Grid) -> Vec<f64> {
    let mu = grid.mu();
    (0..grid.total())
        .map(|n| unflatten(n, grid.m, grid.d).iter().map(|&l| mu[l]).sum())
        .collect()
}

impl ConvectionModel {
    /// Diagonal of `−Σ_l D_l^μ ⊗ D_μ²` in the full Fourier basis.
    pub fn generator_diagonal(&self) -> Vec<f64> {
        let eta = self.system.pgrid.eta();
        mu_sum(&self.grid)
            .iter()
            .flat_map(|&m| eta.iter().map(move |&e| -m * e * e))
            .collect()
    }

    /// Diagonal of the direct generator `−Σ_l D_l^μ`.
    pub fn direct_diagonal(&self) -> Vec<f64> {
        mu_sum(&self.grid).iter().map(|m| -m).collect()
    }

    /// `u(t)` from the direct form `du/dt = i(−Σ_l P_l)u`.
    pub fn evolve_direct(&self, u0: &[C64], t: f64) -> Result<Vec<C64>> {
        let dims = self.grid.dims();
        let mut v = u0.to_vec();
        for axis in 0..self.grid.d {
            phi_inverse_apply(&mut v, &dims, axis);
        }
        let mut out = evolve_exact_diagonal(&self.direct_diagonal(), &v, t)?;
        for axis in 0..self.grid.d {
            phi_apply(&mut out, &dims, axis);
        }
        Ok(out)
    }

    /// Least-squares projection onto `sin(p)`:
    /// `u = Σ_j sin(p_j) w(·, p_j) / Σ_j sin²(p_j)`.
    pub fn recover(&self, w: &[C64]) -> Vec<C64> {
        let s: Vec<f64> = self.system.pgrid.points().iter().map(|p| p.sin()).collect();
        let norm: f64 = s.iter().map(|x| x * x).sum();
        let n = s.len();
        (0..self.grid.total())
            .map(|o| {
                w[o * n..(o + 1) * n]
                    .iter()
                    .zip(&s)
                    .fold(ZERO, |acc, (z, &sj)| acc + z * sj)
                    / norm
            })
            .collect()
    }
}
