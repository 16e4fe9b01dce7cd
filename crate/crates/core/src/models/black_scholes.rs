//! Time-reversed Black-Scholes equation in log-price,
//! `∂_τ V = (r − σ²/2)∂_x V + (σ²/2)∂_xx V − rV`.

use crate::error::{Error, Result};
use crate::grid::{Factor, Grid, KronOperator, PGrid};
use crate::linalg::{c64, real_diag, CMatrix, C64};
use crate::ode::{LiftedTerm, SchrodingerisedSystem};
use crate::warp::extend_initial_on;

#[derive(Debug, Clone)]
pub struct BlackScholesModel {
    pub r: f64,
    pub sigma: f64,
    /// `H = (r − σ²/2)(P_μ ⊗ I) + (σ²/2 P_μ² + r) ⊗ P_μ`.
    pub system: SchrodingerisedSystem,
    /// Dissipative part in the x-frequency basis, `−(σ²/2 D_μ² + r)`.
    pub h1_tilde: CMatrix,
    /// Oscillatory part in the x-frequency basis, `(r − σ²/2) D_μ`.
    pub h2_tilde: CMatrix,
    /// Both parts are diagonal in the same basis.
    pub commuting: bool,
}

pub fn build_black_scholes(
    r: f64,
    sigma: f64,
    grid: &Grid,
    pgrid: &PGrid,
    v0: &[C64],
) -> Result<BlackScholesModel> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if grid.d != 1 {
        return Err(Error::Unsupported("Black-Scholes is one-dimensional in log-price".into()));
    }
    let mu = grid.mu();
    let drift = r - 0.5 * sigma * sigma;
    let diffusion: Vec<C64> = mu
        .iter()
        .map(|&m| c64(0.5 * sigma * sigma * m * m + r, 0.0))
        .collect();
    let terms = vec![
        LiftedTerm::new(
            KronOperator::new(vec![Factor::Momentum(mu.clone())]).scaled(c64(drift, 0.0)),
            0,
        ),
        LiftedTerm::new(KronOperator::new(vec![Factor::Fourier(diffusion.clone())]), 1),
    ];
    let w0 = extend_initial_on(grid, v0, pgrid)?;
    let system = SchrodingerisedSystem::new(grid.dims(), pgrid.clone(), terms, w0)?;
    Ok(BlackScholesModel {
        r,
        sigma,
        system,
        h1_tilde: real_diag(&diffusion.iter().map(|z| -z.re).collect::<Vec<_>>()),
        h2_tilde: real_diag(&mu.iter().map(|m| drift * m).collect::<Vec<_>>()),
        commuting: true,
    })
}

impl BlackScholesModel {
    /// Entry of the doubly diagonalised Hamiltonian for x-mode `μ` and
    /// p-mode `η`.
    pub fn entry(&self, mu: f64, eta: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (self.r - 0.5 * s2) * mu + (0.5 * s2 * mu * mu + self.r) * eta
    }
}
