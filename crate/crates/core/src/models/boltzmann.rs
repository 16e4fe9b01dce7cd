//! Linear Boltzmann equation with isotropic scattering in discrete
//! ordinates, `∂_t f_k + ξ_k·∇f_k = Σ_m w_m f_m − f_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{Basis, SplitTerm};
use crate::grid::{unflatten, Factor, Grid, KronOperator, PGrid};
use crate::linalg::{c64, eigh, max_norm, CMatrix, C64, ZERO};
use crate::ode::{LiftedTerm, SchrodingerisedSystem};
use crate::warp::extend_initial;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// `ξ = ±1`, `w = 1/2`.
    pub fn two_point() -> Self {
        QuadratureRule {
            points: vec![vec![1.0], vec![-1.0]],
            weights: vec![0.5, 0.5],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.is_empty() || self.points.len() != self.weights.len() {
            return Err(Error::InvalidArgument(
                "quadrature needs matching, non-empty points and weights".into(),
            ));
        }
        if let Some(w) = self.weights.iter().find(|&&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument(format!("quadrature weight {w} is not positive")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "quadrature weights sum to {total}, expected 1"
            )));
        }
        for xi in &self.points {
            if xi.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: xi.len(),
                });
            }
            let norm: f64 = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "quadrature point {xi:?} is not a unit vector"
                )));
            }
        }
        Ok(())
    }

    /// `Λ_w^{1/2} Ξ Λ_w^{1/2} − I` with `Ξ` the all-ones matrix.
    pub fn collision_matrix(&self) -> CMatrix {
        let s: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let n = s.len();
        CMatrix::from_fn(n, n, |i, j| {
            c64(s[i] * s[j] - if i == j { 1.0 } else { 0.0 }, 0.0)
        })
    }
}

#[derive(Debug, Clone)]
pub struct BoltzmannModel {
    pub quad: QuadratureRule,
    pub grid: Grid,
    /// `H = −Σ_l Λ_{ξ_l} ⊗ P_l ⊗ I − S ⊗ I ⊗ P_μ` on `(ordinate, x, p)`.
    pub system: SchrodingerisedSystem,
    sqrt_w: Vec<f64>,
}

/// `f0` is indexed `(ordinate, flat x)`.
pub fn build_boltzmann(
    quad: &QuadratureRule,
    grid: &Grid,
    pgrid: &PGrid,
    f0: &[C64],
) -> Result<BoltzmannModel> {
    quad.validate(grid.d)?;
    let nq = quad.len();
    let nx = grid.total();
    if f0.len() != nq * nx {
        return Err(Error::DimensionMismatch {
            expected: nq * nx,
            got: f0.len(),
        });
    }
    let sqrt_w: Vec<f64> = quad.weights.iter().map(|w| w.sqrt()).collect();
    let mu = grid.mu();
    let mut outer_dims = vec![nq];
    outer_dims.extend(grid.dims());
    let mut terms = Vec::new();
    for l in 0..grid.d {
        let xi: Vec<C64> = quad.points.iter().map(|p| c64(-p[l], 0.0)).collect();
        let mut factors = vec![Factor::Diagonal(xi)];
        factors.extend((0..grid.d).map(|k| {
            if k == l {
                Factor::Momentum(mu.clone())
            } else {
                Factor::Identity(grid.m)
            }
        }));
        terms.push(LiftedTerm::new(KronOperator::new(factors), 0));
    }
    let s = quad.collision_matrix();
    let has_collision = max_norm(&s) > 1e-15;
    if has_collision {
        let mut factors = vec![Factor::Dense(-&s)];
        factors.extend((0..grid.d).map(|_| Factor::Identity(grid.m)));
        terms.push(LiftedTerm::new(KronOperator::new(factors), 1));
    }
    let ft0: Vec<C64> = f0
        .iter()
        .enumerate()
        .map(|(k, z)| z * sqrt_w[k / nx])
        .collect();
    let mut w0 = extend_initial(&ft0, pgrid)?;
    w0.grid = Some(grid.clone());

    let eta = pgrid.eta();
    let np = pgrid.n;
    let mut transport_bases = vec![Basis::Position];
    transport_bases.extend((0..grid.d).map(|_| Basis::Fourier));
    transport_bases.push(Basis::Fourier);
    let transport_theta: Vec<f64> = (0..nq * nx * np)
        .map(|idx| {
            let k = idx / (nx * np);
            let j = unflatten((idx / np) % nx, grid.m, grid.d);
            -(0..grid.d).map(|l| quad.points[k][l] * mu[j[l]]).sum::<f64>()
        })
        .collect();
    let mut split = vec![SplitTerm {
        bases: transport_bases,
        theta: transport_theta,
    }];
    if has_collision {
        let (lam, q) = eigh(&s)?;
        let mut bases = vec![Basis::eigen(q)];
        bases.extend((0..grid.d).map(|_| Basis::Position));
        bases.push(Basis::Fourier);
        split.push(SplitTerm {
            bases,
            theta: (0..nq * nx * np)
                .map(|idx| -lam[idx / (nx * np)] * eta[idx % np])
                .collect(),
        });
    }
    let system = SchrodingerisedSystem::new(outer_dims, pgrid.clone(), terms, w0)?
        .with_splitting(split);
    Ok(BoltzmannModel {
        quad: quad.clone(),
        grid: grid.clone(),
        system,
        sqrt_w,
    })
}

impl BoltzmannModel {
    /// `f_k = w_k^{−1/2} F̃_k` for a recovered outer vector.
    pub fn to_f(&self, ft: &[C64]) -> Vec<C64> {
        let nx = self.grid.total();
        ft.iter()
            .enumerate()
            .map(|(k, z)| z / self.sqrt_w[k / nx])
            .collect()
    }

    /// `Σ_k w_k Σ_j f_k(x_j)` from a recovered `F̃`.
    pub fn mass(&self, ft: &[C64]) -> C64 {
        let nx = self.grid.total();
        ft.iter()
            .enumerate()
            .fold(ZERO, |acc, (k, z)| acc + z * self.sqrt_w[k / nx])
    }
}
