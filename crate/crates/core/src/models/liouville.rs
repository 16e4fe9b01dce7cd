//! Liouville transport `∂_t ρ + ∇·(Fρ) = 0` for a nonlinear ODE
//! `dq/dt = F(q)`, read back through the first moment of `ρ`.

use crate::error::{Error, Result};
use crate::grid::{unflatten, Grid};
use crate::linalg::{c64, real_diag, CMatrix, C64, I};
use crate::models::fokker_planck::momentum_dense;
use crate::ode::LinearSystem;

#[derive(Debug, Clone)]
pub struct LiouvilleModel {
    pub grid: Grid,
    pub omega: f64,
    pub q0: Vec<f64>,
    /// `A = −i Σ_l P_l Λ_{F_l}`, `b = 0`, `u₀ = δ_ω(x − q₀)`.
    pub system: LinearSystem,
}

/// Periodised Gaussian of width `ω` centred at `q0`, with unit discrete mass.
pub fn smoothed_delta(grid: &Grid, q0: &[f64], omega: f64) -> Vec<f64> {
    let len = grid.b - grid.a;
    let mut rho: Vec<f64> = (0..grid.total())
        .map(|n| {
            let x = grid.node(&unflatten(n, grid.m, grid.d));
            x.iter()
                .zip(q0)
                .map(|(&xl, &ql)| {
                    (-3..=3)
                        .map(|k| {
                            let r = xl - ql + k as f64 * len;
                            (-0.5 * r * r / (omega * omega)).exp()
                        })
                        .sum::<f64>()
                })
                .product()
        })
        .collect();
    let mass: f64 = rho.iter().sum::<f64>() * grid.dx().powi(grid.d as i32);
    rho.iter_mut().for_each(|r| *r /= mass);
    rho
}

pub fn build_liouville(
    f: impl Fn(&[f64]) -> Vec<f64>,
    grid: &Grid,
    omega: f64,
    q0: &[f64],
) -> Result<LiouvilleModel> {
    grid.validate()?;
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    if q0.len() != grid.d {
        return Err(Error::DimensionMismatch {
            expected: grid.d,
            got: q0.len(),
        });
    }
    if let Some(q) = q0
        .iter()
        .find(|&&q| q - 3.0 * omega <= grid.a || q + 3.0 * omega >= grid.b)
    {
        return Err(Error::InvalidArgument(format!(
            "initial point {q} is within 3 omega of the boundary; the density would wrap"
        )));
    }
    let n = grid.total();
    let mut fields = vec![vec![0.0; n]; grid.d];
    for k in 0..n {
        let j = unflatten(k, grid.m, grid.d);
        let v = f(&grid.node(&j));
        if v.len() != grid.d {
            return Err(Error::DimensionMismatch {
                expected: grid.d,
                got: v.len(),
            });
        }
        for (l, &fl) in v.iter().enumerate() {
            if !fl.is_finite() {
                return Err(Error::NonFinite { node: j, value: fl });
            }
            fields[l][k] = fl;
        }
    }
    let mut a = CMatrix::zeros(n, n);
    for (l, fl) in fields.iter().enumerate() {
        a += momentum_dense(grid, l) * real_diag(fl);
    }
    let a = a * (-I);
    let u0: Vec<C64> = smoothed_delta(grid, q0, omega)
        .into_iter()
        .map(|r| c64(r, 0.0))
        .collect();
    Ok(LiouvilleModel {
        grid: grid.clone(),
        omega,
        q0: q0.to_vec(),
        system: LinearSystem::new(a, None, u0)?,
    })
}

/// First moment `Σ x ρ Δx^d / Σ ρ Δx^d` per axis.
pub fn moment_recover(rho: &[C64], grid: &Grid) -> Vec<f64> {
    let total: f64 = rho.iter().map(|z| z.re).sum();
    (0..grid.d)
        .map(|l| {
            rho.iter()
                .enumerate()
                .map(|(k, z)| grid.node(&unflatten(k, grid.m, grid.d))[l] * z.re)
                .sum::<f64>()
                / total
        })
        .collect()
}

/// Discrete mass `Σ ρ Δx^d`.
pub fn mass(rho: &[C64], grid: &Grid) -> C64 {
    rho.iter().sum::<C64>() * grid.dx().powi(grid.d as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::dense_expm_oracle;

    fn grid() -> Grid {
        Grid::new(-1.0, 1.0, 128, 1).unwrap()
    }

    #[test]
    fn zero_field_is_stationary() {
        let g = grid();
        let m = build_liouville(|_| vec![0.0], &g, 0.05, &[0.3]).unwrap();
        assert!(crate::linalg::max_norm(&m.system.a) == 0.0);
        let q = moment_recover(&m.system.u0, &g);
        assert!((q[0] - 0.3).abs() < 1e-10);
    }

    #[test]
    fn rejects_points_near_the_edge() {
        let g = grid();
        assert!(build_liouville(|q| vec![-q[0]], &g, 0.05, &[0.9]).is_err());
    }

    #[test]
    fn mass_is_conserved_by_the_generator() {
        let g = grid();
        let m = build_liouville(|q| vec![-q[0]], &g, 0.05, &[0.5]).unwrap();
        let m0 = mass(&m.system.u0, &g);
        assert!((m0.re - 1.0).abs() < 1e-12);
        let r = dense_expm_oracle(&m.system.a, &m.system.u0, 1.0).unwrap();
        assert!((mass(&r, &g) - m0).norm() < 1e-8);
        let q = moment_recover(&r, &g);
        assert!((q[0] - 0.5 * (-1.0f64).exp()).abs() < 5e-3);
    }
}
