//! The warped phase transformation `w = e^{-p} u`: initial extension to the
//! whole `p` line, recovery of `u` and sizing of the `p` domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{phi_inverse_apply, Grid, PGrid};
use crate::linalg::{c64, C64, ZERO};

/// Lifted state over `(outer register) ⊗ (p lattice)`, `p` innermost.
#[derive(Debug, Clone)]
pub struct WarpedState {
    pub values: Vec<C64>,
    pub outer_dim: usize,
    pub grid: Option<Grid>,
    pub pgrid: PGrid,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RecoveryMethod {
    IntegrateP,
    PointP { p_star: f64 },
}

impl RecoveryMethod {
    pub fn default_for(pgrid: &PGrid) -> Self {
        RecoveryMethod::PointP {
            p_star: pgrid.default_p_star(),
        }
    }
}

impl WarpedState {
    pub fn n_p(&self) -> usize {
        self.pgrid.n
    }

    /// Values at a fixed `p` node, one per outer index.
    pub fn slice_at_p(&self, j: usize) -> Vec<C64> {
        let n = self.pgrid.n;
        (0..self.outer_dim).map(|o| self.values[o * n + j]).collect()
    }

    /// The `p` profile of one outer index.
    pub fn p_line(&self, outer: usize) -> &[C64] {
        let n = self.pgrid.n;
        &self.values[outer * n..(outer + 1) * n]
    }

    pub fn with_values(&self, values: Vec<C64>, t: f64) -> WarpedState {
        WarpedState {
            values,
            t,
            ..self.clone()
        }
    }
}

/// `w₀ = u₀ ⊗ e^{−α(p)|p|}`.
pub fn extend_initial(u0: &[C64], pgrid: &PGrid) -> Result<WarpedState> {
    pgrid.validate()?;
    let g = pgrid.profile();
    let values = u0
        .iter()
        .flat_map(|&u| g.iter().map(move |&gj| u * gj))
        .collect();
    Ok(WarpedState {
        values,
        outer_dim: u0.len(),
        grid: None,
        pgrid: pgrid.clone(),
        t: 0.0,
    })
}

/// As [`extend_initial`], checking `u₀` against a spatial grid.
pub fn extend_initial_on(grid: &Grid, u0: &[C64], pgrid: &PGrid) -> Result<WarpedState> {
    if u0.len() != grid.total() {
        return Err(Error::DimensionMismatch {
            expected: grid.total(),
            got: u0.len(),
        });
    }
    let mut w = extend_initial(u0, pgrid)?;
    w.grid = Some(grid.clone());
    Ok(w)
}

/// Trapezoid weights of the half-line integral `∫₀^∞ · dp` on the lattice.
pub fn integration_weights(pgrid: &PGrid) -> Vec<f64> {
    let dp = pgrid.dp();
    let tol = 1e-9 * dp;
    pgrid
        .points()
        .iter()
        .map(|&p| {
            if p > tol {
                dp
            } else if p.abs() <= tol {
                0.5 * dp
            } else {
                0.0
            }
        })
        .collect()
}

pub fn recover(w: &WarpedState, method: RecoveryMethod) -> Result<Vec<C64>> {
    let n = w.pgrid.n;
    match method {
        RecoveryMethod::IntegrateP => {
            let weights = integration_weights(&w.pgrid);
            Ok((0..w.outer_dim)
                .map(|o| {
                    w.values[o * n..(o + 1) * n]
                        .iter()
                        .zip(&weights)
                        .map(|(z, &q)| z * q)
                        .sum()
                })
                .collect())
        }
        RecoveryMethod::PointP { p_star } => {
            let j = point_index(&w.pgrid, p_star)?;
            let s = p_star.exp();
            Ok(w.slice_at_p(j).into_iter().map(|z| z * s).collect())
        }
    }
}

pub fn point_index(pgrid: &PGrid, p_star: f64) -> Result<usize> {
    if !(p_star > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "p* must be positive, got {p_star}"
        )));
    }
    pgrid.index_of(p_star).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "p* = {p_star} is not a node of the p grid (dp = {})",
            pgrid.dp()
        ))
    })
}

/// `L = L0 − T·s_max`: the fastest left-moving wave stays inside `[L, R)`
/// up to time `T`.
pub fn estimate_domain(t: f64, s_max: f64, l0: f64) -> f64 {
    l0 - t * s_max
}

/// Exact characteristic solution `ŵ_l(t,p) = e^{−α(q)|q|} û₀,l` with
/// `q = p + s_l t`.
pub fn analytic_mode_solution(uhat0: C64, s: f64, t: f64, p: f64, alpha_neg: f64) -> C64 {
    let q = p + s * t;
    let alpha = if q >= 0.0 { 1.0 } else { alpha_neg };
    uhat0 * (-alpha * q.abs()).exp()
}

/// Spatial Fourier coefficients `Φ⁻¹u` over all axes.
pub fn x_modes(u: &[C64], grid: &Grid) -> Vec<C64> {
    let mut v = u.to_vec();
    let dims = grid.dims();
    for axis in 0..grid.d {
        phi_inverse_apply(&mut v, &dims, axis);
    }
    v
}

/// Transport speed `Σ_k μ_{l_k}²` of every spatial mode, in flat order.
pub fn mode_speeds(grid: &Grid) -> Vec<f64> {
    let mu = grid.mu();
    (0..grid.total())
        .map(|n| {
            crate::grid::unflatten(n, grid.m, grid.d)
                .iter()
                .map(|&l| mu[l] * mu[l])
                .sum()
        })
        .collect()
}

/// Largest speed among modes whose amplitude exceeds `1e−8` of the maximum.
pub fn default_s_max(u0: &[C64], grid: &Grid) -> f64 {
    let modes = x_modes(u0, grid);
    let peak = modes.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if peak == 0.0 {
        return 0.0;
    }
    mode_speeds(grid)
        .iter()
        .zip(&modes)
        .filter(|(_, z)| z.norm() > 1e-8 * peak)
        .fold(0.0, |a, (&s, _)| a.max(s))
}

/// Index of the mode with the largest speed among the significant ones.
pub fn dominant_mode(u0: &[C64], grid: &Grid) -> usize {
    let modes = x_modes(u0, grid);
    let peak = modes.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let speeds = mode_speeds(grid);
    let mut best = 0;
    let mut best_s = -1.0;
    for (k, z) in modes.iter().enumerate() {
        if z.norm() > 1e-8 * peak && speeds[k] > best_s {
            best = k;
            best_s = speeds[k];
        }
    }
    best
}

/// Squared 2-norm restricted to `p > 0`.
pub fn positive_half_energy(w: &WarpedState) -> f64 {
    let tol = 1e-9 * w.pgrid.dp();
    let pts = w.pgrid.points();
    let n = w.pgrid.n;
    w.values
        .iter()
        .enumerate()
        .filter(|(k, _)| pts[k % n] > tol)
        .map(|(_, z)| z.norm_sqr())
        .sum()
}

pub fn zeros_like(w: &WarpedState) -> Vec<C64> {
    vec![ZERO; w.values.len()]
}

pub fn real_vec(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| c64(x, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pg() -> PGrid {
        PGrid::new(-5.0, 5.0, 512, 10.0, -1.0).unwrap()
    }

    #[test]
    fn zero_data_extends_to_zero() {
        let w = extend_initial(&[ZERO; 4], &pg()).unwrap();
        assert!(w.values.iter().all(|z| *z == ZERO));
        assert_eq!(w.values.len(), 4 * 512);
    }

    #[test]
    fn symmetric_extension_for_unit_rate() {
        let p = PGrid::new(-4.0, 4.0, 16, 1.0, -1.0).unwrap();
        let g = p.profile();
        // p_j = -4 + j/2, so p_{8+k} = -p_{8-k}
        for k in 1..8 {
            assert!((g[8 + k] - g[8 - k]).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_at_one() {
        let p = PGrid::new(-4.0, 4.0, 8, 7.0, -1.0).unwrap();
        let j = p.index_of(1.0).unwrap();
        assert!((p.profile()[j] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((p.profile()[j] - 0.36788).abs() < 1e-5);
    }

    fn exact_decay(pgrid: &PGrid, u: &[C64]) -> WarpedState {
        let mut w = extend_initial(u, pgrid).unwrap();
        for (k, z) in w.values.iter_mut().enumerate() {
            let p = pgrid.points()[k % pgrid.n];
            *z = u[k / pgrid.n] * (-p).exp();
        }
        w
    }

    #[test]
    fn point_recovery_is_exact_on_pure_decay() {
        let p = pg();
        let u = vec![c64(1.0, 0.5), c64(-2.0, 0.0)];
        let w = exact_decay(&p, &u);
        let first = p.first_positive();
        for j in first..p.n {
            let r = recover(&w, RecoveryMethod::PointP { p_star: p.points()[j] }).unwrap();
            for (a, b) in r.iter().zip(&u) {
                assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn integral_recovery_of_pure_decay() {
        let p = PGrid::new(-5.0, 40.0, 4096, 10.0, -1.0).unwrap();
        let u = vec![c64(1.0, 0.0)];
        let mut w = extend_initial(&u, &p).unwrap();
        for (z, &pj) in w.values.iter_mut().zip(&p.points()) {
            *z = c64((-pj).exp(), 0.0);
        }
        let r = recover(&w, RecoveryMethod::IntegrateP).unwrap();
        // 0 is not a node here; left-rectangle error is O(dp)
        assert!((r[0].re - 1.0).abs() < p.dp());
    }

    #[test]
    fn point_recovery_rejects_bad_points() {
        let p = pg();
        let w = extend_initial(&[c64(1.0, 0.0)], &p).unwrap();
        assert!(recover(&w, RecoveryMethod::PointP { p_star: -0.1 }).is_err());
        assert!(recover(&w, RecoveryMethod::PointP { p_star: 0.0 }).is_err());
        assert!(recover(&w, RecoveryMethod::PointP { p_star: 0.0123 }).is_err());
    }

    #[test]
    fn default_point_is_third_node() {
        let p = pg();
        let dp = p.dp();
        assert!((p.default_p_star() - 3.0 * dp).abs() < 1e-12);
    }

    #[test]
    fn domain_estimates() {
        let tstar = 4.0 / (PI * PI);
        assert!((estimate_domain(tstar, PI * PI, -1.0) + 5.0).abs() < 1e-12);
        assert!((tstar - 0.4053).abs() < 1e-4);
        let l = estimate_domain(1.0, PI * PI, -1.0);
        assert!((l + 10.8696).abs() < 1e-3);
        assert_eq!(estimate_domain(0.0, 3.0, -1.0), -1.0);
    }

    #[test]
    fn analytic_mode_cases() {
        let u = c64(1.0, 0.0);
        assert_eq!(analytic_mode_solution(u, 2.0, 0.0, -0.3, 10.0), u * (-3.0f64).exp());
        assert_eq!(
            analytic_mode_solution(u, 0.0, 5.0, 0.7, 10.0),
            analytic_mode_solution(u, 0.0, 0.0, 0.7, 10.0)
        );
        let v = analytic_mode_solution(u, PI * PI, 0.1, 0.5, 1.0);
        assert!((v.re - (-(0.5 + 0.1 * PI * PI)).exp()).abs() < 1e-15);
        assert!((v.re - 0.2261).abs() < 1e-4);
    }

    #[test]
    fn sine_has_unit_speed_pi_squared() {
        let g = Grid::new(-1.0, 1.0, 16, 1).unwrap();
        let u: Vec<C64> = g.points().iter().map(|&x| c64((PI * x).sin(), 0.0)).collect();
        assert!((default_s_max(&u, &g) - PI * PI).abs() < 1e-12);
    }
}
