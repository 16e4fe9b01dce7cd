//! `∂_t f = σ∇·(e^{−V/σ}∇(e^{V/σ} f))` in the symmetrised variable
//! `ψ = e^{V/(2σ)} f`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Basis;
use crate::grid::{sample, unflatten, Factor, Grid, KronOperator, PGrid};
use crate::linalg::{c64, matvec, real_diag, CMatrix, C64};
use crate::ode::{LiftedTerm, SchrodingerisedSystem};
use crate::warp::extend_initial_on;

use super::{laplacian_symbol, x_times_eta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpForm {
    /// `H = Σ_l B_l ⊗ P_μ`, `B_l = σ e^{V/2σ} P_l e^{−V/σ} P_l e^{V/2σ}`.
    Conservation,
    /// `H = (σ Σ_l P_l² + U) ⊗ P_μ`, `U = |∇V|²/(4σ) − ΔV/2`.
    HeatForm,
}

/// Analytic derivatives of the potential sampled on the grid.
#[derive(Debug, Clone)]
pub struct PotentialDerivatives {
    /// `∂_l V` per axis, flat spatial order.
    pub grad: Vec<Vec<f64>>,
    pub laplacian: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FokkerPlanckModel {
    pub sigma: f64,
    pub form: FpForm,
    pub potential: Vec<f64>,
    pub system: SchrodingerisedSystem,
    /// Samples of `e^{V/(2σ)}`.
    half_weight: Vec<f64>,
}

fn checked_exp(values: &[f64], scale: f64, grid: &Grid) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let e = (v * scale).exp();
            if e.is_finite() && e > 0.0 {
                Ok(e)
            } else {
                Err(Error::NonFinite {
                    node: unflatten(k, grid.m, grid.d),
                    value: e,
                })
            }
        })
        .collect()
}

/// Dense `P_l` on the flattened spatial register.
pub fn momentum_dense(grid: &Grid, l: usize) -> CMatrix {
    let mut factors: Vec<Factor> = (0..grid.d).map(|_| Factor::Identity(grid.m)).collect();
    factors[l] = Factor::Momentum(grid.mu());
    KronOperator::new(factors).to_dense().expect("grid within dense limit")
}

/// `Σ_l A_l e^{V/σ}` scaled by `−σ`: the generator of `f`.
pub fn conservation_generator(potential: &[f64], sigma: f64, grid: &Grid) -> Result<CMatrix> {
    let em = real_diag(&checked_exp(potential, -1.0 / sigma, grid)?);
    let ep = real_diag(&checked_exp(potential, 1.0 / sigma, grid)?);
    let n = grid.total();
    let mut g = CMatrix::zeros(n, n);
    for l in 0..grid.d {
        let p = momentum_dense(grid, l);
        g += &p * &em * &p * &ep;
    }
    Ok(g * c64(-sigma, 0.0))
}

/// Spectral gradient and Laplacian of sampled `V`.
pub fn spectral_derivatives(potential: &[f64], grid: &Grid) -> PotentialDerivatives {
    let v: Vec<C64> = potential.iter().map(|&x| c64(x, 0.0)).collect();
    let dims = grid.dims();
    let mu = grid.mu();
    let mut grad = Vec::with_capacity(grid.d);
    let mut laplacian = vec![0.0; potential.len()];
    for l in 0..grid.d {
        let mut dv = v.clone();
        // ∂ = iP_μ
        let sym: Vec<C64> = mu.iter().map(|&m| c64(0.0, m)).collect();
        crate::grid::fourier_symbol_apply(&mut dv, &dims, l, &sym);
        let mut d2 = v.clone();
        let sym2: Vec<C64> = mu.iter().map(|&m| c64(-m * m, 0.0)).collect();
        crate::grid::fourier_symbol_apply(&mut d2, &dims, l, &sym2);
        for (acc, z) in laplacian.iter_mut().zip(&d2) {
            *acc += z.re;
        }
        grad.push(dv.iter().map(|z| z.re).collect());
    }
    PotentialDerivatives { grad, laplacian }
}

/// `U = |∇V|²/(4σ) − ΔV/2`.
pub fn effective_potential(derivs: &PotentialDerivatives, sigma: f64) -> Vec<f64> {
    derivs
        .laplacian
        .iter()
        .enumerate()
        .map(|(k, &lap)| {
            let g2: f64 = derivs.grad.iter().map(|g| g[k] * g[k]).sum();
            g2 / (4.0 * sigma) - 0.5 * lap
        })
        .collect()
}

pub fn build_fokker_planck(
    v: impl Fn(&[f64]) -> f64,
    derivs: Option<PotentialDerivatives>,
    sigma: f64,
    grid: &Grid,
    pgrid: &PGrid,
    f0: &[C64],
    form: FpForm,
) -> Result<FokkerPlanckModel> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let potential = sample(grid, v)?;
    if f0.len() != grid.total() {
        return Err(Error::DimensionMismatch {
            expected: grid.total(),
            got: f0.len(),
        });
    }
    let half_weight = checked_exp(&potential, 0.5 / sigma, grid)?;
    checked_exp(&potential, 1.0 / sigma, grid)?;
    checked_exp(&potential, -1.0 / sigma, grid)?;
    let psi0: Vec<C64> = f0.iter().zip(&half_weight).map(|(z, &h)| z * h).collect();
    let w0 = extend_initial_on(grid, &psi0, pgrid)?;
    let eta = pgrid.eta();
    let system = match form {
        FpForm::Conservation => {
            let eh = real_diag(&half_weight);
            let mut b = CMatrix::zeros(grid.total(), grid.total());
            let em = real_diag(&checked_exp(&potential, -1.0 / sigma, grid)?);
            for l in 0..grid.d {
                let p = momentum_dense(grid, l);
                b += &eh * &p * &em * &p * &eh;
            }
            b *= c64(sigma, 0.0);
            // exact Hermitian part; the products above are Hermitian up to rounding
            let b = (&b + b.adjoint()) * c64(0.5, 0.0);
            let terms = vec![LiftedTerm::new(KronOperator::new(vec![Factor::Dense(b)]), 1)];
            SchrodingerisedSystem::new(vec![grid.total()], pgrid.clone(), terms, w0)?
        }
        FpForm::HeatForm => {
            let derivs = match derivs {
                Some(d) => d,
                None => {
                    warn!("no analytic derivatives of V supplied; using spectral differentiation");
                    spectral_derivatives(&potential, grid)
                }
            };
            let u = effective_potential(&derivs, sigma);
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
                    LiftedTerm::new(KronOperator::new(factors).scaled(c64(sigma, 0.0)), 1)
                })
                .collect();
            terms.push(LiftedTerm::new(
                KronOperator::new(vec![Factor::Diagonal(
                    u.iter().map(|&x| c64(x, 0.0)).collect(),
                )]),
                1,
            ));
            let lap: Vec<f64> = laplacian_symbol(grid).iter().map(|s| sigma * s).collect();
            let split = vec![
                x_times_eta(&lap, &eta, grid.d, Basis::Fourier),
                x_times_eta(&u, &eta, grid.d, Basis::Position),
            ];
            SchrodingerisedSystem::new(grid.dims(), pgrid.clone(), terms, w0)?
                .with_splitting(split)
        }
    };
    Ok(FokkerPlanckModel {
        sigma,
        form,
        potential,
        system,
        half_weight,
    })
}

impl FokkerPlanckModel {
    pub fn to_psi(&self, f: &[C64]) -> Vec<C64> {
        f.iter().zip(&self.half_weight).map(|(z, &h)| z * h).collect()
    }

    pub fn to_f(&self, psi: &[C64]) -> Vec<C64> {
        psi.iter().zip(&self.half_weight).map(|(z, &h)| z / h).collect()
    }

    /// Relative residual `‖G f_ss‖ / (‖G‖_max ‖f_ss‖)` of the steady state
    /// `f_ss = e^{−V/σ}` under the conservation-form generator.
    pub fn steady_state_residual(&self, grid: &Grid) -> Result<f64> {
        let g = conservation_generator(&self.potential, self.sigma, grid)?;
        let fss: Vec<C64> = self
            .potential
            .iter()
            .map(|&v| c64((-v / self.sigma).exp(), 0.0))
            .collect();
        let r = matvec(&g, &fss);
        let scale = crate::linalg::two_norm(&g) * crate::linalg::vec_norm(&fss);
        Ok(crate::linalg::vec_norm(&r) / scale)
    }
}
