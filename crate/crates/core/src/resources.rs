//! Leading-order gate and query counts, evaluated with unit constants and
//! base-2 logarithms. These are comparators, not predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    SchrHeat,
    SchrConvection,
    SchrGeneral,
    SchrSpecial,
    Unitarisation,
    UnitarisationSpecial,
    HamiltonianQuery,
    Boltzmann,
    BlackScholesSchr,
    BlackScholesUnitary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostQuery {
    pub method: Option<Method>,
    pub d: Option<f64>,
    /// Qubits per spatial direction.
    pub m: Option<f64>,
    pub m_p: Option<f64>,
    /// Qubits of the discretised system, `d·m` when absent.
    pub m_d: Option<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub dx: Option<f64>,
    pub dp: Option<f64>,
    pub sparsity: Option<f64>,
    pub norm_max: Option<f64>,
    /// Number of quadrature ordinates.
    pub ordinates: Option<f64>,
    pub epsilon: Option<f64>,
    /// Sparsity of `arccos(H1 Δt)`, dense (`2^{m_d}`) by default.
    pub s_arccos: Option<f64>,
    /// Order of `A`; carried as metadata only.
    pub n_a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub method: Method,
    pub leading: f64,
    /// `log^{3.5}(τ/ε) / loglog(τ/ε)`, reported when `epsilon` is supplied
    /// for a method whose bound hides polylog factors.
    pub polylog: Option<f64>,
    pub formula: String,
}

fn get(v: Option<f64>, name: &'static str) -> Result<f64> {
    let x = v.ok_or(Error::MissingField(name))?;
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(x)
}

/// `x log₂ x`.
fn xlog(x: f64) -> f64 {
    x * x.log2()
}

/// `log₂^{3.5}(x) / log₂ log₂(x)`, defined for `x > 2`.
pub fn polylog(x: f64) -> Result<f64> {
    let l = x.log2();
    let ll = l.log2();
    if !(ll > 0.0) {
        return Err(Error::InvalidArgument(format!("polylog needs τ/ε > 2, got {x}")));
    }
    Ok(l.powf(3.5) / ll)
}

/// `τ log₂(τ/ε) / log₂log₂(τ/ε)`.
pub fn hamiltonian_queries(tau: f64, eps: f64) -> Result<f64> {
    let x = tau / eps;
    let l = x.log2();
    let ll = l.log2();
    if !(ll > 0.0) {
        return Err(Error::InvalidArgument(format!("query bound needs τ/ε > 2, got {x}")));
    }
    Ok(tau * l / ll)
}

impl CostQuery {
    pub fn new(method: Method) -> Self {
        CostQuery {
            method: Some(method),
            ..Default::default()
        }
    }

    fn dm(&self) -> Result<f64> {
        match (self.m_d, self.d, self.m) {
            (Some(_), _, _) => get(self.m_d, "m_d"),
            _ => Ok(get(self.d, "d")? * get(self.m, "m")?),
        }
    }

    fn steps(&self) -> Result<f64> {
        Ok(get(self.t_final, "t_final")? / get(self.dt, "dt")?)
    }

    /// `d·m + m_p`.
    pub fn m_h(&self) -> Result<f64> {
        Ok(self.dm()? + get(self.m_p, "m_p")?)
    }
}

pub fn estimate(q: &CostQuery) -> Result<Estimate> {
    let method = q.method.ok_or(Error::MissingField("method"))?;
    let mut polylog_tau = None;
    let (leading, formula) = match method {
        Method::SchrHeat | Method::SchrSpecial => {
            let n = q.steps()?;
            let d = get(q.d, "d")?;
            let m = get(q.m, "m")?;
            let mp = get(q.m_p, "m_p")?;
            if method == Method::SchrSpecial {
                if let Some(md) = q.m_d {
                    if (md - d * m).abs() > 1e-12 * md {
                        return Err(Error::InvalidArgument(format!("m_d = {md} differs from d·m = {}", d * m)));
                    }
                }
            }
            (n * (d * xlog(m) + xlog(mp)), "T/dt · (d·m·log2(m) + m_p·log2(m_p))")
        }
        Method::SchrConvection => {
            let d = get(q.d, "d")?;
            let m = get(q.m, "m")?;
            ((d + 1.0) * xlog(m), "(d+1)·m·log2(m)")
        }
        Method::SchrGeneral => {
            let md = q.dm()?;
            let mp = get(q.m_p, "m_p")?;
            let s = get(q.sparsity, "sparsity")?;
            let a = get(q.norm_max, "norm_max")?;
            let t = get(q.t_final, "t_final")?;
            let dp = get(q.dp, "dp")?;
            let tau = s * a * t / dp;
            polylog_tau = Some(tau);
            ((md + mp) * tau + xlog(mp), "(m_d + m_p)·s(A)·‖A‖max·T/dp + m_p·log2(m_p)")
        }
        Method::Unitarisation => {
            let md = q.dm()?;
            let n = q.steps()?;
            let s = get(q.sparsity, "sparsity")?;
            let a = get(q.norm_max, "norm_max")?;
            let sarc = match q.s_arccos {
                Some(_) => get(q.s_arccos, "s_arccos")?,
                None => md.exp2(),
            };
            polylog_tau = Some(s * a * get(q.t_final, "t_final")?);
            (md * (n * sarc + s * a), "m_d·(T/dt·s(arccos(H1 dt)) + s(A)·‖A‖max)")
        }
        Method::UnitarisationSpecial => {
            let n = q.steps()?;
            let d = get(q.d, "d")?;
            let m = get(q.m, "m")?;
            (n * d * xlog(m), "T/dt · d·m·log2(m)")
        }
        Method::HamiltonianQuery => {
            let s = get(q.sparsity, "sparsity")?;
            let a = get(q.norm_max, "norm_max")?;
            let t = get(q.t_final, "t_final")?;
            let eps = get(q.epsilon, "epsilon")?;
            (hamiltonian_queries(s * a * t, eps)?, "τ·log2(τ/ε)/log2(log2(τ/ε)), τ = s·‖H‖max·T")
        }
        Method::Boltzmann => {
            let mh = q.m_h()?;
            let nn = get(q.ordinates, "ordinates")?;
            let dp = get(q.dp, "dp")?;
            let dx = get(q.dx, "dx")?;
            let n = q.steps()?;
            let d = get(q.d, "d")?;
            let m = get(q.m, "m")?;
            let mp = get(q.m_p, "m_p")?;
            polylog_tau = Some(mh * nn * nn / dp);
            (
                mh * nn * nn / dp + mh / dx + n * d * xlog(m) + xlog(mp),
                "m_H·N²/dp + m_H/dx + T/dt·d·m·log2(m) + m_p·log2(m_p)",
            )
        }
        Method::BlackScholesSchr => {
            let m = get(q.m, "m")?;
            let mp = get(q.m_p, "m_p")?;
            (xlog(m) + xlog(mp), "m·log2(m) + m_p·log2(m_p)")
        }
        Method::BlackScholesUnitary => {
            let m = get(q.m, "m")?;
            (xlog(m), "m·log2(m)")
        }
    };
    let polylog = match (polylog_tau, q.epsilon) {
        (Some(tau), Some(_)) => Some(polylog(tau / get(q.epsilon, "epsilon")?)?),
        _ => None,
    };
    Ok(Estimate {
        method,
        leading,
        polylog,
        formula: formula.to_string(),
    })
}

/// Mesh for target accuracy `ε` with `d·Δx^ℓ ~ ε`, `Δp ~ ε`:
/// returns `(Δx, m, m_p)` with `m = log₂(1/Δx)`, `m_p = log₂(1/ε)`.
pub fn heat_mesh(d: f64, ell: f64, eps: f64) -> (f64, f64, f64) {
    let dx = (eps / d).powf(1.0 / ell);
    (dx, -dx.log2(), -eps.log2())
}

/// `Δx·(1 + (ℓ/d)·log(1/ε)/log(d/ε))`.
pub fn heat_ratio(dx: f64, ell: f64, d: f64, eps: f64) -> f64 {
    dx * (1.0 + ell / d * (1.0 / eps).ln() / (d / eps).ln())
}

/// Schrödingerisation over unitarisation for the heat equation with
/// `Δt = Δx` and `Δt = Δx²` respectively, log factors inside the QFT
/// counts dropped: `Δx·(1 + m_p/(d·m))`.
pub fn heat_ratio_from_mesh(d: f64, ell: f64, eps: f64) -> f64 {
    let (dx, m, mp) = heat_mesh(d, ell, eps);
    dx * (1.0 + mp / (d * m))
}
