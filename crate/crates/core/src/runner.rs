//! JSON-configured experiments: model assembly, evolution, recovery and
//! CSV/manifest emission.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use exmex::prelude::*;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::evolve::{
    dense_expm_oracle, evolve_system, evolve_upwind_fd, Engine, EvolutionPlan, FdTransport,
    Trajectory,
};
use crate::grid::{phi_inverse_apply, sample, unflatten, Grid, PGrid};
use crate::linalg::{c64, from_real_rows, max_norm, relative_l2, vec_norm, CMatrix, C64};
use crate::models::black_scholes::build_black_scholes;
use crate::models::boltzmann::{build_boltzmann, QuadratureRule};
use crate::models::convection::build_convection;
use crate::models::fokker_planck::{build_fokker_planck, FpForm, PotentialDerivatives};
use crate::models::heat::{build_heat_sampled, heat_fd_transport};
use crate::models::liouville::{build_liouville, mass as density_mass, moment_recover};
use crate::ode::{
    assemble_schrodingerised, default_pgrid, hermitian_split, HermitianSplit, LinearSystem,
    SchrodingerisedSystem,
};
use crate::resources::{estimate, CostQuery, Estimate};
use crate::warp::{default_s_max, dominant_mode, estimate_domain, recover, RecoveryMethod, WarpedState};

/// Growth factor of `‖w‖` over `‖w₀‖` treated as a numerical blow-up.
pub const BLOW_UP: f64 = 1e6;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("numerical blow-up at t = {t}: |w| = {norm:e} exceeds {BLOW_UP:e} |w0|")]
    BlowUp { t: f64, norm: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    /// 2 for schema, grid, CFL and other input errors, 3 for blow-up, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(Error::Numerical(_)) => 1,
            RunError::Core(_) => 2,
            RunError::BlowUp { .. } => 3,
            RunError::Io { .. } => 1,
        }
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub engine: EvolutionPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoveryMethod>,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Echoed into the manifest; no part of a run is random.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Heat,
    Convection,
    BlackScholes,
    FokkerPlanck,
    Boltzmann,
    Liouville,
    LinearOde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pgrid: Option<PGridSpec>,
    #[serde(default)]
    pub params: serde_json::Value,
}

/// `left` defaults to `estimate_domain(T, s_max, l0)` where the model can
/// bound its speeds, `l0` to `−10/alpha_neg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PGridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<f64>,
    pub right: f64,
    pub n: usize,
    pub alpha_neg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0: Option<f64>,
}

impl PGridSpec {
    fn l0(&self) -> f64 {
        self.l0.unwrap_or(-10.0 / self.alpha_neg)
    }

    fn resolve(&self, t_final: f64, s_max: Option<f64>) -> RunResult<PGrid> {
        let l0 = self.l0();
        let left = match (self.left, s_max) {
            (Some(l), _) => l,
            (None, Some(s)) => estimate_domain(t_final, s, l0),
            (None, None) => {
                return Err(RunError::Config(
                    "pgrid.left is required for this model".into(),
                ))
            }
        };
        Ok(PGrid::new(left, self.right, self.n, self.alpha_neg, l0)?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Times at which the recovered field is written; `T` is always added.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default = "yes")]
    pub norm: bool,
    #[serde(default)]
    pub mass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_profile: Option<ModeChoice>,
    /// Node `p*` at which the `x` profile `|w(·, p*)|` is written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_profile_at: Option<f64>,
    #[serde(default)]
    pub error_vs_exact: bool,
}

fn yes() -> bool {
    true
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec {
            norm: true,
            mass: false,
            mode_profile: None,
            x_profile_at: None,
            error_vs_exact: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeChoice {
    Index(usize),
    Named(NamedMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedMode {
    /// Fastest mode with a significant amplitude in `û₀`.
    Dominant,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct HeatParams {
    u0: String,
    #[serde(default)]
    potential: Option<String>,
    #[serde(default)]
    exact: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ConvectionParams {
    u0: String,
    n_p: usize,
    #[serde(default)]
    exact: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct BlackScholesParams {
    r: f64,
    sigma: f64,
    v0: String,
    #[serde(default)]
    exact: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FokkerPlanckParams {
    sigma: f64,
    potential: String,
    f0: String,
    form: FpForm,
    #[serde(default)]
    grad: Option<Vec<String>>,
    #[serde(default)]
    laplacian: Option<String>,
    #[serde(default)]
    exact: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct BoltzmannParams {
    #[serde(default)]
    quadrature: Option<QuadratureRule>,
    /// One expression per ordinate.
    f0: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct LiouvilleParams {
    /// One expression per component of `F`.
    field: Vec<String>,
    omega: f64,
    q0: Vec<f64>,
    /// Expressions in `t`, one per axis.
    #[serde(default)]
    exact_moment: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct LinearOdeParams {
    a: Vec<Vec<f64>>,
    #[serde(default)]
    a_imag: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    b: Option<Vec<f64>>,
    u0: Vec<f64>,
}

fn params<T: serde::de::DeserializeOwned>(spec: &ModelSpec) -> RunResult<T> {
    serde_json::from_value(spec.params.clone())
        .map_err(|e| RunError::Config(format!("model.params: {e}")))
}

/// Expression over `x` (or `x1`, `x2`, `x3`, also `y`, `z`), `t` and `pi`;
/// `PI` and `E` are built in.
pub struct Expr {
    src: String,
    ex: FlatEx<f64>,
    slots: Vec<Slot>,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    X(usize),
    T,
    Pi,
}

impl Expr {
    pub fn parse(src: &str, d: usize, with_t: bool) -> RunResult<Expr> {
        check_unary_power(src)?;
        let ex = exmex::parse::<f64>(src)
            .map_err(|e| RunError::Config(format!("cannot parse `{src}`: {e}")))?;
        let slots = ex
            .var_names()
            .iter()
            .map(|name| {
                let axis = match name.as_str() {
                    "x" => Some(0),
                    "y" => Some(1),
                    "z" => Some(2),
                    n if n.len() == 2 && n.starts_with('x') => {
                        n[1..].parse::<usize>().ok().filter(|&k| k >= 1).map(|k| k - 1)
                    }
                    _ => None,
                };
                match (axis, name.as_str()) {
                    (Some(k), _) if k < d => Ok(Slot::X(k)),
                    (None, "t") if with_t => Ok(Slot::T),
                    (None, "pi") => Ok(Slot::Pi),
                    _ => Err(RunError::Config(format!(
                        "unknown variable `{name}` in `{src}`"
                    ))),
                }
            })
            .collect::<RunResult<Vec<_>>>()?;
        Ok(Expr {
            src: src.to_string(),
            ex,
            slots,
        })
    }

    /// `NaN` when evaluation fails, so sampling reports the node.
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let vals: Vec<f64> = self
            .slots
            .iter()
            .map(|s| match s {
                Slot::X(k) => x[*k],
                Slot::T => t,
                Slot::Pi => std::f64::consts::PI,
            })
            .collect();
        self.ex.eval(&vals).unwrap_or(f64::NAN)
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    fn sample(&self, grid: &Grid, t: f64) -> RunResult<Vec<f64>> {
        Ok(sample(grid, |x| self.eval(x, t))?)
    }

    fn sample_c(&self, grid: &Grid, t: f64) -> RunResult<Vec<C64>> {
        Ok(self.sample(grid, t)?.into_iter().map(|v| c64(v, 0.0)).collect())
    }
}

/// The parser binds a leading minus tighter than `^`, so `-x^2` would mean
/// `(-x)^2`; such input is rejected rather than silently misread.
fn check_unary_power(src: &str) -> RunResult<()> {
    let c: Vec<char> = src.chars().filter(|c| !c.is_whitespace()).collect();
    for (i, &ch) in c.iter().enumerate() {
        let unary = ch == '-' && (i == 0 || matches!(c[i - 1], '(' | ',' | '+' | '-' | '*' | '/' | '^'));
        if !unary {
            continue;
        }
        let mut j = i + 1;
        if c.get(j) == Some(&'(') {
            let mut depth = 0;
            while j < c.len() {
                match c[j] {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            j += 1;
                            break;
                        }
                    }
                    _ => {}
                }
                j += 1;
            }
        } else {
            while j < c.len() && (c[j].is_alphanumeric() || matches!(c[j], '.' | '_' | 'π')) {
                j += 1;
            }
            // function call such as -sin(x)^2
            if c.get(j) == Some(&'(') {
                return check_unary_power(&c[j..].iter().collect::<String>()).and(
                    if call_then_power(&c[j..]) { Err(ambiguous(src)) } else { Ok(()) },
                );
            }
        }
        if c.get(j) == Some(&'^') {
            return Err(ambiguous(src));
        }
    }
    Ok(())
}

fn call_then_power(c: &[char]) -> bool {
    let mut depth = 0;
    for (k, &ch) in c.iter().enumerate() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return c.get(k + 1) == Some(&'^');
                }
            }
            _ => {}
        }
    }
    false
}

fn ambiguous(src: &str) -> RunError {
    RunError::Config(format!(
        "`{src}`: a leading minus before `^` is ambiguous; write -(a^b) or (-a)^b"
    ))
}

type FieldFn = Box<dyn Fn(&[C64]) -> Vec<C64>>;
type ExactFn = Box<dyn Fn(f64) -> RunResult<Vec<C64>>>;
type ExtraFn = Box<dyn Fn(&[C64], f64) -> RunResult<Vec<f64>>>;

/// An assembled experiment, ready to evolve.
pub struct Prepared {
    pub kind: ModelKind,
    pub grid: Option<Grid>,
    pub pgrid: PGrid,
    pub outer_dim: usize,
    pub w0: Vec<C64>,
    pub recovery: RecoveryMethod,
    system: Option<SchrodingerisedSystem>,
    fd: Option<FdTransport>,
    /// Outer vector after `p` recovery to physical field values.
    field: FieldFn,
    /// Raw lifted state to outer vector; `None` uses `recovery`.
    custom_recover: Option<FieldFn>,
    exact: Option<ExactFn>,
    mass: Option<Box<dyn Fn(&[C64]) -> f64>>,
    extra_names: Vec<String>,
    extra: Option<ExtraFn>,
    coord_names: Vec<String>,
    coords: Vec<Vec<f64>>,
    /// `u₀` for choosing the dominant mode.
    u0: Vec<C64>,
}

fn grid_of(spec: &ModelSpec) -> RunResult<Grid> {
    let g = spec
        .grid
        .clone()
        .ok_or_else(|| RunError::Config("model.grid is required".into()))?;
    g.validate()?;
    Ok(g)
}

fn pgrid_spec(spec: &ModelSpec) -> RunResult<&PGridSpec> {
    spec.pgrid
        .as_ref()
        .ok_or_else(|| RunError::Config("model.pgrid is required".into()))
}

fn grid_coords(grid: &Grid) -> (Vec<String>, Vec<Vec<f64>>) {
    let names = if grid.d == 1 {
        vec!["x".to_string()]
    } else {
        (1..=grid.d).map(|l| format!("x{l}")).collect()
    };
    let coords = (0..grid.total())
        .map(|k| grid.node(&unflatten(k, grid.m, grid.d)))
        .collect();
    (names, coords)
}

fn identity_field() -> FieldFn {
    Box::new(|v: &[C64]| v.to_vec())
}

fn exact_from(expr: Option<String>, grid: &Grid) -> RunResult<Option<ExactFn>> {
    Ok(match expr {
        Some(src) => {
            let e = Expr::parse(&src, grid.d, true)?;
            let g = grid.clone();
            Some(Box::new(move |t: f64| e.sample_c(&g, t)))
        }
        None => None,
    })
}

fn ode_system(
    lin: &LinearSystem,
    spec: &ModelSpec,
    plan: &EvolutionPlan,
) -> RunResult<(HermitianSplit, PGrid, SchrodingerisedSystem)> {
    let split = hermitian_split(&lin.a)?;
    let ps = pgrid_spec(spec)?;
    let pgrid = match (ps.left, ps.l0) {
        (None, None) => default_pgrid(&split, plan.t_final, ps.n, ps.alpha_neg, ps.right)?,
        _ => {
            let s = crate::linalg::spectral_radius(&split.h1, 1e-6)?;
            ps.resolve(plan.t_final, Some(s))?
        }
    };
    let sys = assemble_schrodingerised(&split, &pgrid, &lin.u0)?;
    Ok((split, pgrid, sys))
}

fn ode_fd(split: &HermitianSplit, pgrid: &PGrid, engine: Engine) -> RunResult<Option<FdTransport>> {
    if engine != Engine::UpwindFd {
        return Ok(None);
    }
    if max_norm(&split.h2) > 1e-12 * max_norm(&split.h1).max(1.0) {
        return Err(Error::Unsupported(
            "upwind transport needs an anti-Hermitian-free system (H2 = 0)".into(),
        )
        .into());
    }
    Ok(Some(FdTransport::new(split.h1.clone(), pgrid.dp(), pgrid.n)?))
}

/// Builds the model named in the config. Validation happens here, before
/// any evolution.
pub fn prepare(config: &ExperimentConfig) -> RunResult<Prepared> {
    let plan = plan_of(config)?;
    let spec = &config.model;
    let engine = plan.engine;
    let no_fd = |kind: &str| -> RunResult<()> {
        if engine == Engine::UpwindFd {
            return Err(Error::Unsupported(format!("the upwind engine is not available for {kind}")).into());
        }
        Ok(())
    };
    let mut prep = match spec.kind {
        ModelKind::Heat => {
            let p: HeatParams = params(spec)?;
            let grid = grid_of(spec)?;
            let u0 = Expr::parse(&p.u0, grid.d, false)?.sample_c(&grid, 0.0)?;
            let potential = match &p.potential {
                Some(src) => Expr::parse(src, grid.d, false)?.sample(&grid, 0.0)?,
                None => vec![0.0; grid.total()],
            };
            // decay rate of mode l is μ_l² − V, bounded by s_max + max(−V)
            let s_max = default_s_max(&u0, &grid)
                + potential.iter().fold(0.0_f64, |a, &v| a.max(-v));
            let pgrid = pgrid_spec(spec)?.resolve(plan.t_final, Some(s_max))?;
            let sys = build_heat_sampled(&potential, &grid, &pgrid, &u0)?;
            let fd = if engine == Engine::UpwindFd {
                let v = potential.iter().any(|&x| x != 0.0).then_some(potential.as_slice());
                Some(heat_fd_transport(&grid, &pgrid, v)?)
            } else {
                None
            };
            let (coord_names, coords) = grid_coords(&grid);
            Prepared {
                kind: spec.kind,
                grid: Some(grid.clone()),
                pgrid,
                outer_dim: grid.total(),
                w0: sys.w0.values.clone(),
                recovery: RecoveryMethod::IntegrateP,
                system: Some(sys),
                fd,
                field: identity_field(),
                custom_recover: None,
                exact: exact_from(p.exact, &grid)?,
                mass: None,
                extra_names: vec![],
                extra: None,
                coord_names,
                coords,
                u0,
            }
        }
        ModelKind::Convection => {
            no_fd("convection")?;
            let p: ConvectionParams = params(spec)?;
            if spec.pgrid.is_some() {
                return Err(RunError::Config(
                    "convection uses its own p lattice on [-pi, pi); set params.n_p instead of pgrid".into(),
                ));
            }
            let grid = grid_of(spec)?;
            let u0 = Expr::parse(&p.u0, grid.d, false)?.sample_c(&grid, 0.0)?;
            let model = build_convection(&grid, p.n_p, &u0)?;
            let sys = model.system.clone();
            let (coord_names, coords) = grid_coords(&grid);
            Prepared {
                kind: spec.kind,
                grid: Some(grid.clone()),
                pgrid: sys.pgrid.clone(),
                outer_dim: grid.total(),
                w0: sys.w0.values.clone(),
                recovery: RecoveryMethod::IntegrateP,
                system: Some(sys),
                fd: None,
                field: identity_field(),
                custom_recover: Some(Box::new(move |w: &[C64]| model.recover(w))),
                exact: exact_from(p.exact, &grid)?,
                mass: None,
                extra_names: vec![],
                extra: None,
                coord_names,
                coords,
                u0,
            }
        }
        ModelKind::BlackScholes => {
            no_fd("Black-Scholes")?;
            let p: BlackScholesParams = params(spec)?;
            let grid = grid_of(spec)?;
            let v0 = Expr::parse(&p.v0, grid.d, false)?.sample_c(&grid, 0.0)?;
            let pgrid = pgrid_spec(spec)?.resolve(plan.t_final, None)?;
            let model = build_black_scholes(p.r, p.sigma, &grid, &pgrid, &v0)?;
            let sys = model.system;
            let (coord_names, coords) = grid_coords(&grid);
            Prepared {
                kind: spec.kind,
                grid: Some(grid.clone()),
                pgrid,
                outer_dim: grid.total(),
                w0: sys.w0.values.clone(),
                recovery: RecoveryMethod::IntegrateP,
                system: Some(sys),
                fd: None,
                field: identity_field(),
                custom_recover: None,
                exact: exact_from(p.exact, &grid)?,
                mass: None,
                extra_names: vec![],
                extra: None,
                coord_names,
                coords,
                u0: v0,
            }
        }
        ModelKind::FokkerPlanck => {
            no_fd("Fokker-Planck")?;
            let p: FokkerPlanckParams = params(spec)?;
            let grid = grid_of(spec)?;
            let v = Expr::parse(&p.potential, grid.d, false)?;
            let f0 = Expr::parse(&p.f0, grid.d, false)?.sample_c(&grid, 0.0)?;
            let derivs = match (&p.grad, &p.laplacian) {
                (Some(g), Some(l)) => {
                    if g.len() != grid.d {
                        return Err(RunError::Config(format!(
                            "params.grad needs {} components, got {}",
                            grid.d,
                            g.len()
                        )));
                    }
                    let grad = g
                        .iter()
                        .map(|s| Expr::parse(s, grid.d, false)?.sample(&grid, 0.0))
                        .collect::<RunResult<Vec<_>>>()?;
                    let laplacian = Expr::parse(l, grid.d, false)?.sample(&grid, 0.0)?;
                    Some(PotentialDerivatives { grad, laplacian })
                }
                (None, None) => None,
                _ => {
                    return Err(RunError::Config(
                        "params.grad and params.laplacian must be given together".into(),
                    ))
                }
            };
            let pgrid = pgrid_spec(spec)?.resolve(plan.t_final, None)?;
            let model = build_fokker_planck(|x| v.eval(x, 0.0), derivs, p.sigma, &grid, &pgrid, &f0, p.form)?;
            let sys = model.system.clone();
            let (coord_names, coords) = grid_coords(&grid);
            let dxd = grid.dx().powi(grid.d as i32);
            Prepared {
                kind: spec.kind,
                grid: Some(grid.clone()),
                pgrid,
                outer_dim: grid.total(),
                w0: sys.w0.values.clone(),
                recovery: RecoveryMethod::IntegrateP,
                system: Some(sys),
                fd: None,
                field: Box::new(move |psi: &[C64]| model.to_f(psi)),
                custom_recover: None,
                exact: exact_from(p.exact, &grid)?,
                mass: Some(Box::new(move |f: &[C64]| f.iter().map(|z| z.re).sum::<f64>() * dxd)),
                extra_names: vec![],
                extra: None,
                coord_names,
                coords,
                u0: f0,
            }
        }
        ModelKind::Boltzmann => {
            no_fd("Boltzmann")?;
            let p: BoltzmannParams = params(spec)?;
            let grid = grid_of(spec)?;
            let quad = p.quadrature.unwrap_or_else(QuadratureRule::two_point);
            if p.f0.len() != quad.len() {
                return Err(RunError::Config(format!(
                    "params.f0 needs one expression per ordinate ({}), got {}",
                    quad.len(),
                    p.f0.len()
                )));
            }
            let mut f0 = Vec::with_capacity(quad.len() * grid.total());
            for src in &p.f0 {
                f0.extend(Expr::parse(src, grid.d, false)?.sample_c(&grid, 0.0)?);
            }
            let pgrid = pgrid_spec(spec)?.resolve(plan.t_final, None)?;
            let model = build_boltzmann(&quad, &grid, &pgrid, &f0)?;
            let sys = model.system.clone();
            let (mut coord_names, xs) = grid_coords(&grid);
            coord_names.insert(0, "ordinate".into());
            let coords = (0..quad.len())
                .flat_map(|k| {
                    xs.iter().map(move |x| {
                        let mut row = vec![k as f64];
                        row.extend(x);
                        row
                    })
                })
                .collect();
            let nx = grid.total();
            let w = quad.weights.clone();
            let m2 = model.clone();
            Prepared {
                kind: spec.kind,
                grid: Some(grid.clone()),
                pgrid,
                outer_dim: quad.len() * nx,
                w0: sys.w0.values.clone(),
                recovery: RecoveryMethod::IntegrateP,
                system: Some(sys),
                fd: None,
                field: Box::new(move |ft: &[C64]| m2.to_f(ft)),
                custom_recover: None,
                exact: None,
                mass: Some(Box::new(move |f: &[C64]| {
                    f.iter().enumerate().map(|(k, z)| w[k / nx] * z.re).sum()
                })),
                extra_names: vec![],
                extra: None,
                coord_names,
                coords,
                u0: f0,
            }
        }
        ModelKind::Liouville => {
            let p: LiouvilleParams = params(spec)?;
            let grid = grid_of(spec)?;
            if p.field.len() != grid.d {
                return Err(RunError::Config(format!(
                    "params.field needs {} components, got {}",
                    grid.d,
                    p.field.len()
                )));
            }
            let field = p
                .field
                .iter()
                .map(|s| Expr::parse(s, grid.d, false))
                .collect::<RunResult<Vec<_>>>()?;
            let model = build_liouville(
                |x| field.iter().map(|e| e.eval(x, 0.0)).collect(),
                &grid,
                p.omega,
                &p.q0,
            )?;
            let (split, pgrid, sys) = ode_system(&model.system, spec, &plan)?;
            let fd = ode_fd(&split, &pgrid, engine)?;
            let exact_moment = match &p.exact_moment {
                Some(v) if v.len() != grid.d => {
                    return Err(RunError::Config(format!(
                        "params.exact_moment needs {} components, got {}",
                        grid.d,
                        v.len()
                    )))
                }
                Some(v) => Some(
                    v.iter()
                        .map(|s| Expr::parse(s, 0, true))
                        .collect::<RunResult<Vec<_>>>()?,
                ),
                None => None,
            };
            let mut extra_names: Vec<String> = (1..=grid.d).map(|l| format!("moment_{l}")).collect();
            if exact_moment.is_some() {
                extra_names.push("moment_error".into());
            }
            let g2 = grid.clone();
            let extra: ExtraFn = Box::new(move |rho: &[C64], t: f64| {
                let q = moment_recover(rho, &g2);
                let mut row = q.clone();
                if let Some(ex) = &exact_moment {
                    let err = q
                        .iter()
                        .zip(ex)
                        .map(|(a, e)| (a - e.eval(&[], t)).abs())
                        .fold(0.0, f64::max);
                    row.push(err);
                }
                Ok(row)
            });
            let g3 = grid.clone();
            let (coord_names, coords) = grid_coords(&grid);
            let u0 = model.system.u0.clone();
            Prepared {
                kind: spec.kind,
                grid: Some(grid.clone()),
                pgrid,
                outer_dim: grid.total(),
                w0: sys.w0.values.clone(),
                recovery: RecoveryMethod::IntegrateP,
                system: Some(sys),
                fd,
                field: identity_field(),
                custom_recover: None,
                exact: None,
                mass: Some(Box::new(move |rho: &[C64]| density_mass(rho, &g3).re)),
                extra_names,
                extra: Some(extra),
                coord_names,
                coords,
                u0,
            }
        }
        ModelKind::LinearOde => {
            let p: LinearOdeParams = params(spec)?;
            if spec.grid.is_some() {
                return Err(RunError::Config("linear_ode takes no grid".into()));
            }
            let mut a = from_real_rows(&p.a)?;
            if let Some(im) = &p.a_imag {
                let ai = from_real_rows(im)?;
                if ai.shape() != a.shape() {
                    return Err(RunError::Config("params.a_imag must match params.a".into()));
                }
                a += ai * crate::linalg::I;
            }
            let b = p.b.as_ref().map(|b| b.iter().map(|&x| c64(x, 0.0)).collect());
            let u0: Vec<C64> = p.u0.iter().map(|&x| c64(x, 0.0)).collect();
            let lin = LinearSystem::new(a, b, u0)?;
            let n_user = lin.dim();
            let lin = if lin.is_homogeneous() {
                lin
            } else {
                crate::ode::augment_inhomogeneous(&lin)
            };
            let (split, pgrid, sys) = ode_system(&lin, spec, &plan)?;
            let fd = ode_fd(&split, &pgrid, engine)?;
            let a_full = lin.a.clone();
            let u0_full = lin.u0.clone();
            let t_final = plan.t_final;
            let exact: ExactFn = Box::new(move |t: f64| {
                let v = if t == 0.0 {
                    u0_full.clone()
                } else {
                    dense_expm_oracle(&a_full, &u0_full, t.min(t_final))?
                };
                Ok(v[..n_user].to_vec())
            });
            Prepared {
                kind: spec.kind,
                grid: None,
                pgrid,
                outer_dim: lin.dim(),
                w0: sys.w0.values.clone(),
                recovery: RecoveryMethod::IntegrateP,
                system: Some(sys),
                fd,
                field: Box::new(move |u: &[C64]| u[..n_user].to_vec()),
                custom_recover: None,
                exact: Some(exact),
                mass: None,
                extra_names: vec![],
                extra: None,
                coord_names: vec!["index".into()],
                coords: (0..n_user).map(|k| vec![k as f64]).collect(),
                u0: lin.u0.clone(),
            }
        }
    };
    prep.recovery = match config.recovery {
        Some(r) => r,
        None if prep.kind == ModelKind::Convection => RecoveryMethod::IntegrateP,
        None => RecoveryMethod::default_for(&prep.pgrid),
    };
    if let RecoveryMethod::PointP { p_star } = prep.recovery {
        crate::warp::point_index(&prep.pgrid, p_star)?;
    }
    if let Some(fd) = &prep.fd {
        fd.check_cfl(plan.dt)?;
    }
    if let Some(p_star) = config.outputs.diagnostics.x_profile_at {
        if prep.pgrid.index_of(p_star).is_none() {
            return Err(RunError::Config(format!("x_profile_at = {p_star} is not a p node")));
        }
    }
    if let (Some(ModeChoice::Index(l)), Some(g)) = (config.outputs.diagnostics.mode_profile, &prep.grid) {
        if l >= g.total() {
            return Err(RunError::Config(format!("mode_profile {l} out of range 0..{}", g.total())));
        }
    }
    if config.outputs.diagnostics.error_vs_exact && prep.exact.is_none() {
        return Err(RunError::Config("error_vs_exact needs an exact solution (params.exact)".into()));
    }
    Ok(prep)
}

/// The engine section with `outputs.snapshots` merged into its snapshot times.
pub fn plan_of(config: &ExperimentConfig) -> RunResult<EvolutionPlan> {
    let mut plan = config.engine.clone();
    plan.snapshot_times.extend(&config.outputs.snapshots);
    plan.snapshot_times.sort_by(f64::total_cmp);
    plan.snapshot_times.dedup();
    plan.validate()?;
    Ok(plan)
}

impl Prepared {
    pub fn evolve(&self, plan: &EvolutionPlan) -> RunResult<Trajectory> {
        if plan.engine == Engine::UpwindFd {
            let fd = self
                .fd
                .as_ref()
                .ok_or_else(|| Error::Unsupported("no upwind transport for this model".into()))?;
            return Ok(evolve_upwind_fd(fd, plan, &self.w0)?);
        }
        let sys = self.system.as_ref().ok_or_else(|| Error::Unsupported("no lifted system".into()))?;
        Ok(evolve_system(sys, plan)?)
    }

    pub fn warped(&self, values: Vec<C64>, t: f64) -> WarpedState {
        WarpedState {
            values,
            outer_dim: self.outer_dim,
            grid: self.grid.clone(),
            pgrid: self.pgrid.clone(),
            t,
        }
    }

    /// Physical field from a lifted state.
    pub fn recovered(&self, w: &WarpedState) -> RunResult<Vec<C64>> {
        let outer = match &self.custom_recover {
            Some(f) => f(&w.values),
            None => recover(w, self.recovery)?,
        };
        Ok((self.field)(&outer))
    }

    pub fn exact(&self, t: f64) -> Option<RunResult<Vec<C64>>> {
        self.exact.as_ref().map(|f| f(t))
    }

    pub fn mode_index(&self, choice: ModeChoice) -> RunResult<usize> {
        let grid = self
            .grid
            .as_ref()
            .ok_or_else(|| RunError::Config("mode profiles need a spatial grid".into()))?;
        Ok(match choice {
            ModeChoice::Index(l) => l,
            ModeChoice::Named(NamedMode::Dominant) => {
                let n = grid.total();
                dominant_mode(&self.u0[..n.min(self.u0.len())], grid)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileAxis {
    /// `(p_j, |ŵ_l(p_j)|)` for spatial Fourier mode `l`.
    PAtMode(usize),
    /// `(x, |w(x, p*)|)`.
    XAtP(f64),
}

/// Plot rows for a lifted state: coordinates followed by the modulus.
pub fn emit_profile(w: &WarpedState, axis: ProfileAxis) -> crate::Result<Vec<Vec<f64>>> {
    let n = w.pgrid.n;
    match axis {
        ProfileAxis::PAtMode(l) => {
            if l >= w.outer_dim {
                return Err(Error::InvalidArgument(format!(
                    "mode {l} out of range 0..{}",
                    w.outer_dim
                )));
            }
            let mut v = w.values.clone();
            if let Some(g) = &w.grid {
                let mut dims = g.dims();
                if g.total() != w.outer_dim {
                    return Err(Error::Unsupported("mode profiles need a purely spatial outer register".into()));
                }
                dims.push(n);
                for ax in 0..g.d {
                    phi_inverse_apply(&mut v, &dims, ax);
                }
            }
            let pts = w.pgrid.points();
            Ok((0..n).map(|j| vec![pts[j], v[l * n + j].norm()]).collect())
        }
        ProfileAxis::XAtP(p_star) => {
            let j = w.pgrid.index_of(p_star).ok_or_else(|| {
                Error::InvalidArgument(format!("p* = {p_star} is not a node of the p grid"))
            })?;
            let slice = w.slice_at_p(j);
            Ok(slice
                .iter()
                .enumerate()
                .map(|(k, z)| {
                    let mut row = match &w.grid {
                        Some(g) if g.total() == w.outer_dim => g.node(&unflatten(k, g.m, g.d)),
                        _ => vec![k as f64],
                    };
                    row.push(z.norm());
                    row
                })
                .collect())
        }
    }
}

/// Writes `header` and rows with 17 significant digits, LF endings, via a
/// temporary file renamed into place.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> RunResult<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> RunResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        out.write_all(bytes).map_err(io_err(path))?;
        out.flush().map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub engine: Engine,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub status: String,
    pub files: Vec<String>,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub manifest: Manifest,
}

/// Accepts either an experiment config or a manifest emitted by `run`.
pub fn load_config(path: &Path) -> RunResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> RunResult<ExperimentConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
    if value.get("config").is_some() {
        let m: Manifest = serde_json::from_value(value).map_err(|e| RunError::Config(format!("manifest: {e}")))?;
        return Ok(m.config);
    }
    serde_json::from_value(value).map_err(|e| RunError::Config(e.to_string()))
}

/// Full schema and model validation without evolving.
pub fn validate(config: &ExperimentConfig) -> RunResult<()> {
    prepare(config).map(|_| ())
}

pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> RunResult<RunReport> {
    let start = Instant::now();
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| RunError::Config("no output directory (use --out or out_dir)".into()))?;
    let plan = plan_of(config)?;
    let prep = prepare(config)?;
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    info!("running {:?} with {:?}, dt = {}, T = {}", prep.kind, plan.engine, plan.dt, plan.t_final);
    let diag = &config.outputs.diagnostics;
    let n0 = vec_norm(&prep.w0);
    let mut files = Vec::new();
    let mut failure = None;

    let traj = prep.evolve(&plan)?;
    let mut header = vec!["t".to_string()];
    if diag.norm {
        header.push("norm".into());
    }
    if diag.mass {
        if prep.mass.is_none() {
            warn!("mass diagnostic is not defined for {:?}; column omitted", prep.kind);
        } else {
            header.push("mass".into());
        }
    }
    if diag.error_vs_exact {
        header.push("rel_error".into());
    }
    header.extend(prep.extra_names.iter().cloned());
    let mode = diag.mode_profile.map(|c| prep.mode_index(c)).transpose()?;
    let mut rows = Vec::new();
    for (k, (&t, state)) in traj.times.iter().zip(&traj.states).enumerate() {
        let norm = vec_norm(state);
        if !(norm <= BLOW_UP * n0) {
            failure = Some(RunError::BlowUp { t, norm });
            break;
        }
        let w = prep.warped(state.clone(), t);
        let u = prep.recovered(&w)?;
        let mut row = vec![t];
        if diag.norm {
            row.push(norm);
        }
        if let (true, Some(m)) = (diag.mass, &prep.mass) {
            row.push(m(&u));
        }
        if diag.error_vs_exact {
            let exact = prep.exact(t).expect("checked in prepare")?;
            row.push(relative_l2(&u, &exact));
        }
        if let Some(extra) = &prep.extra {
            row.extend(extra(&u, t)?);
        }
        rows.push(row);

        let mut snap_header = prep.coord_names.clone();
        snap_header.extend(["re", "im", "abs"].map(String::from));
        let snap: Vec<Vec<f64>> = prep
            .coords
            .iter()
            .zip(&u)
            .map(|(x, z)| {
                let mut r = x.clone();
                r.extend([z.re, z.im, z.norm()]);
                r
            })
            .collect();
        let path = out_dir.join(format!("snapshot_{k:03}.csv"));
        write_csv(&path, &snap_header, &snap)?;
        files.push(path);
        if let Some(l) = mode {
            let path = out_dir.join(format!("profile_mode_{k:03}.csv"));
            let r = emit_profile(&w, ProfileAxis::PAtMode(l))?;
            write_csv(&path, &["p".into(), "abs".into()], &r)?;
            files.push(path);
        }
        if let Some(p) = diag.x_profile_at {
            let path = out_dir.join(format!("profile_p_{k:03}.csv"));
            let r = emit_profile(&w, ProfileAxis::XAtP(p))?;
            let mut h = prep.coord_names.clone();
            if prep.kind == ModelKind::Boltzmann {
                h = vec!["index".into()];
            }
            h.push("abs".into());
            write_csv(&path, &h, &r)?;
            files.push(path);
        }
    }
    let path = out_dir.join("diagnostics.csv");
    write_csv(&path, &header, &rows)?;
    files.push(path);

    let manifest = Manifest {
        config: config.clone(),
        engine: plan.engine,
        seed: config.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        status: if failure.is_some() { "blow_up".into() } else { "ok".into() },
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Config(e.to_string()))?;
    write_atomic(&path, format!("{text}\n").as_bytes())?;
    files.push(path);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RunReport { files, manifest })
}

/// One header line and one data row.
pub fn estimate_csv(e: &Estimate) -> String {
    let poly = e.polylog.map(|p| format!("{p:.16e}")).unwrap_or_default();
    format!("method,leading,polylog\n{:?},{:.16e},{}\n", e.method, e.leading, poly)
}

pub fn estimate_query(path: &Path) -> RunResult<Estimate> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let q: CostQuery = serde_json::from_str(&text).map_err(|e| RunError::Config(e.to_string()))?;
    Ok(estimate(&q)?)
}

/// Dense `A` for a real row list; exposed for configs built in code.
pub fn real_matrix(rows: &[Vec<f64>]) -> crate::Result<CMatrix> {
    from_real_rows(rows)
}
