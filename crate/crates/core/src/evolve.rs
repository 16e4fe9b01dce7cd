//! Time evolution engines for `dw/dt = iHw` and the upwind transport scheme.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{phi_apply, phi_inverse_apply, DENSE_LIMIT};
use crate::linalg::{
    apply_spectrum, c64, dense_is_hermitian, eigh, expm, hermitian_defect, matvec,
    spectral_radius, CMatrix, C64, I, ZERO,
};
use crate::ode::SchrodingerisedSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    ExactDiagonal,
    Trotter1,
    UpwindFd,
    DenseExpm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionPlan {
    pub engine: Engine,
    pub dt: f64,
    pub t_final: f64,
    /// Sorted times in `[0, T]`; the final time is always reported.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl EvolutionPlan {
    pub fn new(engine: Engine, dt: f64, t_final: f64, snapshot_times: Vec<f64>) -> Result<Self> {
        let plan = EvolutionPlan {
            engine,
            dt,
            t_final,
            snapshot_times,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "T must be positive, got {}",
                self.t_final
            )));
        }
        if self
            .snapshot_times
            .windows(2)
            .any(|w| !(w[0] <= w[1]))
        {
            return Err(Error::InvalidArgument("snapshot times must be sorted".into()));
        }
        if let Some(bad) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(0.0..=self.t_final * (1.0 + 1e-12)).contains(&t))
        {
            return Err(Error::InvalidArgument(format!(
                "snapshot time {bad} outside [0, {}]",
                self.t_final
            )));
        }
        if matches!(self.engine, Engine::Trotter1 | Engine::UpwindFd) {
            self.steps()?;
        }
        Ok(())
    }

    /// `T/dt`, which must be an integer to within one ulp.
    pub fn steps(&self) -> Result<usize> {
        let r = self.t_final / self.dt;
        let k = r.round();
        if (r - k).abs() > f64::EPSILON * r.max(1.0) || k < 1.0 {
            return Err(Error::StepCondition(format!(
                "T/dt = {r} is not an integer"
            )));
        }
        Ok(k as usize)
    }

    /// Requested times plus `T`, deduplicated.
    pub fn output_times(&self) -> Vec<f64> {
        let mut out = self.snapshot_times.clone();
        if out.last().is_none_or(|&t| (t - self.t_final).abs() > 1e-12 * self.t_final) {
            out.push(self.t_final);
        }
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * self.t_final.max(1.0));
        out
    }

    /// Step index of each output time.
    pub fn output_steps(&self) -> Result<Vec<usize>> {
        self.output_times()
            .iter()
            .map(|&t| {
                let r = t / self.dt;
                let k = r.round();
                if (r - k).abs() > 1e-9 * r.max(1.0) {
                    return Err(Error::StepCondition(format!(
                        "snapshot time {t} is not a multiple of dt = {}",
                        self.dt
                    )));
                }
                Ok(k as usize)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub steps: usize,
    /// Per-axis transform counts (x axes first, `p` last).
    pub transforms: Vec<usize>,
}

impl Trajectory {
    pub fn last(&self) -> &[C64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Real phases of a diagonal Hermitian generator.
pub fn diagonal_phases(entries: &[C64]) -> Result<Vec<f64>> {
    entries
        .iter()
        .enumerate()
        .map(|(k, z)| {
            if z.im.abs() > 1e-12 {
                Err(Error::InvalidArgument(format!(
                    "diagonal entry {k} has imaginary part {:e}",
                    z.im
                )))
            } else {
                Ok(z.re)
            }
        })
        .collect()
}

/// `w(t) = e^{iθt} ⊙ w₀`.
pub fn evolve_exact_diagonal(theta: &[f64], w0: &[C64], t: f64) -> Result<Vec<C64>> {
    if theta.len() != w0.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: w0.len(),
        });
    }
    Ok(theta
        .par_iter()
        .zip(w0.par_iter())
        .map(|(&th, &w)| w * C64::from_polar(1.0, th * t))
        .collect())
}

/// Basis in which one tensor axis of a split term is diagonal.
#[derive(Debug, Clone)]
pub enum Basis {
    Position,
    /// Columns of `Φ`.
    Fourier,
    /// Columns of a unitary matrix.
    Eigen(Arc<CMatrix>),
}

impl Basis {
    pub fn eigen(q: CMatrix) -> Basis {
        Basis::Eigen(Arc::new(q))
    }

    fn same(&self, other: &Basis) -> bool {
        match (self, other) {
            (Basis::Position, Basis::Position) | (Basis::Fourier, Basis::Fourier) => true,
            (Basis::Eigen(a), Basis::Eigen(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    /// Position coordinates → coordinates in this basis.
    fn enter(&self, v: &mut [C64], dims: &[usize], axis: usize) {
        match self {
            Basis::Position => {}
            Basis::Fourier => phi_inverse_apply(v, dims, axis),
            Basis::Eigen(q) => crate::grid::dense_apply(v, dims, axis, &q.adjoint()),
        }
    }

    fn leave(&self, v: &mut [C64], dims: &[usize], axis: usize) {
        match self {
            Basis::Position => {}
            Basis::Fourier => phi_apply(v, dims, axis),
            Basis::Eigen(q) => crate::grid::dense_apply(v, dims, axis, q),
        }
    }
}

/// A Hermitian term `B diag(θ) B⁻¹` with `B` a tensor product of per-axis
/// bases.
#[derive(Debug, Clone)]
pub struct SplitTerm {
    pub bases: Vec<Basis>,
    pub theta: Vec<f64>,
}

/// State tagged with the basis currently used on every axis.
struct Tracked {
    v: Vec<C64>,
    dims: Vec<usize>,
    bases: Vec<Basis>,
    counts: Vec<usize>,
    /// `Q_new† Q_old` for eigenbasis pairs, keyed by the two allocations.
    fused: Vec<(usize, usize, Arc<CMatrix>)>,
}

impl Tracked {
    fn new(v: Vec<C64>, dims: Vec<usize>) -> Self {
        let k = dims.len();
        Tracked {
            v,
            dims,
            bases: vec![Basis::Position; k],
            counts: vec![0; k],
            fused: Vec::new(),
        }
    }

    fn switch(&mut self, target: &[Basis]) {
        for axis in 0..self.dims.len() {
            if self.bases[axis].same(&target[axis]) {
                continue;
            }
            if let (Basis::Eigen(from), Basis::Eigen(to)) = (&self.bases[axis], &target[axis]) {
                // one polished change of basis instead of two; the rounding
                // bias of each application otherwise adds up over many steps
                let key = (Arc::as_ptr(from) as usize, Arc::as_ptr(to) as usize);
                let m = match self.fused.iter().find(|(a, b, _)| (*a, *b) == key) {
                    Some((_, _, m)) => m.clone(),
                    None => {
                        let m = Arc::new(crate::linalg::polish_unitary(to.adjoint() * from.as_ref()));
                        self.fused.push((key.0, key.1, m.clone()));
                        m
                    }
                };
                crate::grid::dense_apply(&mut self.v, &self.dims, axis, &m);
                self.counts[axis] += 1;
                self.bases[axis] = target[axis].clone();
                continue;
            }
            if !matches!(self.bases[axis], Basis::Position) {
                self.bases[axis].leave(&mut self.v, &self.dims, axis);
                self.counts[axis] += 1;
            }
            if !matches!(target[axis], Basis::Position) {
                target[axis].enter(&mut self.v, &self.dims, axis);
                self.counts[axis] += 1;
            }
            self.bases[axis] = target[axis].clone();
        }
    }

    fn position_copy(&mut self) -> Vec<C64> {
        let mut copy = Tracked {
            v: self.v.clone(),
            dims: self.dims.clone(),
            bases: self.bases.clone(),
            counts: vec![0; self.dims.len()],
            fused: Vec::new(),
        };
        copy.switch(&vec![Basis::Position; self.dims.len()]);
        for (c, k) in self.counts.iter_mut().zip(copy.counts) {
            *c += k;
        }
        copy.v
    }
}

/// First-order product formula `Π_k e^{iH_k Δt}`, applying the terms in the
/// order given and switching each axis basis only when it changes.
pub fn evolve_trotter(
    terms: &[SplitTerm],
    dims: &[usize],
    plan: &EvolutionPlan,
    w0: &[C64],
) -> Result<Trajectory> {
    let dim: usize = dims.iter().product();
    if w0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w0.len(),
        });
    }
    for t in terms {
        if t.bases.len() != dims.len() || t.theta.len() != dim {
            return Err(Error::InvalidArgument(
                "split term does not match the state layout".into(),
            ));
        }
    }
    let n_steps = plan.steps()?;
    let outputs = plan.output_steps()?;
    let phases: Vec<Vec<C64>> = terms
        .iter()
        .map(|t| {
            t.theta
                .par_iter()
                .map(|&th| C64::from_polar(1.0, th * plan.dt))
                .collect()
        })
        .collect();
    let mut state = Tracked::new(w0.to_vec(), dims.to_vec());
    let mut traj = Trajectory::default();
    let mut next = 0;
    for step in 0..=n_steps {
        while next < outputs.len() && outputs[next] == step {
            traj.times.push(step as f64 * plan.dt);
            traj.states.push(state.position_copy());
            next += 1;
        }
        if step == n_steps {
            break;
        }
        for (t, ph) in terms.iter().zip(&phases) {
            state.switch(&t.bases);
            state
                .v
                .par_iter_mut()
                .zip(ph.par_iter())
                .for_each(|(z, p)| *z *= p);
        }
    }
    traj.steps = n_steps;
    traj.transforms = state.counts;
    Ok(traj)
}

/// Which common basis, if any, makes every term diagonal.
fn common_diagonal_basis(sys: &SchrodingerisedSystem) -> Option<Basis> {
    use crate::grid::Factor;
    let all = |pred: fn(&Factor) -> bool| {
        sys.terms
            .iter()
            .all(|t| t.outer.factors.iter().all(|f| f.is_identity() || pred(f)))
    };
    if all(|f| matches!(f, Factor::Momentum(_) | Factor::MomentumSquared(_) | Factor::Fourier(_))) {
        Some(Basis::Fourier)
    } else if all(|f| matches!(f, Factor::Diagonal(_))) {
        Some(Basis::Position)
    } else {
        None
    }
}

/// Diagonal of `Hdiag` when every outer factor is diagonal in `basis`.
fn full_spectrum(sys: &SchrodingerisedSystem, basis: &Basis) -> Vec<f64> {
    use crate::grid::Factor;
    let dims = sys.dims();
    let total: usize = dims.iter().product();
    let eta = sys.pgrid.eta();
    let mut theta = vec![0.0; total];
    for t in &sys.terms {
        let odims = t.outer.dims();
        let inner_p = sys.pgrid.n;
        let diag: Vec<Vec<C64>> = t
            .outer
            .factors
            .iter()
            .map(|f| match (f, basis) {
                (Factor::Identity(n), _) => vec![c64(1.0, 0.0); *n],
                (Factor::Diagonal(e), _) => e.clone(),
                (other, _) => other.symbol().expect("fourier factor"),
            })
            .collect();
        theta.par_iter_mut().enumerate().for_each(|(idx, th)| {
            let k = idx % inner_p;
            let mut o = idx / inner_p;
            let mut val = t.outer.scale;
            for (axis, d) in odims.iter().enumerate().rev() {
                val *= diag[axis][o % d];
                o /= d;
            }
            *th += (val * eta[k].powi(t.p_power as i32)).re;
        });
    }
    theta
}

/// Exact evolution `e^{iHt}w₀` at each output time of the plan.
///
/// Fully diagonalisable systems use one transform pair and a phase
/// multiplication; otherwise each `p` Fourier mode `η` gets a dense block
/// `Σ_k η^k O_k` diagonalised once.
pub fn evolve_exact(sys: &SchrodingerisedSystem, plan: &EvolutionPlan) -> Result<Trajectory> {
    let times = plan.output_times();
    let dims = sys.dims();
    let p_axis = dims.len() - 1;
    let mut traj = Trajectory {
        times: times.clone(),
        transforms: vec![0; dims.len()],
        ..Default::default()
    };
    if let Some(basis) = common_diagonal_basis(sys) {
        let theta = full_spectrum(sys, &basis);
        let mut start = sys.w0.values.clone();
        let outer_axes = 0..p_axis;
        if matches!(basis, Basis::Fourier) {
            for axis in outer_axes.clone() {
                phi_inverse_apply(&mut start, &dims, axis);
                traj.transforms[axis] += 1;
            }
        }
        phi_inverse_apply(&mut start, &dims, p_axis);
        traj.transforms[p_axis] += 1;
        for &t in &times {
            let mut v = evolve_exact_diagonal(&theta, &start, t)?;
            phi_apply(&mut v, &dims, p_axis);
            traj.transforms[p_axis] += 1;
            if matches!(basis, Basis::Fourier) {
                for axis in outer_axes.clone() {
                    phi_apply(&mut v, &dims, axis);
                    traj.transforms[axis] += 1;
                }
            }
            traj.states.push(v);
        }
        return Ok(traj);
    }

    let blocks = sys.outer_blocks()?;
    let n = sys.outer_dim();
    let np = sys.pgrid.n;
    let eta = sys.pgrid.eta();
    let mut hat = sys.w0.values.clone();
    phi_inverse_apply(&mut hat, &dims, p_axis);
    traj.transforms[p_axis] += 1;
    let present: Vec<usize> = (0..3).filter(|&k| blocks[k].is_some()).collect();
    let single = if present.len() == 1 {
        Some(eigh(blocks[present[0]].as_ref().unwrap())?)
    } else {
        None
    };

    // columns[k][s] = evolved block of p mode k at output time s
    let columns: Vec<Result<Vec<Vec<C64>>>> = (0..np)
        .into_par_iter()
        .map(|k| {
            let col: Vec<C64> = (0..n).map(|o| hat[o * np + k]).collect();
            let (values, q) = match &single {
                Some((vals, q)) => {
                    let s = eta[k].powi(present[0] as i32);
                    (vals.iter().map(|v| v * s).collect::<Vec<_>>(), q.clone())
                }
                None => {
                    let mut b = CMatrix::zeros(n, n);
                    for &p in &present {
                        b += blocks[p].as_ref().unwrap() * c64(eta[k].powi(p as i32), 0.0);
                    }
                    eigh(&b)?
                }
            };
            let coeff = matvec(&q.adjoint(), &col);
            Ok(times
                .iter()
                .map(|&t| {
                    let rotated: Vec<C64> = coeff
                        .iter()
                        .zip(&values)
                        .map(|(c, &l)| c * C64::from_polar(1.0, l * t))
                        .collect();
                    matvec(&q, &rotated)
                })
                .collect())
        })
        .collect();
    let columns: Vec<Vec<Vec<C64>>> = columns.into_iter().collect::<Result<_>>()?;
    for s in 0..times.len() {
        let mut v = vec![ZERO; n * np];
        for (k, col) in columns.iter().enumerate() {
            for o in 0..n {
                v[o * np + k] = col[s][o];
            }
        }
        phi_apply(&mut v, &dims, p_axis);
        traj.transforms[p_axis] += 1;
        traj.states.push(v);
    }
    Ok(traj)
}

/// `e^{Mt} v` by scaling-and-squaring Padé on the dense matrix.
pub fn dense_expm_oracle(m: &CMatrix, v: &[C64], t: f64) -> Result<Vec<C64>> {
    let n = crate::linalg::ensure_square(m)?;
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dim: n,
            limit: DENSE_LIMIT,
        });
    }
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    let e = expm(&(m * c64(t, 0.0)))?;
    Ok(matvec(&e, v))
}

/// Dense reference evolution `e^{iHt}w₀` of a lifted system.
pub fn evolve_dense(sys: &SchrodingerisedSystem, plan: &EvolutionPlan) -> Result<Trajectory> {
    let h = sys.h().to_dense()?;
    let gen = &h * I;
    let times = plan.output_times();
    let states = times
        .iter()
        .map(|&t| dense_expm_oracle(&gen, &sys.w0.values, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times,
        states,
        steps: 0,
        transforms: vec![0; sys.dims().len()],
    })
}

/// Upwind transport `∂_t w + A ∂_p w = 0` on the periodic `p` lattice.
#[derive(Debug, Clone)]
pub struct FdTransport {
    pub amat: CMatrix,
    /// Nonzeros of `A` per row.
    rows: Vec<Vec<(usize, C64)>>,
    pub rho: f64,
    pub dp: f64,
    pub n_p: usize,
}

impl FdTransport {
    pub fn new(amat: CMatrix, dp: f64, n_p: usize) -> Result<Self> {
        crate::linalg::ensure_square(&amat)?;
        if !dense_is_hermitian(&amat) {
            return Err(Error::Unsupported(
                "upwind transport needs a Hermitian coefficient matrix".into(),
            ));
        }
        let (vals, _) = eigh(&amat)?;
        let scale = vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        if let Some(&top) = vals.last() {
            if top > 1e-10 * scale {
                return Err(Error::InvalidArgument(format!(
                    "transport matrix has a positive eigenvalue {top:e}; upwind direction undefined"
                )));
            }
        }
        let rho = spectral_radius(&amat, 1e-6)?;
        let rows = (0..amat.nrows())
            .map(|i| {
                (0..amat.ncols())
                    .filter(|&j| amat[(i, j)] != ZERO)
                    .map(|j| (j, amat[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(FdTransport {
            amat,
            rows,
            rho,
            dp,
            n_p,
        })
    }

    pub fn admissible_dt(&self) -> f64 {
        if self.rho == 0.0 {
            f64::INFINITY
        } else {
            self.dp / self.rho
        }
    }

    pub fn check_cfl(&self, dt: f64) -> Result<()> {
        if self.rho * dt / self.dp > 1.0 + 1e-9 {
            return Err(Error::Cfl {
                dt,
                admissible: self.admissible_dt(),
            });
        }
        Ok(())
    }

    /// Dense one-step matrix in the `p`-major ordering `(p_j blocks of u)`:
    /// diagonal blocks `I + A₁`, super-diagonal `−A₁`, wraparound in the
    /// last block row.
    pub fn iteration_matrix(&self, dt: f64) -> Result<CMatrix> {
        let n = self.amat.nrows();
        let dim = n * self.n_p;
        if dim > DENSE_LIMIT {
            return Err(Error::TooLarge {
                dim,
                limit: DENSE_LIMIT,
            });
        }
        let a1 = &self.amat * c64(dt / self.dp, 0.0);
        let diag = CMatrix::identity(n, n) + &a1;
        let mut b = CMatrix::zeros(dim, dim);
        for j in 0..self.n_p {
            let next = (j + 1) % self.n_p;
            b.view_mut((j * n, j * n), (n, n)).copy_from(&diag);
            b.view_mut((j * n, next * n), (n, n)).copy_from(&(-&a1));
        }
        Ok(b)
    }

    /// One step on the `u`-major state (`p` innermost).
    pub fn step(&self, w: &[C64], dt: f64) -> Vec<C64> {
        let np = self.n_p;
        let c = dt / self.dp;
        let diff: Vec<C64> = w
            .par_chunks(np)
            .flat_map_iter(|row| (0..np).map(move |j| row[j] - row[(j + 1) % np]))
            .collect();
        let mut out = w.to_vec();
        out.par_chunks_mut(np).enumerate().for_each(|(i, row)| {
            for &(k, a) in &self.rows[i] {
                let s = a * c;
                let src = &diff[k * np..(k + 1) * np];
                for (r, d) in row.iter_mut().zip(src) {
                    *r += s * d;
                }
            }
        });
        out
    }
}

pub fn evolve_upwind_fd(fd: &FdTransport, plan: &EvolutionPlan, w0: &[C64]) -> Result<Trajectory> {
    let dim = fd.amat.nrows() * fd.n_p;
    if w0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w0.len(),
        });
    }
    fd.check_cfl(plan.dt)?;
    let n_steps = plan.steps()?;
    let outputs = plan.output_steps()?;
    let mut w = w0.to_vec();
    let mut traj = Trajectory {
        steps: n_steps,
        ..Default::default()
    };
    let mut next = 0;
    for step in 0..=n_steps {
        while next < outputs.len() && outputs[next] == step {
            traj.times.push(step as f64 * plan.dt);
            traj.states.push(w.clone());
            next += 1;
        }
        if step < n_steps {
            w = fd.step(&w, plan.dt);
        }
    }
    Ok(traj)
}

/// Dispatches a lifted system to the engine named in the plan.
pub fn evolve_system(sys: &SchrodingerisedSystem, plan: &EvolutionPlan) -> Result<Trajectory> {
    match plan.engine {
        Engine::ExactDiagonal => evolve_exact(sys, plan),
        Engine::Trotter1 => {
            if sys.splitting.is_empty() {
                return Err(Error::Unsupported(
                    "system has no splitting; use the exact engine".into(),
                ));
            }
            evolve_trotter(&sys.splitting, &sys.dims(), plan, &sys.w0.values)
        }
        Engine::DenseExpm => evolve_dense(sys, plan),
        Engine::UpwindFd => Err(Error::Unsupported(
            "the upwind engine runs on an explicit transport matrix".into(),
        )),
    }
}

/// `max |‖v‖ − ‖w₀‖|` over a trajectory.
pub fn norm_drift(traj: &Trajectory, w0: &[C64]) -> f64 {
    let n0 = crate::linalg::vec_norm(w0);
    traj.states
        .iter()
        .map(|s| (crate::linalg::vec_norm(s) - n0).abs())
        .fold(0.0, f64::max)
}

pub fn assert_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    let d = hermitian_defect(m);
    if d > tol {
        return Err(Error::Numerical(format!("Hermitian defect {d:e} exceeds {tol:e}")));
    }
    Ok(())
}

#[doc(hidden)]
pub fn rotate_spectrum(values: &[f64], q: &CMatrix, t: f64) -> CMatrix {
    apply_spectrum(values, q, |l| C64::from_polar(1.0, l * t))
}
