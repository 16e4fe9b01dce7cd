//! Periodic lattices, the discrete Fourier machinery and Kronecker-structured
//! operators built from the position and momentum matrices.
//!
//! Storage is row-major over the tensor axes: for a `d`-dimensional spatial
//! lattice the first coordinate varies slowest. Lifted states append the `p`
//! axis innermost.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, kron, CMatrix, C64, ONE, ZERO};

/// Largest dimension any dense materialisation is allowed to reach.
pub const DENSE_LIMIT: usize = 4096;

fn check_pow2(n: usize, what: &str) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "{what} must be an even power of two, got {n}"
        )));
    }
    Ok(())
}

/// Uniform periodic lattice on `[a, b)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    /// Points per dimension.
    pub m: usize,
    pub d: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, m: usize, d: usize) -> Result<Self> {
        let g = Grid { a, b, m, d };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        check_pow2(self.m, "M")?;
        if !(self.b > self.a) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need a < b, got [{}, {}]",
                self.a, self.b
            )));
        }
        if self.d == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / self.m as f64
    }

    /// Qubits per dimension.
    pub fn qubits(&self) -> u32 {
        self.m.trailing_zeros()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.a + j as f64 * self.dx()).collect()
    }

    /// `μ_l` for 0-based `l`, i.e. `2π(l − M/2)/(b − a)`.
    pub fn mu(&self) -> Vec<f64> {
        mu_values(self.m, self.b - self.a)
    }

    pub fn total(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.m; self.d]
    }

    /// Coordinates of the node with multi-index `j`.
    pub fn node(&self, j: &[usize]) -> Vec<f64> {
        j.iter().map(|&k| self.a + k as f64 * self.dx()).collect()
    }
}

pub fn mu_values(m: usize, length: f64) -> Vec<f64> {
    let half = (m / 2) as f64;
    (0..m)
        .map(|l| 2.0 * PI * (l as f64 - half) / length)
        .collect()
}

/// Lattice for the auxiliary variable on `[L, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PGrid {
    pub left: f64,
    pub right: f64,
    pub n: usize,
    /// Decay rate of the extension for `p < 0`.
    pub alpha_neg: f64,
    /// Estimated left edge of the initial support, `L < L0 < 0`.
    pub l0: f64,
}

impl PGrid {
    pub fn new(left: f64, right: f64, n: usize, alpha_neg: f64, l0: f64) -> Result<Self> {
        let g = PGrid {
            left,
            right,
            n,
            alpha_neg,
            l0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        check_pow2(self.n, "N")?;
        if !(self.left < 0.0 && self.right > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "need L < 0 < R, got [{}, {}]",
                self.left, self.right
            )));
        }
        if !(self.alpha_neg >= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "alpha_neg must be >= 1, got {}",
                self.alpha_neg
            )));
        }
        if !(self.left < self.l0 && self.l0 < 0.0) {
            return Err(Error::InvalidGrid(format!(
                "need L < L0 < 0, got L = {}, L0 = {}",
                self.left, self.l0
            )));
        }
        Ok(())
    }

    pub fn dp(&self) -> f64 {
        (self.right - self.left) / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.left + j as f64 * self.dp()).collect()
    }

    /// Fourier dual variable `η_k` of `p`.
    pub fn eta(&self) -> Vec<f64> {
        mu_values(self.n, self.right - self.left)
    }

    /// `α(p)`: 1 on `p ≥ 0`, `alpha_neg` below.
    pub fn alpha(&self, p: f64) -> f64 {
        if p >= 0.0 {
            1.0
        } else {
            self.alpha_neg
        }
    }

    /// Samples of `e^{−α(p)|p|}`.
    pub fn profile(&self) -> Vec<f64> {
        self.points()
            .iter()
            .map(|&p| (-self.alpha(p) * p.abs()).exp())
            .collect()
    }

    /// Index of the node equal to `p` (within a tiny fraction of `Δp`).
    pub fn index_of(&self, p: f64) -> Option<usize> {
        let x = (p - self.left) / self.dp();
        let j = x.round();
        if (x - j).abs() < 1e-9 && j >= 0.0 && (j as usize) < self.n {
            Some(j as usize)
        } else {
            None
        }
    }

    /// First node strictly above zero.
    pub fn first_positive(&self) -> usize {
        let tol = 1e-9 * self.dp();
        self.points()
            .iter()
            .position(|&p| p > tol)
            .unwrap_or(self.n - 1)
    }

    /// Third node above zero.
    pub fn default_p_star(&self) -> f64 {
        let j = (self.first_positive() + 2).min(self.n - 1);
        self.left + j as f64 * self.dp()
    }
}

/// `Φ_{jl} = e^{iμ_l(x_j − a)} = (−1)^j e^{2πijl/M}`.
pub fn fourier_matrix(m: usize) -> Result<CMatrix> {
    check_pow2(m, "M")?;
    Ok(CMatrix::from_fn(m, m, |j, l| {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let theta = 2.0 * PI * ((j * l) % m) as f64 / m as f64;
        c64(sign * theta.cos(), sign * theta.sin())
    }))
}

/// Unitary DFT `F_{jk} = e^{2πijk/M}/√M`.
pub fn unitary_dft(m: usize) -> CMatrix {
    let s = 1.0 / (m as f64).sqrt();
    CMatrix::from_fn(m, m, |j, k| {
        let theta = 2.0 * PI * ((j * k) % m) as f64 / m as f64;
        c64(s * theta.cos(), s * theta.sin())
    })
}

/// Dense spectral matrices of one axis.
#[derive(Debug, Clone)]
pub struct SpectralOps {
    pub phi: CMatrix,
    pub phi_inv: CMatrix,
    pub dmu: Vec<f64>,
    pub pmu: CMatrix,
    pub dx: Vec<f64>,
}

impl SpectralOps {
    pub fn dmu_matrix(&self) -> CMatrix {
        crate::linalg::real_diag(&self.dmu)
    }

    pub fn dx_matrix(&self) -> CMatrix {
        crate::linalg::real_diag(&self.dx)
    }
}

pub fn momentum_operator(grid: &Grid) -> Result<SpectralOps> {
    grid.validate()?;
    let phi = fourier_matrix(grid.m)?;
    let phi_inv = phi.adjoint() / c64(grid.m as f64, 0.0);
    let dmu = grid.mu();
    let pmu = fourier_symbol_matrix(&dmu.iter().map(|&v| c64(v, 0.0)).collect::<Vec<_>>());
    Ok(SpectralOps {
        phi,
        phi_inv,
        dmu,
        pmu,
        dx: grid.points(),
    })
}

/// Dense `Φ diag(f) Φ⁻¹`.
pub fn fourier_symbol_matrix(symbol: &[C64]) -> CMatrix {
    let m = symbol.len();
    let phi = fourier_matrix(m).expect("power-of-two symbol length");
    let mut scaled = phi.clone();
    for (l, &f) in symbol.iter().enumerate() {
        scaled.column_mut(l).iter_mut().for_each(|z| *z *= f);
    }
    let dense = scaled * phi.adjoint() / c64(m as f64, 0.0);
    if symbol.iter().all(|z| z.im == 0.0) {
        // real symbol: remove rounding asymmetry so the result is exactly Hermitian
        (&dense + dense.adjoint()) * c64(0.5, 0.0)
    } else {
        dense
    }
}

/// Row-major flat index with the first coordinate slowest.
pub fn flatten(j: &[usize], m: usize) -> usize {
    j.iter().fold(0, |acc, &k| acc * m + k)
}

pub fn unflatten(mut n: usize, m: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; d];
    for slot in out.iter_mut().rev() {
        *slot = n % m;
        n /= m;
    }
    out
}

/// Samples `f` on every node in flat order; a non-finite value is reported
/// with its multi-index.
pub fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    grid.validate()?;
    (0..grid.total())
        .map(|n| {
            let j = unflatten(n, grid.m, grid.d);
            let v = f(&grid.node(&j));
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { node: j, value: v })
            }
        })
        .collect()
}

/// Diagonal operator with entries `f(x_j)`.
pub fn diag_from_function(f: impl Fn(&[f64]) -> f64, grid: &Grid) -> Result<KronOperator> {
    let values = sample(grid, f)?;
    Ok(KronOperator::new(vec![Factor::Diagonal(
        values.into_iter().map(|v| c64(v, 0.0)).collect(),
    )]))
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Runs `op` on contiguous batches of whole lines along `axis` of a
/// row-major tensor with shape `dims`.
pub fn map_lines<F>(v: &mut [C64], dims: &[usize], axis: usize, op: F)
where
    F: Fn(&mut [C64]) + Sync,
{
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let total = v.len();
    debug_assert_eq!(total, dims.iter().product::<usize>());
    let lines_per_batch = (4096 / n).max(1);
    if inner == 1 {
        v.par_chunks_mut(n * lines_per_batch).for_each(|c| op(c));
        return;
    }
    let mut buf = vec![ZERO; total];
    // gather: line index = o * inner + i
    buf.par_chunks_mut(n * inner).enumerate().for_each(|(o, block)| {
        let src = &v[o * n * inner..(o + 1) * n * inner];
        for i in 0..inner {
            for k in 0..n {
                block[i * n + k] = src[k * inner + i];
            }
        }
    });
    buf.par_chunks_mut(n * lines_per_batch).for_each(|c| op(c));
    v.par_chunks_mut(n * inner).enumerate().for_each(|(o, dst)| {
        let block = &buf[o * n * inner..(o + 1) * n * inner];
        for i in 0..inner {
            for k in 0..n {
                dst[k * inner + i] = block[i * n + k];
            }
        }
    });
}

fn alternate_sign(lines: &mut [C64], n: usize) {
    for line in lines.chunks_mut(n) {
        for z in line.iter_mut().skip(1).step_by(2) {
            *z = -*z;
        }
    }
}

/// `v ← Φ v` along `axis`.
pub fn phi_apply(v: &mut [C64], dims: &[usize], axis: usize) {
    let n = dims[axis];
    let fft = plan(n, true);
    map_lines(v, dims, axis, |c| {
        fft.process(c);
        alternate_sign(c, n);
    });
}

/// `v ← Φ⁻¹ v` along `axis`.
pub fn phi_inverse_apply(v: &mut [C64], dims: &[usize], axis: usize) {
    let n = dims[axis];
    let fft = plan(n, false);
    let s = 1.0 / n as f64;
    map_lines(v, dims, axis, |c| {
        alternate_sign(c, n);
        fft.process(c);
        c.iter_mut().for_each(|z| *z *= s);
    });
}

/// `v ← Φ diag(symbol) Φ⁻¹ v` along `axis`.
pub fn fourier_symbol_apply(v: &mut [C64], dims: &[usize], axis: usize, symbol: &[C64]) {
    let n = dims[axis];
    let fwd = plan(n, false);
    let inv = plan(n, true);
    let s = 1.0 / n as f64;
    map_lines(v, dims, axis, |c| {
        alternate_sign(c, n);
        fwd.process(c);
        for line in c.chunks_mut(n) {
            for (z, f) in line.iter_mut().zip(symbol) {
                *z *= f * s;
            }
        }
        inv.process(c);
        alternate_sign(c, n);
    });
}

/// `v ← diag(entries) v` along `axis`.
pub fn diagonal_apply(v: &mut [C64], dims: &[usize], axis: usize, entries: &[C64]) {
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    v.par_chunks_mut(n * inner).for_each(|block| {
        for (k, chunk) in block.chunks_mut(inner).enumerate() {
            let e = entries[k];
            chunk.iter_mut().for_each(|z| *z *= e);
        }
    });
}

/// `v ← M v` along `axis` for a dense `n × n` matrix.
pub fn dense_apply(v: &mut [C64], dims: &[usize], axis: usize, m: &CMatrix) {
    let n = dims[axis];
    map_lines(v, dims, axis, |c| {
        let mut tmp = vec![ZERO; n];
        for line in c.chunks_mut(n) {
            for (i, t) in tmp.iter_mut().enumerate() {
                *t = (0..n).map(|k| m[(i, k)] * line[k]).sum();
            }
            line.copy_from_slice(&tmp);
        }
    });
}

/// One tensor factor of a Kronecker product.
#[derive(Debug, Clone)]
pub enum Factor {
    Identity(usize),
    /// Diagonal in the position basis.
    Diagonal(Vec<C64>),
    /// `P_μ` for the given `μ` values.
    Momentum(Vec<f64>),
    /// `P_μ²`.
    MomentumSquared(Vec<f64>),
    /// `Φ diag(f) Φ⁻¹` for a general symbol `f(μ)`.
    Fourier(Vec<C64>),
    Dense(CMatrix),
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Identity(n) => *n,
            Factor::Diagonal(e) => e.len(),
            Factor::Momentum(mu) | Factor::MomentumSquared(mu) => mu.len(),
            Factor::Fourier(s) => s.len(),
            Factor::Dense(m) => m.nrows(),
        }
    }

    /// Fourier symbol for the momentum-type factors.
    pub fn symbol(&self) -> Option<Vec<C64>> {
        match self {
            Factor::Momentum(mu) => Some(mu.iter().map(|&v| c64(v, 0.0)).collect()),
            Factor::MomentumSquared(mu) => Some(mu.iter().map(|&v| c64(v * v, 0.0)).collect()),
            Factor::Fourier(s) => Some(s.clone()),
            _ => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Factor::Identity(_))
    }

    pub fn apply(&self, v: &mut [C64], dims: &[usize], axis: usize) {
        match self {
            Factor::Identity(_) => {}
            Factor::Diagonal(e) => diagonal_apply(v, dims, axis, e),
            Factor::Dense(m) => dense_apply(v, dims, axis, m),
            other => {
                let s = other.symbol().expect("momentum factor");
                fourier_symbol_apply(v, dims, axis, &s)
            }
        }
    }

    pub fn adjoint(&self) -> Factor {
        match self {
            Factor::Identity(n) => Factor::Identity(*n),
            Factor::Diagonal(e) => Factor::Diagonal(e.iter().map(|z| z.conj()).collect()),
            Factor::Momentum(mu) => Factor::Momentum(mu.clone()),
            Factor::MomentumSquared(mu) => Factor::MomentumSquared(mu.clone()),
            Factor::Fourier(s) => Factor::Fourier(s.iter().map(|z| z.conj()).collect()),
            Factor::Dense(m) => Factor::Dense(m.adjoint()),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Factor::Identity(n) => CMatrix::identity(*n, *n),
            Factor::Diagonal(e) => crate::linalg::diag(e),
            Factor::Dense(m) => m.clone(),
            other => fourier_symbol_matrix(&other.symbol().expect("momentum factor")),
        }
    }
}

/// `scale · (F_1 ⊗ F_2 ⊗ ... ⊗ F_k)`, applied factor by factor.
#[derive(Debug, Clone)]
pub struct KronOperator {
    pub factors: Vec<Factor>,
    pub scale: C64,
}

impl KronOperator {
    pub fn new(factors: Vec<Factor>) -> Self {
        KronOperator {
            factors,
            scale: ONE,
        }
    }

    pub fn scaled(mut self, s: C64) -> Self {
        self.scale *= s;
        self
    }

    /// Appends `factor` as the new innermost tensor slot.
    pub fn with_factor(mut self, factor: Factor) -> Self {
        self.factors.push(factor);
        self
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = v.to_vec();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, v: &mut [C64]) -> Result<()> {
        let dims = self.dims();
        let dim: usize = dims.iter().product();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        for (axis, f) in self.factors.iter().enumerate() {
            f.apply(v, &dims, axis);
        }
        if self.scale != ONE {
            v.par_iter_mut().for_each(|z| *z *= self.scale);
        }
        Ok(())
    }

    pub fn adjoint(&self) -> KronOperator {
        KronOperator {
            factors: self.factors.iter().map(Factor::adjoint).collect(),
            scale: self.scale.conj(),
        }
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        let dim = self.dim();
        if dim > DENSE_LIMIT {
            return Err(Error::TooLarge {
                dim,
                limit: DENSE_LIMIT,
            });
        }
        let mut acc = CMatrix::identity(1, 1);
        for f in &self.factors {
            acc = kron(&acc, &f.to_dense());
        }
        Ok(acc * self.scale)
    }
}

/// Sum of Kronecker products acting on a common space.
#[derive(Debug, Clone, Default)]
pub struct KronSum {
    pub terms: Vec<KronOperator>,
}

impl KronSum {
    pub fn new(terms: Vec<KronOperator>) -> Self {
        KronSum { terms }
    }

    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, KronOperator::dim)
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = vec![ZERO; v.len()];
        for t in &self.terms {
            let y = t.apply(v)?;
            out.par_iter_mut().zip(y.par_iter()).for_each(|(o, y)| *o += y);
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> KronSum {
        KronSum {
            terms: self.terms.iter().map(KronOperator::adjoint).collect(),
        }
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        let dim = self.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            acc += t.to_dense()?;
        }
        Ok(acc)
    }
}

/// Applies a Kronecker operator; a thin free-function form of
/// [`KronOperator::apply`].
pub fn kron_apply(op: &KronOperator, v: &[C64]) -> Result<Vec<C64>> {
    op.apply(v)
}
