//! Lifting a linear system `du/dt = Au + b` to a Hamiltonian system on the
//! extended `(u-index ⊗ p)` space.

use log::warn;

use crate::error::{Error, Result};
use crate::evolve::{Basis, SplitTerm};
use crate::grid::{Factor, KronOperator, KronSum, PGrid, DENSE_LIMIT};
use crate::linalg::{
    c64, eigh, ensure_square, hermitian_defect, max_norm, sparsity, spectral_radius, CMatrix,
    C64, I, ONE, ZERO,
};
use crate::warp::{estimate_domain, extend_initial, WarpedState};

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: CMatrix,
    pub b: Vec<C64>,
    pub u0: Vec<C64>,
}

impl LinearSystem {
    pub fn new(a: CMatrix, b: Option<Vec<C64>>, u0: Vec<C64>) -> Result<Self> {
        let n = ensure_square(&a)?;
        if n == 0 {
            return Err(Error::InvalidArgument("empty system".into()));
        }
        let b = b.unwrap_or_else(|| vec![ZERO; n]);
        for v in [&b, &u0] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !(a.iter().all(finite) && b.iter().all(finite) && u0.iter().all(finite)) {
            return Err(Error::InvalidArgument(
                "system contains non-finite entries".into(),
            ));
        }
        Ok(LinearSystem { a, b, u0 })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.b.iter().all(|z| *z == ZERO)
    }
}

/// `Ã = [[A, b], [0, 0]]`, `ũ₀ = [u₀; 1]`; unchanged when `b = 0`.
pub fn augment_inhomogeneous(sys: &LinearSystem) -> LinearSystem {
    if sys.is_homogeneous() {
        return sys.clone();
    }
    let n = sys.dim();
    let mut a = CMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    for i in 0..n {
        a[(i, n)] = sys.b[i];
    }
    let mut u0 = sys.u0.clone();
    u0.push(ONE);
    LinearSystem {
        a,
        b: vec![ZERO; n + 1],
        u0,
    }
}

/// `A = H1 + iH2` with both parts Hermitian.
#[derive(Debug, Clone)]
pub struct HermitianSplit {
    pub h1: CMatrix,
    pub h2: CMatrix,
    /// `H1` is negative semi-definite (largest eigenvalue ≤ 1e−10).
    pub stable: bool,
    pub lambda_max_h1: f64,
    pub sparsity_h1: usize,
    pub sparsity_h2: usize,
    pub max_norm_h1: f64,
    pub max_norm_h2: f64,
    pub max_norm_a: f64,
}

pub fn hermitian_split(a: &CMatrix) -> Result<HermitianSplit> {
    ensure_square(a)?;
    let adj = a.adjoint();
    let h1 = (a + &adj) * c64(0.5, 0.0);
    let h2 = (a - &adj) * c64(0.0, -0.5);
    let lambda_max_h1 = if h1.nrows() <= DENSE_LIMIT {
        eigh(&h1)?.0.last().copied().unwrap_or(0.0)
    } else {
        return Err(Error::TooLarge {
            dim: h1.nrows(),
            limit: DENSE_LIMIT,
        });
    };
    Ok(HermitianSplit {
        stable: lambda_max_h1 <= 1e-10,
        lambda_max_h1,
        sparsity_h1: sparsity(&h1, 0.0),
        sparsity_h2: sparsity(&h2, 0.0),
        max_norm_h1: max_norm(&h1),
        max_norm_h2: max_norm(&h2),
        max_norm_a: max_norm(a),
        h1,
        h2,
    })
}

/// One summand `outer ⊗ P_μ^k` of a lifted Hamiltonian.
#[derive(Debug, Clone)]
pub struct LiftedTerm {
    pub outer: KronOperator,
    pub p_power: u32,
}

impl LiftedTerm {
    pub fn new(outer: KronOperator, p_power: u32) -> Self {
        LiftedTerm { outer, p_power }
    }
}

/// Hermitian generator `dw/dt = iHw` on `(outer register) ⊗ (p lattice)`.
///
/// `H = Σ_t O_t ⊗ P_μ^{k_t}` in the `p` position basis and
/// `Σ_t O_t ⊗ D_μ^{k_t}` after the `p` transform.
#[derive(Debug, Clone)]
pub struct SchrodingerisedSystem {
    pub outer_dims: Vec<usize>,
    pub pgrid: PGrid,
    pub terms: Vec<LiftedTerm>,
    pub w0: WarpedState,
    /// Terms of a first-order splitting, each diagonal in a tensor basis.
    pub splitting: Vec<SplitTerm>,
}

impl SchrodingerisedSystem {
    pub fn new(
        outer_dims: Vec<usize>,
        pgrid: PGrid,
        terms: Vec<LiftedTerm>,
        w0: WarpedState,
    ) -> Result<Self> {
        let outer: usize = outer_dims.iter().product();
        for t in &terms {
            if t.outer.dim() != outer {
                return Err(Error::DimensionMismatch {
                    expected: outer,
                    got: t.outer.dim(),
                });
            }
            if t.p_power > 2 {
                return Err(Error::Unsupported(format!("p power {}", t.p_power)));
            }
        }
        if w0.values.len() != outer * pgrid.n {
            return Err(Error::DimensionMismatch {
                expected: outer * pgrid.n,
                got: w0.values.len(),
            });
        }
        Ok(SchrodingerisedSystem {
            outer_dims,
            pgrid,
            terms,
            w0,
            splitting: Vec::new(),
        })
    }

    pub fn outer_dim(&self) -> usize {
        self.outer_dims.iter().product()
    }

    pub fn dim(&self) -> usize {
        self.outer_dim() * self.pgrid.n
    }

    /// Full tensor shape, `p` last.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = self.outer_dims.clone();
        d.push(self.pgrid.n);
        d
    }

    fn p_factor(&self, power: u32, diagonal: bool) -> Factor {
        let eta = self.pgrid.eta();
        match (power, diagonal) {
            (0, _) => Factor::Identity(self.pgrid.n),
            (1, false) => Factor::Momentum(eta),
            (2, false) => Factor::MomentumSquared(eta),
            (k, true) => Factor::Diagonal(eta.iter().map(|&e| c64(e.powi(k as i32), 0.0)).collect()),
            _ => unreachable!("powers above two are rejected at construction"),
        }
    }

    /// `H` with the `p` axis in position representation.
    pub fn h(&self) -> KronSum {
        KronSum::new(
            self.terms
                .iter()
                .map(|t| t.outer.clone().with_factor(self.p_factor(t.p_power, false)))
                .collect(),
        )
    }

    /// `H` conjugated into the `p` Fourier basis.
    pub fn hdiag(&self) -> KronSum {
        KronSum::new(
            self.terms
                .iter()
                .map(|t| t.outer.clone().with_factor(self.p_factor(t.p_power, true)))
                .collect(),
        )
    }

    /// Dense outer matrices grouped by `p` power (index = power).
    pub fn outer_blocks(&self) -> Result<Vec<Option<CMatrix>>> {
        let n = self.outer_dim();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                dim: n,
                limit: DENSE_LIMIT,
            });
        }
        let mut blocks: Vec<Option<CMatrix>> = vec![None, None, None];
        for t in &self.terms {
            let m = t.outer.to_dense()?;
            let slot = &mut blocks[t.p_power as usize];
            *slot = Some(match slot.take() {
                Some(acc) => acc + m,
                None => m,
            });
        }
        Ok(blocks)
    }

    /// `max(‖H − H†‖_max, ‖Hdiag − Hdiag†‖_max)` from dense forms.
    pub fn hermitian_defect(&self) -> Result<f64> {
        let h = self.h().to_dense()?;
        let hd = self.hdiag().to_dense()?;
        Ok(hermitian_defect(&h).max(hermitian_defect(&hd)))
    }

    pub fn with_splitting(mut self, splitting: Vec<SplitTerm>) -> Self {
        self.splitting = splitting;
        self
    }
}

/// `H = −(H1 ⊗ P_μ) + (H2 ⊗ I)`, `w₀ = u₀ ⊗ e^{−α(p)|p|}`.
pub fn assemble_schrodingerised(
    split: &HermitianSplit,
    pgrid: &PGrid,
    u0: &[C64],
) -> Result<SchrodingerisedSystem> {
    let n = split.h1.nrows();
    if u0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u0.len(),
        });
    }
    if !split.stable {
        warn!(
            "H1 has a positive eigenvalue {:.3e}; the lifted wave moves right and recovery is unreliable",
            split.lambda_max_h1
        );
    }
    let terms = vec![
        LiftedTerm::new(
            KronOperator::new(vec![Factor::Dense(split.h1.clone())]).scaled(c64(-1.0, 0.0)),
            1,
        ),
        LiftedTerm::new(KronOperator::new(vec![Factor::Dense(split.h2.clone())]), 0),
    ];
    let w0 = extend_initial(u0, pgrid)?;
    let sys = SchrodingerisedSystem::new(vec![n], pgrid.clone(), terms, w0)?;
    let splitting = ode_splitting(split, pgrid)?;
    Ok(sys.with_splitting(splitting))
}

/// Trotter pair for the ODE path: `−H1 ⊗ D_μ` in the eigenbasis of `H1` and
/// `H2 ⊗ I` in the eigenbasis of `H2`, both Fourier along `p`.
fn ode_splitting(split: &HermitianSplit, pgrid: &PGrid) -> Result<Vec<SplitTerm>> {
    let eta = pgrid.eta();
    let (l1, q1) = eigh(&split.h1)?;
    let (l2, q2) = eigh(&split.h2)?;
    let n = pgrid.n;
    let t1 = SplitTerm {
        bases: vec![Basis::eigen(q1), Basis::Fourier],
        theta: l1
            .iter()
            .flat_map(|&l| eta.iter().map(move |&e| -l * e))
            .collect(),
    };
    // `I` on the p axis is diagonal in any basis; staying in Fourier avoids
    // two transforms per step
    let t2 = SplitTerm {
        bases: vec![Basis::eigen(q2), Basis::Fourier],
        theta: l2.iter().flat_map(|&l| std::iter::repeat_n(l, n)).collect(),
    };
    Ok(vec![t1, t2])
}

/// Default `p` lattice for an ODE input: `s_max = ρ(H1)` and
/// `L = L0 − T s_max`, with `L0 = −10/alpha_neg` so the extension has decayed
/// to `e^{−10}` at the support edge.
pub fn default_pgrid(
    split: &HermitianSplit,
    t_final: f64,
    n: usize,
    alpha_neg: f64,
    right: f64,
) -> Result<PGrid> {
    let s_max = spectral_radius(&split.h1, 1e-6)?;
    let l0 = -10.0 / alpha_neg;
    let left = estimate_domain(t_final, s_max, l0) - 1.0;
    PGrid::new(left, right, n, alpha_neg, l0)
}

/// Imaginary unit helper used by callers building `A = −iΣ...`.
pub fn times_i(m: &CMatrix) -> CMatrix {
    m * I
}
