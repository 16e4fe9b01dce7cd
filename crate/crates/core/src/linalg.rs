//! Dense complex linear algebra shared by the engines and the oracles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Largest entry in absolute value.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Maximum absolute column sum.
pub fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖M − M†‖_max`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Hermitian to `1e−12` relative to the largest entry.
pub fn dense_is_hermitian(m: &CMatrix) -> bool {
    m.nrows() == m.ncols() && hermitian_defect(m) <= 1e-12 * max_norm(m).max(1.0)
}

/// Largest number of entries above `tol` in any row.
pub fn sparsity(m: &CMatrix, tol: f64) -> usize {
    m.row_iter()
        .map(|row| row.iter().filter(|z| z.norm() > tol).count())
        .max()
        .unwrap_or(0)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn relative_l2(a: &[C64], b: &[C64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    diff / vec_norm(b)
}

pub fn matvec(m: &CMatrix, v: &[C64]) -> Vec<C64> {
    let x = CVector::from_column_slice(v);
    (m * x).as_slice().to_vec()
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues (ascending)
/// and unitary eigenvectors stored column-wise.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let scale = max_norm(m).max(1.0);
    let defect = hermitian_defect(m);
    if defect > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "matrix is not Hermitian (defect {defect:e})"
        )));
    }
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, polish_unitary(vectors)))
}

/// Newton-Schulz steps `Q ← Q(3I − Q†Q)/2` toward the nearest unitary.
/// Repeated basis changes in product formulas otherwise accumulate the
/// eigensolver's orthogonality defect step after step.
pub fn polish_unitary(mut q: CMatrix) -> CMatrix {
    let n = q.nrows();
    for _ in 0..3 {
        let g = q.adjoint() * &q;
        let defect = max_norm(&(&g - identity(n)));
        if defect < 1e-15 {
            break;
        }
        q = &q * (identity(n) * c64(1.5, 0.0) - g * c64(0.5, 0.0));
    }
    q
}

/// `f(M)` for Hermitian `M` through its eigendecomposition.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> C64) -> Result<CMatrix> {
    let (values, q) = eigh(m)?;
    Ok(apply_spectrum(&values, &q, f))
}

pub fn apply_spectrum(values: &[f64], q: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let mut scaled = q.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let fj = f(lambda);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= fj);
    }
    scaled * q.adjoint()
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_two_norm(m: &CMatrix) -> Result<f64> {
    let (values, _) = eigh(m)?;
    Ok(values.iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

/// Spectral norm of a general matrix (largest singular value).
pub fn two_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().fold(0.0, |a, &b| a.max(b))
}

/// Spectral radius estimate by power iteration. The iterate norm ratio
/// converges to the largest eigenvalue modulus of a normal matrix even when
/// `±λ` share that modulus.
pub fn spectral_radius(m: &CMatrix, tol: f64) -> Result<f64> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = CVector::from_fn(n, |i, _| c64(1.0 + 0.37 * (i as f64).sin(), 0.1 * i as f64 / n as f64));
    let nv = v.norm();
    v /= c64(nv, 0.0);
    let mut estimate = 0.0;
    for _ in 0..20_000 {
        let mut next = m * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        next /= c64(norm, 0.0);
        // two applications separate the ±λ pair from its complement
        let converged = (norm - estimate).abs() <= tol * norm.max(1e-300);
        estimate = norm;
        v = next;
        if converged {
            return Ok(estimate);
        }
    }
    Ok(estimate)
}

/// Dense matrix exponential (Padé scaling and squaring).
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    ensure_square(m)?;
    Ok(m.clone().exp())
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<CMatrix> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("ragged matrix rows".into()));
    }
    Ok(CMatrix::from_fn(n, cols, |i, j| c64(rows[i][j], 0.0)))
}

pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_fn(values.len(), values.len(), |i, j| {
        if i == j {
            c64(values[i], 0.0)
        } else {
            ZERO
        }
    })
}
