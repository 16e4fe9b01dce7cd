//! Parity-dilating unitarisation of `du/dt = (H1 + iH2)u`: the contraction
//! `e^{H1 Δt}` is embedded as the top-left block of a unitary, and a ladder of
//! fresh ancilla slots defers post-selection to the end.

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    apply_spectrum, c64, eigh, hermitian_two_norm, matvec, one_norm, vec_norm, CMatrix, C64,
    ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DilationVariant {
    /// Dilate `H_Δt = e^{H1 Δt}`.
    ExactExp,
    /// Build `(σ_z ⊗ I) e^{iσ_y ⊗ arccos(H1 Δt)}` literally, whose top block
    /// is `H1 Δt`.
    TheoremArccos,
}

#[derive(Debug, Clone)]
pub struct DilationStep {
    pub hdt: CMatrix,
    /// `√(I − H_Δt²)`.
    pub off: CMatrix,
    pub utilde: CMatrix,
    /// `e^{iH2 Δt}`.
    pub phase: CMatrix,
    pub dt: f64,
    pub variant: DilationVariant,
}

/// `[[H, S], [S, −H]]`.
fn block_unitary(h: &CMatrix, s: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let mut u = CMatrix::zeros(2 * n, 2 * n);
    u.view_mut((0, 0), (n, n)).copy_from(h);
    u.view_mut((0, n), (n, n)).copy_from(s);
    u.view_mut((n, 0), (n, n)).copy_from(s);
    u.view_mut((n, n), (n, n)).copy_from(&(-h));
    u
}

/// `√(I − H²)` for Hermitian `H` with `‖H‖₂ ≤ 1`, clamping rounding
/// negatives of `1 − λ²` down to `−1e−12`.
pub fn complement(h: &CMatrix) -> Result<CMatrix> {
    let (vals, q) = eigh(h)?;
    for &l in &vals {
        let r = 1.0 - l * l;
        if r < -1e-12 {
            return Err(Error::StepCondition(format!(
                "eigenvalue {l} of the dilated block lies outside [-1, 1]"
            )));
        }
    }
    Ok(apply_spectrum(&vals, &q, |l| c64((1.0 - l * l).max(0.0).sqrt(), 0.0)))
}

/// `arccos(H)` for Hermitian `H` with spectrum in `[−1, 1]`.
pub fn arccos_hermitian(h: &CMatrix) -> Result<CMatrix> {
    let (vals, q) = eigh(h)?;
    if let Some(l) = vals.iter().find(|l| l.abs() > 1.0 + 1e-12) {
        return Err(Error::StepCondition(format!(
            "eigenvalue {l} outside [-1, 1]; arccos undefined"
        )));
    }
    Ok(apply_spectrum(&vals, &q, |l| c64(l.clamp(-1.0, 1.0).acos(), 0.0)))
}

/// `(σ_z ⊗ I) e^{iσ_y ⊗ Θ}` assembled from `cos Θ` and `sin Θ`.
pub fn rotation_form(theta: &CMatrix) -> Result<CMatrix> {
    let (vals, q) = eigh(theta)?;
    let c = apply_spectrum(&vals, &q, |t| c64(t.cos(), 0.0));
    let s = apply_spectrum(&vals, &q, |t| c64(t.sin(), 0.0));
    // e^{iσ_y⊗Θ} = [[cos, sin], [−sin, cos]]; σ_z flips the bottom row
    Ok(block_unitary(&c, &s))
}

pub fn build_dilation_step(
    h1: &CMatrix,
    h2: &CMatrix,
    dt: f64,
    variant: DilationVariant,
) -> Result<DilationStep> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if h1.shape() != h2.shape() {
        return Err(Error::DimensionMismatch {
            expected: h1.nrows(),
            got: h2.nrows(),
        });
    }
    let (l1, q1) = eigh(h1)?;
    let (hdt, off) = match variant {
        DilationVariant::ExactExp => {
            let top = l1.last().copied().unwrap_or(0.0);
            if top > 1e-10 {
                return Err(Error::StepCondition(format!(
                    "H1 has eigenvalue {top:e} > 0, so ‖e^{{H1 dt}}‖ > 1"
                )));
            }
            let hdt = apply_spectrum(&l1, &q1, |l| c64((l * dt).exp(), 0.0));
            let off = apply_spectrum(&l1, &q1, |l| {
                c64((1.0 - (2.0 * l * dt).exp()).max(0.0).sqrt(), 0.0)
            });
            (hdt, off)
        }
        DilationVariant::TheoremArccos => {
            let a = h1 + h2 * crate::linalg::I;
            let a1 = one_norm(&a);
            let h1n = hermitian_two_norm(h1)?;
            info!("dilation norms: ‖A‖₁ dt = {:.6}, ‖H1‖₂ dt = {:.6}", a1 * dt, h1n * dt);
            if a1 * dt > 1.0 + 1e-12 {
                return Err(Error::StepCondition(format!(
                    "‖A‖₁ dt = {} exceeds 1; admissible dt = {}",
                    a1 * dt,
                    1.0 / a1
                )));
            }
            let hdt = h1 * c64(dt, 0.0);
            let off = complement(&hdt)?;
            (hdt, off)
        }
    };
    let (l2, q2) = eigh(h2)?;
    let phase = apply_spectrum(&l2, &q2, |l| C64::from_polar(1.0, l * dt));
    Ok(DilationStep {
        utilde: block_unitary(&hdt, &off),
        hdt,
        off,
        phase,
        dt,
        variant,
    })
}

/// `(H_Δt e^{iH2Δt}ψ, √(I−H_Δt²) e^{iH2Δt}ψ)`.
pub fn evolutionary_step(step: &DilationStep, psi: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let e = matvec(&step.phase, psi);
    (matvec(&step.hdt, &e), matvec(&step.off, &e))
}

/// `(top/‖top‖, ‖top‖²/(‖top‖² + ‖bottom‖²))`.
pub fn postselect(top: &[C64], bottom: &[C64]) -> Result<(Vec<C64>, f64)> {
    let t2 = vec_norm(top).powi(2);
    let b2 = vec_norm(bottom).powi(2);
    if t2 + b2 == 0.0 {
        return Err(Error::Numerical("cannot post-select a zero state".into()));
    }
    let p = t2 / (t2 + b2);
    let nt = t2.sqrt();
    let state = if nt > 0.0 {
        top.iter().map(|z| z / nt).collect()
    } else {
        vec![ZERO; top.len()]
    };
    Ok((state, p))
}

/// Register of `N_t + 1` slots of length `n`: slot 0 carries the solution,
/// slot `j` is the ancilla consumed by the `j`-th step.
#[derive(Debug, Clone)]
pub struct DilationLadder {
    pub n: usize,
    pub n_steps: usize,
    pub state: Vec<C64>,
    pub success_log: Vec<f64>,
    applied: usize,
}

impl DilationLadder {
    pub fn new(psi0: &[C64], n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidArgument("ladder needs at least one step".into()));
        }
        let n = psi0.len();
        let mut state = vec![ZERO; (n_steps + 1) * n];
        state[..n].copy_from_slice(psi0);
        Ok(DilationLadder {
            n,
            n_steps,
            state,
            success_log: Vec::new(),
            applied: 0,
        })
    }

    pub fn slot(&self, j: usize) -> &[C64] {
        &self.state[j * self.n..(j + 1) * self.n]
    }

    /// Applies `U_j` to slots 0 and `j = applied + 1`.
    pub fn apply_next(&mut self, step: &DilationStep) -> Result<()> {
        let j = self.applied + 1;
        if j > self.n_steps {
            return Err(Error::InvalidArgument("ladder is exhausted".into()));
        }
        let n = self.n;
        let a0 = matvec(&step.phase, self.slot(0));
        let aj = matvec(&step.phase, self.slot(j));
        let h0 = matvec(&step.hdt, &a0);
        let s0 = matvec(&step.off, &a0);
        let hj = matvec(&step.hdt, &aj);
        let sj = matvec(&step.off, &aj);
        for k in 0..n {
            self.state[k] = h0[k] + sj[k];
            self.state[j * n + k] = s0[k] - hj[k];
        }
        self.applied = j;
        let total = vec_norm(&self.state).powi(2);
        self.success_log.push(vec_norm(self.slot(0)).powi(2) / total);
        Ok(())
    }

    /// Dense `U_j` on the full register (for unitarity checks).
    pub fn operator(&self, step: &DilationStep, j: usize) -> CMatrix {
        let n = self.n;
        let dim = (self.n_steps + 1) * n;
        let mut u = CMatrix::identity(dim, dim);
        let ht = &step.hdt * &step.phase;
        let st = &step.off * &step.phase;
        for (r, c, m) in [(0, 0, &ht), (0, j, &st), (j, 0, &st)] {
            u.view_mut((r * n, c * n), (n, n)).copy_from(m);
        }
        u.view_mut((j * n, j * n), (n, n)).copy_from(&(-&ht));
        u
    }
}

/// Runs the full ladder and post-selects once at the end.
pub fn ladder_evolve(
    h1: &CMatrix,
    h2: &CMatrix,
    dt: f64,
    n_steps: usize,
    psi0: &[C64],
    variant: DilationVariant,
) -> Result<(Vec<C64>, f64)> {
    let step = build_dilation_step(h1, h2, dt, variant)?;
    let mut ladder = DilationLadder::new(psi0, n_steps)?;
    for _ in 0..n_steps {
        ladder.apply_next(&step)?;
    }
    let top = ladder.slot(0).to_vec();
    let p = vec_norm(&top).powi(2) / vec_norm(psi0).powi(2);
    Ok((top, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm, max_norm, relative_l2, I, ONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c64(x, 0.0))
    }

    fn unitarity_defect(u: &CMatrix) -> f64 {
        max_norm(&(u.adjoint() * u - CMatrix::identity(u.nrows(), u.nrows())))
    }

    fn random_stable(n: usize, seed: u64) -> (CMatrix, CMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h1 = -(&g * g.adjoint()) * c64(0.5, 0.0);
        let k = CMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h2 = (&k + k.adjoint()) * c64(0.5, 0.0);
        (h1, h2)
    }

    #[test]
    fn zero_h1_gives_sigma_z() {
        let step = build_dilation_step(&CMatrix::zeros(2, 2), &CMatrix::zeros(2, 2), 0.3, DilationVariant::ExactExp).unwrap();
        let sz = crate::linalg::real_diag(&[1.0, 1.0, -1.0, -1.0]);
        assert!(max_norm(&(&step.utilde - sz)) < 1e-15);
        let (top, bottom) = evolutionary_step(&step, &[ONE, c64(0.0, 1.0)]);
        assert!(vec_norm(&bottom) < 1e-15);
        assert!((vec_norm(&top) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scalar_dilation() {
        let step = build_dilation_step(&scalar(-1.0), &scalar(0.0), 0.5, DilationVariant::ExactExp).unwrap();
        assert!((step.hdt[(0, 0)].re - (-0.5f64).exp()).abs() < 1e-15);
        assert!((step.off[(0, 0)].re - (1.0 - (-1.0f64).exp()).sqrt()).abs() < 1e-15);
        assert!(unitarity_defect(&step.utilde) < 1e-14);
        let (top, bottom) = evolutionary_step(&step, &[ONE]);
        let (_, p) = postselect(&top, &bottom).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn ladder_scalar_and_unitary_cases() {
        let (top, p) = ladder_evolve(&scalar(-1.0), &scalar(0.0), 0.5, 2, &[ONE], DilationVariant::ExactExp).unwrap();
        assert!((top[0].re - (-1.0f64).exp()).abs() < 1e-14);
        assert!((p - 0.13534).abs() < 1e-5);

        let (_, h2) = random_stable(3, 4);
        let psi = vec![ONE, c64(0.5, 0.2), c64(-0.3, 0.0)];
        let (top, p) = ladder_evolve(&CMatrix::zeros(3, 3), &h2, 0.1, 5, &psi, DilationVariant::ExactExp).unwrap();
        let expect = matvec(&expm(&(&h2 * c64(0.0, 0.5))).unwrap(), &psi);
        assert!(relative_l2(&top, &expect) < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);

        let (h1, h2) = random_stable(3, 8);
        let step = build_dilation_step(&h1, &h2, 0.1, DilationVariant::ExactExp).unwrap();
        let (one, _) = evolutionary_step(&step, &psi);
        let (top, _) = ladder_evolve(&h1, &h2, 0.1, 1, &psi, DilationVariant::ExactExp).unwrap();
        assert!(relative_l2(&top, &one) < 1e-14);
    }

    #[test]
    fn ladder_operators_are_unitary() {
        let (h1, h2) = random_stable(4, 1);
        let step = build_dilation_step(&h1, &h2, 0.2, DilationVariant::ExactExp).unwrap();
        let ladder = DilationLadder::new(&[ONE; 4], 6).unwrap();
        for j in 1..=6 {
            assert!(unitarity_defect(&ladder.operator(&step, j)) < 1e-12);
        }
    }

    #[test]
    fn block_identity_with_rotation_form() {
        let (h1, h2) = random_stable(4, 2);
        let step = build_dilation_step(&h1, &h2, 0.3, DilationVariant::ExactExp).unwrap();
        let theta = arccos_hermitian(&step.hdt).unwrap();
        let rot = rotation_form(&theta).unwrap();
        assert!(max_norm(&(rot - &step.utilde)) < 1e-10);
        // same identity through the dense exponential of iσ_y ⊗ Θ
        let sy = CMatrix::from_row_slice(2, 2, &[crate::linalg::ZERO, c64(0.0, -1.0), c64(0.0, 1.0), crate::linalg::ZERO]);
        let gen = crate::linalg::kron(&sy, &theta) * I;
        let sz = crate::linalg::kron(&crate::linalg::real_diag(&[1.0, -1.0]), &CMatrix::identity(4, 4));
        let u = sz * expm(&gen).unwrap();
        assert!(max_norm(&(u - &step.utilde)) < 1e-10);
    }

    #[test]
    fn one_step_matches_expm_to_second_order() {
        let (h1, h2) = random_stable(4, 3);
        let psi = vec![ONE, c64(0.0, 1.0), c64(0.2, 0.0), c64(-1.0, 0.5)];
        let a = &h1 + &h2 * I;
        let err = |dt: f64| {
            let step = build_dilation_step(&h1, &h2, dt, DilationVariant::ExactExp).unwrap();
            let (top, _) = evolutionary_step(&step, &psi);
            relative_l2(&top, &matvec(&expm(&(&a * c64(dt, 0.0))).unwrap(), &psi))
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn theorem_variant_checks_the_norm_condition() {
        let (h1, h2) = random_stable(3, 5);
        let a = &h1 + &h2 * I;
        let dt = 1.0 / one_norm(&a);
        let step = build_dilation_step(&h1, &h2, dt, DilationVariant::TheoremArccos).unwrap();
        assert!(unitarity_defect(&step.utilde) < 1e-12);
        assert!(max_norm(&(&step.hdt - &h1 * c64(dt, 0.0))) < 1e-15);
        assert!(build_dilation_step(&h1, &h2, 1.5 * dt, DilationVariant::TheoremArccos).is_err());
        assert!(build_dilation_step(&(-&h1), &h2, 0.1, DilationVariant::ExactExp).is_err());
    }

    #[test]
    fn postselect_cases() {
        let (_, p) = postselect(&[ONE], &[ZERO]).unwrap();
        assert_eq!(p, 1.0);
        let (_, p) = postselect(&[ONE], &[c64(0.0, 1.0)]).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(postselect(&[ZERO], &[ZERO]).is_err());
    }
}
