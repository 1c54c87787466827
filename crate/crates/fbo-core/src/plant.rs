//! State-space plant descriptions: DC gains, non-resonance checks,
//! two-timescale reduction, and augmentation with the constant-disturbance
//! model.

use alloc::string::String;
use alloc::vec::Vec;

use crate::densemat::{
    hurwitz_check, lu_solve, numeric_rank, Matrix, MatrixError, Result,
};

/// Continuous-time LTI plant `ẋ = Ax + Bu + Ew`, `y = Cx`.
#[derive(Debug, Clone)]
pub struct LtiPlant {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub e: Matrix,
}

impl LtiPlant {
    /// Validates shapes only; allows deliberately unstable `A`.
    pub fn new_unchecked(a: Matrix, b: Matrix, c: Matrix, e: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(MatrixError::DimensionMismatch("A must be square".into()));
        }
        let n = a.rows();
        if b.rows() != n || e.rows() != n || c.cols() != n {
            return Err(MatrixError::DimensionMismatch(String::from(
                "B, E rows and C cols must match state dimension",
            )));
        }
        Ok(Self { a, b, c, e })
    }

    /// Validates shapes and requires `A` Hurwitz.
    pub fn require_stable(a: Matrix, b: Matrix, c: Matrix, e: Matrix) -> Result<Self> {
        if hurwitz_check(&a).is_none() {
            return Err(MatrixError::NotHurwitz);
        }
        Self::new_unchecked(a, b, c, e)
    }

    pub fn n_states(&self) -> usize {
        self.a.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.rows()
    }

    pub fn n_disturbances(&self) -> usize {
        self.e.cols()
    }
}

/// Steady-state maps `ȳ = Π_u ū + Π_w w`.
#[derive(Debug, Clone)]
pub struct DcGains {
    pub pi_u: Matrix,
    pub pi_w: Matrix,
}

/// Two-timescale plant with `ε` multiplying the fast-state derivative:
/// `ẋ₁ = A₁₁x₁ + A₁₂x₂ + B₁u + E₁w`, `εẋ₂ = A₂₁x₁ + A₂₂x₂ + B₂u + E₂w`,
/// `y = C₁x₁ + C₂x₂`.
#[derive(Debug, Clone)]
pub struct TwoTimescalePlant {
    pub a11: Matrix,
    pub a12: Matrix,
    pub a21: Matrix,
    pub a22: Matrix,
    pub b1: Matrix,
    pub b2: Matrix,
    pub e1: Matrix,
    pub e2: Matrix,
    pub c1: Matrix,
    pub c2: Matrix,
    pub epsilon: f64,
}

impl TwoTimescalePlant {
    /// Validates shapes and the two stability requirements: `A₂₂` Hurwitz and
    /// the full scaled matrix `blkdiag(I, εI)⁻¹·A` Hurwitz.
    pub fn new(
        a11: Matrix,
        a12: Matrix,
        a21: Matrix,
        a22: Matrix,
        b1: Matrix,
        b2: Matrix,
        e1: Matrix,
        e2: Matrix,
        c1: Matrix,
        c2: Matrix,
        epsilon: f64,
    ) -> Result<Self> {
        let tt =
            Self::new_unchecked(a11, a12, a21, a22, b1, b2, e1, e2, c1, c2, epsilon)?;
        if hurwitz_check(&tt.a22).is_none() {
            return Err(MatrixError::NotHurwitz);
        }
        let full = tt.assemble_full()?;
        if hurwitz_check(&full.a).is_none() {
            return Err(MatrixError::NotHurwitz);
        }
        Ok(tt)
    }

    /// Shape validation only.
    #[allow(clippy::too_many_arguments)]
    pub fn new_unchecked(
        a11: Matrix,
        a12: Matrix,
        a21: Matrix,
        a22: Matrix,
        b1: Matrix,
        b2: Matrix,
        e1: Matrix,
        e2: Matrix,
        c1: Matrix,
        c2: Matrix,
        epsilon: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(MatrixError::ParameterError("epsilon must be positive".into()));
        }
        let n1 = a11.rows();
        let n2 = a22.rows();
        if !a11.is_square()
            || !a22.is_square()
            || a12.rows() != n1
            || a12.cols() != n2
            || a21.rows() != n2
            || a21.cols() != n1
            || b1.rows() != n1
            || b2.rows() != n2
            || b1.cols() != b2.cols()
            || e1.rows() != n1
            || e2.rows() != n2
            || e1.cols() != e2.cols()
            || c1.cols() != n1
            || c2.cols() != n2
            || c1.rows() != c2.rows()
        {
            return Err(MatrixError::DimensionMismatch(
                "inconsistent two-timescale block shapes".into(),
            ));
        }
        Ok(Self { a11, a12, a21, a22, b1, b2, e1, e2, c1, c2, epsilon })
    }

    pub fn n_slow(&self) -> usize {
        self.a11.rows()
    }

    pub fn n_fast(&self) -> usize {
        self.a22.rows()
    }

    /// Rewrites the plant in standard form with the fast rows divided by `ε`.
    pub fn assemble_full(&self) -> Result<LtiPlant> {
        let inv_eps = 1.0 / self.epsilon;
        let a = Matrix::from_blocks(&[
            &[&self.a11, &self.a12],
            &[&self.a21.scale(inv_eps), &self.a22.scale(inv_eps)],
        ])?;
        let b = Matrix::from_blocks(&[&[&self.b1], &[&self.b2.scale(inv_eps)]])?;
        let e = Matrix::from_blocks(&[&[&self.e1], &[&self.e2.scale(inv_eps)]])?;
        let c = Matrix::from_blocks(&[&[&self.c1, &self.c2]])?;
        LtiPlant::new_unchecked(a, b, c, e)
    }

    /// Fast-state quasi steady state `x̄₂ = −A₂₂⁻¹(A₂₁x₁ + B₂u + E₂w)`.
    pub fn quasi_steady_fast(&self, x1: &[f64], u: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = self.a21.matvec(x1)?;
        for (r, v) in rhs.iter_mut().zip(self.b2.matvec(u)?) {
            *r += v;
        }
        for (r, v) in rhs.iter_mut().zip(self.e2.matvec(w)?) {
            *r += v;
        }
        let sol = lu_solve(&self.a22, &Matrix::col_vec(&rhs))?;
        Ok(sol.entries().iter().map(|x| -x).collect())
    }
}

/// Singular-perturbation reduced model of a two-timescale plant:
/// `ẋ₁ = A₀x₁ + B₀u + E₀w`, `y = C₀x₁ + D₀u + Q₀w`.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub a0: Matrix,
    pub b0: Matrix,
    pub c0: Matrix,
    pub d0: Matrix,
    pub e0: Matrix,
    pub q0: Matrix,
}

/// Plant model augmented with the constant-disturbance state `ẇ = 0`.
#[derive(Debug, Clone)]
pub struct AugmentedModel {
    pub a_aug: Matrix,
    pub b_aug: Matrix,
    pub c_aug: Matrix,
    pub d_aug: Matrix,
    /// Plant-state dimension of the augmented state (disturbance block excluded).
    pub n_state: usize,
    /// Disturbance dimension.
    pub n_dist: usize,
    /// Result of the rank condition on `[A E; C 0]` evaluated at construction.
    pub nonresonant: bool,
}

/// DC gains `Π_u = −CA⁻¹B`, `Π_w = −CA⁻¹E` via LU solves.
pub fn dc_gains(p: &LtiPlant) -> Result<DcGains> {
    let ainv_b = lu_solve(&p.a, &p.b)?;
    let ainv_e = lu_solve(&p.a, &p.e)?;
    Ok(DcGains {
        pi_u: p.c.matmul(&ainv_b)?.scale(-1.0),
        pi_w: p.c.matmul(&ainv_e)?.scale(-1.0),
    })
}

fn resonance_matrix(a: &Matrix, e: &Matrix, c: &Matrix) -> Result<Matrix> {
    let zero = Matrix::zeros(c.rows(), e.cols());
    Matrix::from_blocks(&[&[a, e], &[c, &zero]])
}

/// Non-resonance check: `[A E; C 0]` must have full column rank `n + q`.
pub fn check_nonresonance(p: &LtiPlant) -> bool {
    let Ok(m) = resonance_matrix(&p.a, &p.e, &p.c) else {
        return false;
    };
    numeric_rank(&m) == p.n_states() + p.n_disturbances()
}

/// Singular-perturbation reduction of the two-timescale plant.
///
/// The input matrix is corrected for the fast channel:
/// `B₀ = B₁ − A₁₂A₂₂⁻¹B₂`, which is what makes the reduced DC gains agree
/// with the full plant's.
pub fn reduce(tt: &TwoTimescalePlant) -> Result<ReducedModel> {
    let a22inv_a21 = lu_solve(&tt.a22, &tt.a21)?;
    let a22inv_b2 = lu_solve(&tt.a22, &tt.b2)?;
    let a22inv_e2 = lu_solve(&tt.a22, &tt.e2)?;
    Ok(ReducedModel {
        a0: tt.a11.sub(&tt.a12.matmul(&a22inv_a21)?)?,
        b0: tt.b1.sub(&tt.a12.matmul(&a22inv_b2)?)?,
        c0: tt.c1.sub(&tt.c2.matmul(&a22inv_a21)?)?,
        d0: tt.c2.matmul(&a22inv_b2)?.scale(-1.0),
        e0: tt.e1.sub(&tt.a12.matmul(&a22inv_e2)?)?,
        q0: tt.c2.matmul(&a22inv_e2)?.scale(-1.0),
    })
}

/// DC gains of the reduced model: `Π_u = D₀ − C₀A₀⁻¹B₀`, `Π_w = Q₀ − C₀A₀⁻¹E₀`.
pub fn reduced_dc_gains(r: &ReducedModel) -> Result<DcGains> {
    let a0inv_b0 = lu_solve(&r.a0, &r.b0)?;
    let a0inv_e0 = lu_solve(&r.a0, &r.e0)?;
    Ok(DcGains {
        pi_u: r.d0.sub(&r.c0.matmul(&a0inv_b0)?)?,
        pi_w: r.q0.sub(&r.c0.matmul(&a0inv_e0)?)?,
    })
}

/// Augments the plant with the constant-disturbance model:
/// `A_aug = [A E; 0 0]`, `B_aug = [B; 0]`, `C_aug = [C 0]`, `D_aug = 0`.
pub fn augment(p: &LtiPlant) -> Result<AugmentedModel> {
    let n = p.n_states();
    let q = p.n_disturbances();
    let m = p.n_inputs();
    let py = p.n_outputs();
    let a_aug = Matrix::from_blocks(&[
        &[&p.a, &p.e],
        &[&Matrix::zeros(q, n), &Matrix::zeros(q, q)],
    ])?;
    let b_aug = Matrix::from_blocks(&[&[&p.b], &[&Matrix::zeros(q, m)]])?;
    let c_aug = Matrix::from_blocks(&[&[&p.c, &Matrix::zeros(py, q)]])?;
    Ok(AugmentedModel {
        a_aug,
        b_aug,
        c_aug,
        d_aug: Matrix::zeros(py, m),
        n_state: n,
        n_dist: q,
        nonresonant: check_nonresonance(p),
    })
}

/// Augments the reduced model: `A_aug = [A₀ E₀; 0 0]`, `B_aug = [B₀; 0]`,
/// `C_aug = [C₀ Q₀]`, `D_aug = D₀`; also evaluates the rank condition on
/// `[A₀ E₀; C₀ 0]`.
pub fn augment_reduced(r: &ReducedModel) -> Result<AugmentedModel> {
    let n1 = r.a0.rows();
    let q = r.e0.cols();
    let m = r.b0.cols();
    let a_aug = Matrix::from_blocks(&[
        &[&r.a0, &r.e0],
        &[&Matrix::zeros(q, n1), &Matrix::zeros(q, q)],
    ])?;
    let b_aug = Matrix::from_blocks(&[&[&r.b0], &[&Matrix::zeros(q, m)]])?;
    let c_aug = Matrix::from_blocks(&[&[&r.c0, &r.q0]])?;
    let rank_mat = resonance_matrix(&r.a0, &r.e0, &r.c0)?;
    Ok(AugmentedModel {
        a_aug,
        b_aug,
        c_aug,
        d_aug: r.d0.clone(),
        n_state: n1,
        n_dist: q,
        nonresonant: numeric_rank(&rank_mat) == n1 + q,
    })
}

/// Shorthand for `assemble_full` as a free function, mirroring the other ops.
pub fn assemble_full(tt: &TwoTimescalePlant) -> Result<LtiPlant> {
    tt.assemble_full()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn scalar_plant() -> LtiPlant {
        LtiPlant::require_stable(
            mat(&[&[-1.0]]),
            mat(&[&[1.0]]),
            mat(&[&[1.0]]),
            mat(&[&[2.0]]),
        )
        .unwrap()
    }

    #[test]
    fn require_stable_rejects_unstable() {
        let r = LtiPlant::require_stable(
            mat(&[&[1.0]]),
            mat(&[&[1.0]]),
            mat(&[&[1.0]]),
            mat(&[&[1.0]]),
        );
        assert!(matches!(r, Err(MatrixError::NotHurwitz)));
    }

    #[test]
    fn dc_gains_scalar() {
        let g = dc_gains(&scalar_plant()).unwrap();
        assert!((g.pi_u[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((g.pi_w[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dc_gains_identity_blocks() {
        let p = LtiPlant::require_stable(
            Matrix::identity(2).scale(-1.0),
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::zeros(2, 1),
        )
        .unwrap();
        let g = dc_gains(&p).unwrap();
        assert!(g.pi_u.sub(&Matrix::identity(2)).unwrap().norm_inf() < 1e-14);
        assert!(g.pi_w.norm_inf() < 1e-14);
    }

    #[test]
    fn nonresonance_examples() {
        assert!(check_nonresonance(&scalar_plant()));
        let p = LtiPlant::new_unchecked(
            mat(&[&[-1.0]]),
            mat(&[&[1.0]]),
            mat(&[&[0.0]]),
            mat(&[&[1.0]]),
        )
        .unwrap();
        assert!(!check_nonresonance(&p));
    }

    fn decoupled_tt() -> TwoTimescalePlant {
        TwoTimescalePlant::new(
            mat(&[&[-1.0]]),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            mat(&[&[-1.0]]),
            mat(&[&[2.0]]),
            Matrix::zeros(1, 1),
            mat(&[&[1.0]]),
            Matrix::zeros(1, 1),
            mat(&[&[3.0]]),
            Matrix::zeros(1, 1),
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn reduce_decoupled_fast_block() {
        let r = reduce(&decoupled_tt()).unwrap();
        assert!((r.a0[(0, 0)] + 1.0).abs() < 1e-14);
        assert!((r.b0[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((r.c0[(0, 0)] - 3.0).abs() < 1e-14);
        assert!(r.d0.norm_inf() < 1e-14);
        assert!(r.q0.norm_inf() < 1e-14);
        assert!((r.e0[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn assemble_full_scales_fast_rows() {
        let full = decoupled_tt().assemble_full().unwrap();
        assert!((full.a[(0, 0)] + 1.0).abs() < 1e-14);
        assert!((full.a[(1, 1)] + 2.0).abs() < 1e-14);
        assert!(full.a[(0, 1)].abs() < 1e-14);
        assert!(full.a[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn quasi_steady_zeroes_fast_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tt = random_tt(&mut rng, 2, 2, 1, 1);
        let x1: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = [rng.gen_range(-1.0..1.0)];
        let w = [rng.gen_range(-1.0..1.0)];
        let x2 = tt.quasi_steady_fast(&x1, &u, &w).unwrap();
        // fast derivative = A21 x1 + A22 x2 + B2 u + E2 w
        let mut d = tt.a21.matvec(&x1).unwrap();
        for (di, v) in d.iter_mut().zip(tt.a22.matvec(&x2).unwrap()) {
            *di += v;
        }
        for (di, v) in d.iter_mut().zip(tt.b2.matvec(&u).unwrap()) {
            *di += v;
        }
        for (di, v) in d.iter_mut().zip(tt.e2.matvec(&w).unwrap()) {
            *di += v;
        }
        assert!(crate::mathx::norm_inf(&d) < 1e-12);
    }

    fn random_tt(rng: &mut ChaCha8Rng, n1: usize, n2: usize, m: usize, q: usize) -> TwoTimescalePlant {
        loop {
            let rand_mat = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
                Matrix::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .unwrap()
            };
            let mut a11 = rand_mat(rng, n1, n1);
            let mut a22 = rand_mat(rng, n2, n2);
            for i in 0..n1 {
                a11[(i, i)] -= 2.0;
            }
            for i in 0..n2 {
                a22[(i, i)] -= 3.0;
            }
            let tt = TwoTimescalePlant::new(
                a11,
                rand_mat(rng, n1, n2),
                rand_mat(rng, n2, n1),
                a22,
                rand_mat(rng, n1, m),
                rand_mat(rng, n2, m),
                rand_mat(rng, n1, q),
                rand_mat(rng, n2, q),
                rand_mat(rng, 1, n1),
                rand_mat(rng, 1, n2),
                0.1,
            );
            if let Ok(tt) = tt {
                return tt;
            }
        }
    }

    #[test]
    fn reduced_dc_gains_match_full_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let tt = random_tt(&mut rng, 2, 2, 2, 1);
            let g_full = dc_gains(&tt.assemble_full().unwrap()).unwrap();
            let g_red = reduced_dc_gains(&reduce(&tt).unwrap()).unwrap();
            assert!(g_full.pi_u.sub(&g_red.pi_u).unwrap().norm_inf() < 1e-9);
            assert!(g_full.pi_w.sub(&g_red.pi_w).unwrap().norm_inf() < 1e-9);
        }
    }

    #[test]
    fn reduced_dc_gains_trivial_cases() {
        let r = ReducedModel {
            a0: mat(&[&[-1.0]]),
            b0: mat(&[&[1.0]]),
            c0: mat(&[&[1.0]]),
            d0: Matrix::zeros(1, 1),
            e0: Matrix::zeros(1, 1),
            q0: Matrix::zeros(1, 1),
        };
        let g = reduced_dc_gains(&r).unwrap();
        assert!((g.pi_u[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(g.pi_w.norm_inf() < 1e-14);
    }

    #[test]
    fn augment_scalar_blocks() {
        let m = augment(&scalar_plant()).unwrap();
        assert_eq!(m.a_aug, mat(&[&[-1.0, 2.0], &[0.0, 0.0]]));
        assert_eq!(m.b_aug, mat(&[&[1.0], &[0.0]]));
        assert_eq!(m.c_aug, mat(&[&[1.0, 0.0]]));
        assert!(m.nonresonant);
        assert_eq!(m.n_state, 1);
        assert_eq!(m.n_dist, 1);
    }

    #[test]
    fn augment_reduced_rank_condition() {
        // E0 = 0 leaves the disturbance unobservable: rank deficient.
        let r = ReducedModel {
            a0: mat(&[&[-1.0]]),
            b0: mat(&[&[1.0]]),
            c0: mat(&[&[1.0]]),
            d0: Matrix::zeros(1, 1),
            e0: Matrix::zeros(1, 1),
            q0: Matrix::zeros(1, 1),
        };
        assert!(!augment_reduced(&r).unwrap().nonresonant);
        let mut r2 = r;
        r2.e0 = mat(&[&[1.0]]);
        assert!(augment_reduced(&r2).unwrap().nonresonant);
    }

    #[test]
    fn frozen_disturbance_dc_gain_consistency() {
        // DC gain computed from the augmented model's plant block matches
        // dc_gains of the original plant.
        let p = scalar_plant();
        let m = augment(&p).unwrap();
        let a = m.a_aug.block(0, 0, m.n_state, m.n_state).unwrap();
        let b = m.b_aug.block(0, 0, m.n_state, 1).unwrap();
        let c = m.c_aug.block(0, 0, 1, m.n_state).unwrap();
        let e = m.a_aug.block(0, m.n_state, m.n_state, m.n_dist).unwrap();
        let g = dc_gains(&LtiPlant::new_unchecked(a, b, c, e).unwrap()).unwrap();
        let g0 = dc_gains(&p).unwrap();
        assert!(g.pi_u.sub(&g0.pi_u).unwrap().norm_inf() < 1e-14);
    }
}
