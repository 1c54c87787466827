//! LQE gain design for the disturbance-augmented models, and the observer
//! dynamics including the steady-state output prediction.
//!
//! Sign convention: the observer is written with innovation `−L(y − ŷ)` and
//! the error dynamics matrix is `A_aug + L·C_aug`. The Kalman gain
//! `K = P·C_augᵀ·R⁻¹` therefore maps to `L = −K`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::densemat::{hurwitz_check, lu_solve, Matrix, MatrixError, Result};
use crate::mathx::{norm_inf, sqrt};
use crate::plant::{AugmentedModel, DcGains};

/// Residual target for the Riccati ODE integration.
const RICCATI_TARGET: f64 = 1e-10;
/// Residual still accepted when the integration stalls at the f64 noise
/// floor (large weight spreads make 1e-10 unreachable in double precision).
const RICCATI_ACCEPT: f64 = 1e-8;
/// Riccati integration step cap.
const RICCATI_MAX_STEPS: usize = 10_000_000;
/// Steps without residual improvement before the step size is halved.
const RICCATI_STALL_WINDOW: usize = 2_000;

/// Process/measurement weights of the LQE design.
#[derive(Debug, Clone)]
pub struct LqeWeights {
    pub q: Matrix,
    pub r: Matrix,
}

impl LqeWeights {
    pub fn new(q: Matrix, r: Matrix) -> Result<Self> {
        if !q.is_square() || !r.is_square() {
            return Err(MatrixError::DimensionMismatch("Q, R must be square".into()));
        }
        for m in [&q, &r] {
            for i in 0..m.rows() {
                for j in (i + 1)..m.cols() {
                    if m[(i, j)] != m[(j, i)] {
                        return Err(MatrixError::ParameterError(String::from(
                            "weights must be symmetric",
                        )));
                    }
                }
            }
        }
        if !crate::densemat::positive_definite(&r) {
            return Err(MatrixError::ParameterError("R must be positive definite".into()));
        }
        Ok(Self { q, r })
    }

    pub fn diagonal(q_diag: &[f64], r_diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::diag(q_diag), Matrix::diag(r_diag))
    }
}

/// Observer gain with its stability certificate.
#[derive(Debug, Clone)]
pub struct EstimatorGain {
    /// Innovation gain; error matrix is `A_aug + L·C_aug`.
    pub l: Matrix,
    /// Converged Riccati solution.
    pub riccati_p: Matrix,
    /// Lyapunov certificate of the error matrix (solution of
    /// `𝒜ᵀP + P𝒜 = −I`, positive definite).
    pub certificate: Matrix,
}

impl EstimatorGain {
    /// Conservative exponential-decay envelope `(κ, λ)` implied by the
    /// certificate: every error trajectory satisfies
    /// `‖ζ̃(t)‖ ≤ κ·e^{−λt}‖ζ̃(0)‖`.
    pub fn decay_envelope(&self) -> Result<(f64, f64)> {
        let p = &self.certificate;
        // symmetric PD: spectral norm = largest eigenvalue
        let lam_max = crate::densemat::spectral_norm(p)?;
        let p_inv = lu_solve(p, &Matrix::identity(p.rows()))?;
        let lam_min = 1.0 / crate::densemat::spectral_norm(&p_inv)?;
        Ok((sqrt(lam_max / lam_min), 1.0 / (2.0 * lam_max)))
    }
}

/// Observer state: plant-state estimate plus disturbance estimate.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub xhat: Vec<f64>,
    pub what: Vec<f64>,
}

impl EstimatorState {
    pub fn zero(m: &AugmentedModel) -> Self {
        Self { xhat: alloc::vec![0.0; m.n_state], what: alloc::vec![0.0; m.n_dist] }
    }

    fn stacked(&self) -> Vec<f64> {
        let mut z = self.xhat.clone();
        z.extend_from_slice(&self.what);
        z
    }
}

fn riccati_derivative(a: &Matrix, ct_rinv_c: &Matrix, q: &Matrix, p: &Matrix) -> Result<Matrix> {
    // Ṗ = A P + P Aᵀ − P CᵀR⁻¹C P + Q
    let ap = a.matmul(p)?;
    let pat = ap.transpose();
    let pcp = p.matmul(ct_rinv_c)?.matmul(p)?;
    ap.add(&pat)?.sub(&pcp)?.add(q)
}

/// Designs the observer gain by integrating the filter Riccati ODE
/// `Ṗ = A_augP + PA_augᵀ − PC_augᵀR⁻¹C_augP + Q` forward from `P(0) = Q`
/// until the derivative vanishes, then sets `L = −P·C_augᵀ·R⁻¹` and
/// certifies that `A_aug + L·C_aug` is Hurwitz.
pub fn design_lqe(m: &AugmentedModel, w: &LqeWeights) -> Result<EstimatorGain> {
    let n = m.a_aug.rows();
    if w.q.rows() != n || w.r.rows() != m.c_aug.rows() {
        return Err(MatrixError::DimensionMismatch("weight sizes vs augmented model".into()));
    }
    if !m.nonresonant {
        return Err(MatrixError::NotDetectable);
    }
    let rinv = lu_solve(&w.r, &Matrix::identity(w.r.rows()))?;
    let ct_rinv_c = m.c_aug.transpose().matmul(&rinv)?.matmul(&m.c_aug)?;

    let mut p = w.q.clone();
    let mut h = 0.1 / (1.0 + m.a_aug.norm_inf());
    let mut best = f64::INFINITY;
    let mut stall = 0usize;
    let mut resid = f64::INFINITY;
    for _ in 0..RICCATI_MAX_STEPS {
        let k1 = riccati_derivative(&m.a_aug, &ct_rinv_c, &w.q, &p)?;
        resid = k1.norm_inf();
        if resid < RICCATI_TARGET {
            break;
        }
        if resid < best * (1.0 - 1e-9) {
            best = resid;
            stall = 0;
        } else {
            stall += 1;
            if stall > RICCATI_STALL_WINDOW {
                stall = 0;
                h *= 0.5;
                if h < 1e-9 {
                    break; // noise floor reached
                }
            }
        }
        // RK4 on the matrix ODE
        let p2 = p.add(&k1.scale(0.5 * h))?;
        let k2 = riccati_derivative(&m.a_aug, &ct_rinv_c, &w.q, &p2)?;
        let p3 = p.add(&k2.scale(0.5 * h))?;
        let k3 = riccati_derivative(&m.a_aug, &ct_rinv_c, &w.q, &p3)?;
        let p4 = p.add(&k3.scale(h))?;
        let k4 = riccati_derivative(&m.a_aug, &ct_rinv_c, &w.q, &p4)?;
        let incr = k1.add(&k2.scale(2.0))?.add(&k3.scale(2.0))?.add(&k4)?.scale(h / 6.0);
        let p_new = p.add(&incr)?;
        if p_new.entries().iter().any(|x| !x.is_finite()) {
            h *= 0.5;
            if h < 1e-12 {
                return Err(MatrixError::NoConvergence);
            }
            continue;
        }
        p = p_new;
        p.symmetrize();
    }
    if resid > RICCATI_ACCEPT {
        return Err(MatrixError::NoConvergence);
    }
    let l = p.matmul(&m.c_aug.transpose())?.matmul(&rinv)?.scale(-1.0);
    let a_cl = m.a_aug.add(&l.matmul(&m.c_aug)?)?;
    let certificate = hurwitz_check(&a_cl).ok_or(MatrixError::NotDetectable)?;
    Ok(EstimatorGain { l, riccati_p: p, certificate })
}

/// Observer derivative and output prediction:
/// `ŷ = C_aug·[x̂; ŵ] + D_aug·u`,
/// derivative `= A_aug·[x̂; ŵ] + B_aug·u − L·(y − ŷ)`.
pub fn estimator_step_derivative(
    m: &AugmentedModel,
    g: &EstimatorGain,
    s: &EstimatorState,
    u: &[f64],
    y: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if s.xhat.len() != m.n_state || s.what.len() != m.n_dist {
        return Err(MatrixError::DimensionMismatch("estimator state size".into()));
    }
    let z = s.stacked();
    let mut yhat = m.c_aug.matvec(&z)?;
    for (yh, v) in yhat.iter_mut().zip(m.d_aug.matvec(u)?) {
        *yh += v;
    }
    let innovation: Vec<f64> = y
        .iter()
        .zip(&yhat)
        .map(|(&yi, &yhi)| yi - yhi)
        .collect();
    let mut dz = m.a_aug.matvec(&z)?;
    for (d, v) in dz.iter_mut().zip(m.b_aug.matvec(u)?) {
        *d += v;
    }
    for (d, v) in dz.iter_mut().zip(g.l.matvec(&innovation)?) {
        *d -= v;
    }
    Ok((dz, yhat))
}

/// Predicted steady-state output `ŷ̄ = Π_u·u + Π_w·ŵ`.
pub fn steady_output_prediction(gains: &DcGains, u: &[f64], what: &[f64]) -> Result<Vec<f64>> {
    let mut y = gains.pi_u.matvec(u)?;
    for (yi, v) in y.iter_mut().zip(gains.pi_w.matvec(what)?) {
        *yi += v;
    }
    Ok(y)
}

/// Fixed-point residual `‖AP + PAᵀ − PCᵀR⁻¹CP + Q‖_∞` of a designed gain,
/// for auditing.
pub fn riccati_residual(m: &AugmentedModel, w: &LqeWeights, g: &EstimatorGain) -> Result<f64> {
    let rinv = lu_solve(&w.r, &Matrix::identity(w.r.rows()))?;
    let ct_rinv_c = m.c_aug.transpose().matmul(&rinv)?.matmul(&m.c_aug)?;
    Ok(riccati_derivative(&m.a_aug, &ct_rinv_c, &w.q, &g.riccati_p)?.norm_inf())
}

/// Convenience: `‖v‖_∞` of a derivative, used by callers for settle checks.
pub fn derivative_norm(d: &[f64]) -> f64 {
    norm_inf(d)
}
