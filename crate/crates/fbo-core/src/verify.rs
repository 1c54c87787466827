//! Independent oracles and certificate checks: offline optimum, KKT
//! residual, finite-difference gradient validation, ISS-bound audit, and
//! error-coordinate cascade construction.

use alloc::string::String;
use alloc::vec::Vec;

use crate::controller::{discrete_map, ContractionAnalysis};
use crate::densemat::{hurwitz_check, lyapunov_solve, Matrix, MatrixError, Result};
use crate::estimator::EstimatorGain;
use crate::mathx::{abs, exp, norm2};
use crate::objective::{eta_max, phi, project_box, BoxSet, CostModel};
use crate::plant::{
    dc_gains, reduced_dc_gains, AugmentedModel, DcGains, LtiPlant, ReducedModel,
    TwoTimescalePlant,
};
use crate::sim::rk4_step;

/// Minimal deterministic sample generator for oracle spot checks (keeps the
/// core crate free of RNG dependencies).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Gradient map at steady state, `F_w(u) = ∇f(u) + Π_uᵀ∇g(Π_u u + Π_w w)`.
fn steady_gradient(c: &CostModel, gains: &DcGains, w: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let mut ybar = gains.pi_u.matvec(u)?;
    for (yi, v) in ybar.iter_mut().zip(gains.pi_w.matvec(w)?) {
        *yi += v;
    }
    phi(c, &gains.pi_u, u, &ybar)
}

/// Solves the steady-state problem by projected gradient iteration from
/// `u = 0` until the step norm drops below 1e−12 (unique fixed point under
/// strong convexity).
pub fn solve_offline_optimum(
    c: &CostModel,
    s: &BoxSet,
    gains: &DcGains,
    w: &[f64],
) -> Result<Vec<f64>> {
    solve_offline_optimum_from(c, s, gains, w, &alloc::vec![0.0; s.dim()])
}

/// `solve_offline_optimum` with an explicit starting point (used to verify
/// uniqueness of the fixed point).
pub fn solve_offline_optimum_from(
    c: &CostModel,
    s: &BoxSet,
    gains: &DcGains,
    w: &[f64],
    u0: &[f64],
) -> Result<Vec<f64>> {
    let eta = 0.5 * eta_max(c, &gains.pi_u)?;
    let mut u = project_box(s, u0)?;
    for _ in 0..1_000_000 {
        let g = steady_gradient(c, gains, w, &u)?;
        let arg: Vec<f64> = u.iter().zip(&g).map(|(&ui, &gi)| ui - eta * gi).collect();
        let next = project_box(s, &arg)?;
        let step = norm2(
            &next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        u = next;
        if step < 1e-12 {
            return Ok(u);
        }
    }
    Err(MatrixError::NoConvergence)
}

/// Fixed-point defect `‖P_𝒰(u − η·F_w(u)) − u‖₂` with `η = 0.5·eta_max`.
pub fn kkt_residual(
    c: &CostModel,
    s: &BoxSet,
    gains: &DcGains,
    w: &[f64],
    u: &[f64],
) -> Result<f64> {
    let eta = 0.5 * eta_max(c, &gains.pi_u)?;
    let g = steady_gradient(c, gains, w, u)?;
    let arg: Vec<f64> = u.iter().zip(&g).map(|(&ui, &gi)| ui - eta * gi).collect();
    let p = project_box(s, &arg)?;
    Ok(norm2(
        &p.iter().zip(u).map(|(a, b)| a - b).collect::<Vec<_>>(),
    ))
}

/// Central-difference validation of a gradient against its cost values on
/// deterministic pseudo-random points in `[lo, hi]^dim`. Points rejected by
/// `accept` (e.g. within 1e−4 of a kink) are skipped. Returns the max
/// relative discrepancy.
pub fn finite_diff_check(
    value: &dyn Fn(&[f64]) -> f64,
    gradient: &dyn Fn(&[f64]) -> Vec<f64>,
    dim: usize,
    lo: f64,
    hi: f64,
    samples: usize,
    accept: &dyn Fn(&[f64]) -> bool,
) -> f64 {
    let step = 1e-6;
    let mut rng = SplitMix64::new(0x5eed);
    let mut worst: f64 = 0.0;
    let mut taken = 0usize;
    let mut attempts = 0usize;
    while taken < samples && attempts < samples * 100 {
        attempts += 1;
        let x: Vec<f64> = (0..dim).map(|_| rng.uniform(lo, hi)).collect();
        if !accept(&x) {
            continue;
        }
        taken += 1;
        let g = gradient(&x);
        for i in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            let fd = (value(&xp) - value(&xm)) / (2.0 * step);
            let denom = abs(g[i]).max(1.0);
            worst = worst.max(abs(fd - g[i]) / denom);
        }
    }
    worst
}

/// Controller-only run driven by injected perturbation signals.
#[derive(Debug, Clone)]
pub struct DrivenTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
}

/// Integrates `τu̇ = P_𝒰(u − ηπ(u, v(t), e(t))) − u` with RK4 and records
/// the injected signals at the sample instants.
#[allow(clippy::too_many_arguments)]
pub fn simulate_driven_controller(
    c: &CostModel,
    s: &BoxSet,
    gains: &DcGains,
    eta: f64,
    tau: f64,
    u0: &[f64],
    v_signal: &dyn Fn(f64) -> Vec<f64>,
    e_signal: &dyn Fn(f64) -> Vec<f64>,
    t_end: f64,
    h: f64,
) -> Result<DrivenTrajectory> {
    if !(tau > 0.0) || !(h > 0.0) || !(t_end > 0.0) {
        return Err(MatrixError::ParameterError(String::from(
            "tau, h, t_end must be positive",
        )));
    }
    let mut deriv = |t: f64, u: &[f64]| -> Result<Vec<f64>> {
        let v = v_signal(t);
        let e = e_signal(t);
        let tu = discrete_map(c, s, gains, eta, u, &v, &e)?;
        Ok(tu.iter().zip(u).map(|(&a, &b)| (a - b) / tau).collect())
    };
    let steps = crate::mathx::ceil(t_end / h) as usize;
    let mut u = u0.to_vec();
    let mut out = DrivenTrajectory {
        times: alloc::vec![0.0],
        u: alloc::vec![u.clone()],
        v: alloc::vec![v_signal(0.0)],
        e: alloc::vec![e_signal(0.0)],
    };
    for k in 0..steps {
        let t = k as f64 * h;
        u = rk4_step(&mut deriv, t, &u, h)?;
        let t_next = (k + 1) as f64 * h;
        out.times.push(t_next);
        out.u.push(u.clone());
        out.v.push(v_signal(t_next));
        out.e.push(e_signal(t_next));
    }
    Ok(out)
}

/// Checks the explicit ISS inequality
/// `‖u(t)−ū*‖ ≤ e^{−(1−ρ)t/(2τ)}‖u(0)−ū*‖ + γ_v·sup‖v‖ + γ_e·sup‖e‖`
/// pointwise along a driven run. Returns pass/fail and the worst margin
/// (right side minus left side; negative on failure).
pub fn iss_bound_audit(
    analysis: &ContractionAnalysis,
    tau: f64,
    tr: &DrivenTrajectory,
    u_star: &[f64],
) -> (bool, f64) {
    let sup_v = tr.v.iter().map(|v| norm2(v)).fold(0.0f64, f64::max);
    let sup_e = tr.e.iter().map(|e| norm2(e)).fold(0.0f64, f64::max);
    let d0 = dist(&tr.u[0], u_star);
    let rate = (1.0 - analysis.rho) / (2.0 * tau);
    let mut worst = f64::INFINITY;
    for (i, t) in tr.times.iter().enumerate() {
        let lhs = dist(&tr.u[i], u_star);
        let rhs = exp(-rate * t) * d0
            + analysis.gamma_v_to_u * sup_v
            + analysis.gamma_e_to_u * sup_e;
        worst = worst.min(rhs - lhs);
    }
    (worst >= -1e-9, worst)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

/// Error-coordinate cascade of an estimator-enhanced loop.
#[derive(Debug, Clone)]
pub struct ErrorCascade {
    /// Autonomous error dynamics matrix `A_aug + L·C_aug`.
    pub error_matrix: Matrix,
    /// Map from the error state to the controller perturbation channel.
    pub output_map: Matrix,
    /// Fast-state coupling into the error dynamics (reduced designs only).
    pub fast_coupling: Option<Matrix>,
    /// Lyapunov certificate of the error matrix.
    pub certificate: Matrix,
}

/// Full-model cascade: error matrix `A_aug + L·C_aug` and output map
/// `[C  −Π_w]`.
pub fn build_error_cascade(
    p: &LtiPlant,
    m: &AugmentedModel,
    g: &EstimatorGain,
) -> Result<ErrorCascade> {
    let error_matrix = m.a_aug.add(&g.l.matmul(&m.c_aug)?)?;
    let certificate = hurwitz_check(&error_matrix).ok_or(MatrixError::NotHurwitz)?;
    let gains = dc_gains(p)?;
    let output_map = Matrix::from_blocks(&[&[&p.c, &gains.pi_w.scale(-1.0)]])?;
    Ok(ErrorCascade { error_matrix, output_map, fast_coupling: None, certificate })
}

/// Reduced-model cascade. The output map pairs `C₀` with the disturbance
/// block `Q₀ − Π_w` (the blocks multiply the error state `(x̃₁, w̃)`, so the
/// second block must be disturbance-sized). Also assembles the fast-state
/// coupling `𝒢 = [A₁₂ − L₁C₂; −L₂C₂]`.
pub fn build_error_cascade_reduced(
    r: &ReducedModel,
    tt: &TwoTimescalePlant,
    m: &AugmentedModel,
    g: &EstimatorGain,
) -> Result<ErrorCascade> {
    let error_matrix = m.a_aug.add(&g.l.matmul(&m.c_aug)?)?;
    let certificate = hurwitz_check(&error_matrix).ok_or(MatrixError::NotHurwitz)?;
    let gains = reduced_dc_gains(r)?;
    let output_map =
        Matrix::from_blocks(&[&[&r.c0, &r.q0.sub(&gains.pi_w)?]])?;
    let n1 = m.n_state;
    let q = m.n_dist;
    let l1 = g.l.block(0, 0, n1, g.l.cols())?;
    let l2 = g.l.block(n1, 0, q, g.l.cols())?;
    let top = tt.a12.sub(&l1.matmul(&tt.c2)?)?;
    let bottom = l2.matmul(&tt.c2)?.scale(-1.0);
    let fast_coupling = Matrix::from_blocks(&[&[&top], &[&bottom]])?;
    Ok(ErrorCascade {
        error_matrix,
        output_map,
        fast_coupling: Some(fast_coupling),
        certificate,
    })
}

/// Lyapunov certificates of the slow and fast blocks of a two-timescale
/// plant.
#[derive(Debug, Clone)]
pub struct SmallGainCertificate {
    pub p0: Matrix,
    pub p22: Matrix,
    pub alpha0: f64,
    pub alpha22: f64,
}

/// Solves `P₀A₀ + A₀ᵀP₀ = −I` and `P₂₂A₂₂ + A₂₂ᵀP₂₂ = −I`; both solutions
/// must be positive definite (α₀ = α₂₂ = 1 by construction).
pub fn certify_small_gain_blocks(tt: &TwoTimescalePlant) -> Result<SmallGainCertificate> {
    let r = crate::plant::reduce(tt)?;
    let p0 = lyapunov_solve(&r.a0, &Matrix::identity(r.a0.rows()))
        .map_err(|_| MatrixError::NotHurwitz)?;
    let p22 = lyapunov_solve(&tt.a22, &Matrix::identity(tt.a22.rows()))
        .map_err(|_| MatrixError::NotHurwitz)?;
    if !crate::densemat::positive_definite(&p0) || !crate::densemat::positive_definite(&p22) {
        return Err(MatrixError::NotHurwitz);
    }
    Ok(SmallGainCertificate { p0, p22, alpha0: 1.0, alpha22: 1.0 })
}
