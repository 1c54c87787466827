//! The three controller laws as pure derivative functions, plus the
//! contraction/ISS analysis quantities of the projected gradient map.

use alloc::string::String;
use alloc::vec::Vec;

use crate::densemat::{spectral_norm, MatrixError, Result};
use crate::mathx::sqrt;
use crate::objective::{phi, project_box, BoxSet, CostModel};
use crate::plant::DcGains;

/// Which control law drives the input channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    /// Raw-measurement gradient law (needs a slow controller for stability).
    BaselineFbo,
    /// Estimator-enhanced law with the full-model observer.
    EeFboFull,
    /// Estimator-enhanced law with the reduced-model observer.
    EeFboReduced,
    /// Model-based gradient flow driven by the steady-state map instead of
    /// measurements (unconditionally stable reference).
    OfflineGradientFlow,
}

impl ControllerKind {
    pub fn uses_estimator(&self) -> bool {
        matches!(self, ControllerKind::EeFboFull | ControllerKind::EeFboReduced)
    }
}

/// Tuning parameters of the gradient law.
#[derive(Debug, Clone, Copy)]
pub struct ControllerConfig {
    pub eta: f64,
    pub tau: f64,
    pub kind: ControllerKind,
    /// Set when `eta` meets or exceeds the step-size bound; the law still
    /// runs (instability is then an expected outcome, not an error).
    pub eta_warning: bool,
}

impl ControllerConfig {
    pub fn new(kind: ControllerKind, eta: f64, tau: f64) -> Result<Self> {
        if !(eta > 0.0) || !(tau > 0.0) || !eta.is_finite() || !tau.is_finite() {
            return Err(MatrixError::ParameterError(String::from(
                "eta and tau must be positive",
            )));
        }
        Ok(Self { eta, tau, kind, eta_warning: false })
    }

    /// Flags the config when `eta` is at or above the supplied bound.
    pub fn with_eta_check(mut self, eta_max: f64) -> Self {
        self.eta_warning = self.eta >= eta_max;
        self
    }
}

/// Contraction factor and ISS gains of the projected gradient map.
#[derive(Debug, Clone, Copy)]
pub struct ContractionAnalysis {
    /// Strong-monotonicity modulus of the gradient map (μ_f).
    pub mu: f64,
    /// Lipschitz constant in u: ℓ_f + ℓ_g‖Π_u‖₂².
    pub big_l: f64,
    /// Lipschitz constant in the estimator-error channel v.
    pub l_prime_v: f64,
    /// Lipschitz constant in the fast-state channel e.
    pub l_prime_e: f64,
    /// Contraction factor √(1 − 2ημ + η²L²) of the discrete map.
    pub rho: f64,
    /// ISS gain η·L′_v/(1−ρ).
    pub gamma_v_to_u: f64,
    /// ISS gain η·L′_e/(1−ρ).
    pub gamma_e_to_u: f64,
}

/// Controller derivative
/// `u̇ = (P_𝒰(u − η·Φ(u, y_eff)) − u)/τ`
/// where `y_eff = y` for the baseline and offline kinds and
/// `y_eff = y − (ŷ − ŷ̄)` for the estimator-enhanced kinds.
///
/// For `OfflineGradientFlow` the caller supplies the steady-state map output
/// as `y`.
#[allow(clippy::too_many_arguments)]
pub fn controller_derivative(
    cfg: &ControllerConfig,
    c: &CostModel,
    s: &BoxSet,
    gains: &DcGains,
    u: &[f64],
    y: &[f64],
    yhat: Option<&[f64]>,
    ybar_hat: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let y_eff: Vec<f64> = if cfg.kind.uses_estimator() {
        let (yh, ybh) = match (yhat, ybar_hat) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(MatrixError::MissingEstimate),
        };
        if yh.len() != y.len() || ybh.len() != y.len() {
            return Err(MatrixError::DimensionMismatch("prediction lengths".into()));
        }
        y.iter().zip(yh.iter().zip(ybh)).map(|(&yi, (&a, &b))| yi - (a - b)).collect()
    } else {
        y.to_vec()
    };
    let g = phi(c, &gains.pi_u, u, &y_eff)?;
    let arg: Vec<f64> = u.iter().zip(&g).map(|(&ui, &gi)| ui - cfg.eta * gi).collect();
    let proj = project_box(s, &arg)?;
    Ok(proj
        .iter()
        .zip(u)
        .map(|(&pi, &ui)| (pi - ui) / cfg.tau)
        .collect())
}

/// Contraction factor and ISS gains with an explicit spectral norm of the
/// map carrying the e-channel into the output argument (1 when e is already
/// an output-space perturbation, ‖C₂‖₂ in the two-timescale setting).
pub fn contraction_analysis_with_e_norm(
    c: &CostModel,
    gains: &DcGains,
    eta: f64,
    e_output_norm: f64,
) -> Result<ContractionAnalysis> {
    let pi_norm = spectral_norm(&gains.pi_u)?;
    let mu = c.mu_f;
    let big_l = c.ell_f + c.ell_g * pi_norm * pi_norm;
    if !(eta > 0.0) || eta >= 2.0 * mu / (big_l * big_l) {
        return Err(MatrixError::InvalidStep);
    }
    // Lipschitz constants of Φ in the additive output perturbations: the
    // perturbation passes through ∇g (ℓ_g) and then Π_uᵀ (‖Π_u‖₂).
    let l_prime_v = c.ell_g * pi_norm;
    let l_prime_e = c.ell_g * pi_norm * e_output_norm;
    let rho = sqrt(1.0 - 2.0 * eta * mu + eta * eta * big_l * big_l);
    if !(rho < 1.0) {
        return Err(MatrixError::InvalidStep);
    }
    Ok(ContractionAnalysis {
        mu,
        big_l,
        l_prime_v,
        l_prime_e,
        rho,
        gamma_v_to_u: eta * l_prime_v / (1.0 - rho),
        gamma_e_to_u: eta * l_prime_e / (1.0 - rho),
    })
}

/// `contraction_analysis_with_e_norm` with the e channel taken as a direct
/// output-space perturbation (norm 1).
pub fn contraction_analysis(
    c: &CostModel,
    gains: &DcGains,
    eta: f64,
) -> Result<ContractionAnalysis> {
    contraction_analysis_with_e_norm(c, gains, eta, 1.0)
}

/// One application of the perturbed projected map
/// `T_{v,e}(u) = P_𝒰(u − η(∇f(u) + Π_uᵀ∇g(Π_u u + v + e)))`.
///
/// Evaluated at zero disturbance; a constant disturbance contribution
/// `Π_w w` can be folded into `v`, which enters identically.
pub fn discrete_map(
    c: &CostModel,
    s: &BoxSet,
    gains: &DcGains,
    eta: f64,
    u: &[f64],
    v: &[f64],
    e: &[f64],
) -> Result<Vec<f64>> {
    let p = gains.pi_u.rows();
    if v.len() != p || e.len() != p {
        return Err(MatrixError::DimensionMismatch("perturbation lengths".into()));
    }
    let mut y_arg = gains.pi_u.matvec(u)?;
    for (yi, (&vi, &ei)) in y_arg.iter_mut().zip(v.iter().zip(e)) {
        *yi += vi + ei;
    }
    let g = phi(c, &gains.pi_u, u, &y_arg)?;
    let arg: Vec<f64> = u.iter().zip(&g).map(|(&ui, &gi)| ui - eta * gi).collect();
    project_box(s, &arg)
}
