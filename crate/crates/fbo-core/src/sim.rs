//! Closed-loop assembly of plant + estimator + controller, fixed-step RK4
//! integration, trajectory recording, metrics, and stability sweeps.
//!
//! The stacked integration state is ordered (x, x̂, ŵ, u).

use alloc::string::String;
use alloc::vec::Vec;

use crate::controller::{controller_derivative, ControllerConfig, ControllerKind};
use crate::densemat::{MatrixError, Result};
use crate::estimator::{estimator_step_derivative, steady_output_prediction, EstimatorGain, EstimatorState};
use crate::mathx::{abs, norm_inf};
use crate::objective::{band_distance, BoxSet, CostModel, SoftBandPenalty};
use crate::plant::{AugmentedModel, DcGains, LtiPlant, TwoTimescalePlant};

/// Integration settings.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub t_end: f64,
    pub h: f64,
    pub disturbance: StepDisturbance,
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(t_end: f64, h: f64, disturbance: StepDisturbance, record_stride: usize) -> Result<Self> {
        if !(t_end > 0.0) || !(h > 0.0) || record_stride == 0 {
            return Err(MatrixError::ParameterError(String::from(
                "need t_end > 0, h > 0, record_stride >= 1",
            )));
        }
        Ok(Self { t_end, h, disturbance, record_stride })
    }
}

/// Single step change in the disturbance channel at `t_step`.
#[derive(Debug, Clone)]
pub struct StepDisturbance {
    pub t_step: f64,
    pub magnitude: Vec<f64>,
}

impl StepDisturbance {
    pub fn new(t_step: f64, magnitude: Vec<f64>) -> Result<Self> {
        if !(t_step >= 0.0) {
            return Err(MatrixError::ParameterError("t_step must be nonnegative".into()));
        }
        Ok(Self { t_step, magnitude })
    }

    pub fn none(q: usize) -> Self {
        Self { t_step: 0.0, magnitude: alloc::vec![0.0; q] }
    }

    pub fn value_at(&self, t: f64) -> Vec<f64> {
        if t >= self.t_step {
            self.magnitude.clone()
        } else {
            alloc::vec![0.0; self.magnitude.len()]
        }
    }
}

/// Recorded closed-loop run. Estimator channels are empty for controller
/// kinds that do not use one.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub xhat: Vec<Vec<f64>>,
    pub what: Vec<Vec<f64>>,
    pub yhat: Vec<Vec<f64>>,
    pub ybar_hat: Vec<Vec<f64>>,
    /// Set when the integration produced a non-finite state (the run is
    /// truncated at the last finite sample).
    pub diverged: bool,
}

/// Derived per-run quantities.
#[derive(Debug, Clone)]
pub struct Metrics {
    pub nadir: f64,
    pub settling_time: f64,
    pub band_violation_integral: f64,
    pub final_u: Vec<f64>,
    pub final_y: Vec<f64>,
    pub final_what: Vec<f64>,
}

/// Outcome classes of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    Converged,
    Oscillating,
    Diverged,
}

impl core::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StabilityClass::Converged => write!(f, "converged"),
            StabilityClass::Oscillating => write!(f, "oscillating"),
            StabilityClass::Diverged => write!(f, "diverged"),
        }
    }
}

/// Classical 4th-order Runge–Kutta update.
pub fn rk4_step<F>(f: &mut F, t: f64, state: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(MatrixError::ParameterError("step must be positive".into()));
    }
    let n = state.len();
    let k1 = f(t, state)?;
    let mut s = alloc::vec![0.0; n];
    for i in 0..n {
        s[i] = state[i] + 0.5 * h * k1[i];
    }
    let k2 = f(t + 0.5 * h, &s)?;
    for i in 0..n {
        s[i] = state[i] + 0.5 * h * k2[i];
    }
    let k3 = f(t + 0.5 * h, &s)?;
    for i in 0..n {
        s[i] = state[i] + h * k3[i];
    }
    let k4 = f(t + h, &s)?;
    let mut out = alloc::vec![0.0; n];
    for i in 0..n {
        out[i] = state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(MatrixError::NonFiniteState);
    }
    Ok(out)
}

/// Everything needed to run one closed loop, except the controller time
/// constant (varied by the sweeps).
pub struct ClosedLoop<'a> {
    pub plant: &'a LtiPlant,
    pub costs: &'a CostModel,
    pub feasible: &'a BoxSet,
    pub gains: &'a DcGains,
    pub kind: ControllerKind,
    pub eta: f64,
    /// Augmented model and gain; required for the estimator-enhanced kinds.
    pub estimator: Option<(&'a AugmentedModel, &'a EstimatorGain)>,
}

/// Initial conditions; estimator defaults to zero when absent.
#[derive(Debug, Clone, Default)]
pub struct InitialConditions {
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub est0: Option<EstimatorState>,
}

impl InitialConditions {
    pub fn rest(plant: &LtiPlant) -> Self {
        Self {
            x0: alloc::vec![0.0; plant.n_states()],
            u0: alloc::vec![0.0; plant.n_inputs()],
            est0: None,
        }
    }
}

struct StateLayout {
    n: usize,
    n_est: usize, // estimator plant-state block (0 without estimator)
    q_est: usize, // estimator disturbance block
    m: usize,
}

impl StateLayout {
    fn total(&self) -> usize {
        self.n + self.n_est + self.q_est + self.m
    }
}

/// Integrates the stacked closed-loop state (x, x̂, ŵ, u) with the step
/// disturbance applied at its onset time. Divergence is recorded in the
/// trajectory rather than returned as an error.
pub fn simulate(
    cl: &ClosedLoop<'_>,
    tau: f64,
    init: &InitialConditions,
    sc: &SimConfig,
) -> Result<Trajectory> {
    let cfg = ControllerConfig::new(cl.kind, cl.eta, tau)?;
    let plant = cl.plant;
    let n = plant.n_states();
    let m = plant.n_inputs();
    if init.x0.len() != n || init.u0.len() != m {
        return Err(MatrixError::DimensionMismatch("initial condition sizes".into()));
    }
    if sc.disturbance.magnitude.len() != plant.n_disturbances() {
        return Err(MatrixError::DimensionMismatch("disturbance size".into()));
    }
    if cl.kind.uses_estimator() && cl.estimator.is_none() {
        return Err(MatrixError::MissingEstimate);
    }
    let layout = match cl.estimator {
        Some((am, _)) if cl.kind.uses_estimator() => StateLayout {
            n,
            n_est: am.n_state,
            q_est: am.n_dist,
            m,
        },
        _ => StateLayout { n, n_est: 0, q_est: 0, m },
    };

    let mut state = alloc::vec![0.0; layout.total()];
    state[..n].copy_from_slice(&init.x0);
    if layout.n_est + layout.q_est > 0 {
        let est0 = init.est0.clone().unwrap_or_else(|| {
            let (am, _) = cl.estimator.unwrap();
            EstimatorState::zero(am)
        });
        if est0.xhat.len() != layout.n_est || est0.what.len() != layout.q_est {
            return Err(MatrixError::DimensionMismatch("estimator initial state".into()));
        }
        state[n..n + layout.n_est].copy_from_slice(&est0.xhat);
        state[n + layout.n_est..n + layout.n_est + layout.q_est].copy_from_slice(&est0.what);
    }
    state[layout.total() - m..].copy_from_slice(&init.u0);

    // Stage evaluation: returns derivative and, for recording, the observer
    // predictions at the stage point.
    let eval = |t: f64, z: &[f64]| -> Result<(Vec<f64>, Option<(Vec<f64>, Vec<f64>)>)> {
        let x = &z[..n];
        let u = &z[layout.total() - m..];
        let w = sc.disturbance.value_at(t);
        let y = plant.c.matvec(x)?;

        let mut dz = alloc::vec![0.0; layout.total()];
        // plant block
        let mut dx = plant.a.matvec(x)?;
        for (d, v) in dx.iter_mut().zip(plant.b.matvec(u)?) {
            *d += v;
        }
        for (d, v) in dx.iter_mut().zip(plant.e.matvec(&w)?) {
            *d += v;
        }
        dz[..n].copy_from_slice(&dx);

        let mut predictions: Option<(Vec<f64>, Vec<f64>)> = None;
        if layout.n_est + layout.q_est > 0 {
            let (am, gain) = cl.estimator.unwrap();
            let est = EstimatorState {
                xhat: z[n..n + layout.n_est].to_vec(),
                what: z[n + layout.n_est..n + layout.n_est + layout.q_est].to_vec(),
            };
            let (dest, yhat) = estimator_step_derivative(am, gain, &est, u, &y)?;
            dz[n..n + layout.n_est + layout.q_est].copy_from_slice(&dest);
            let ybar_hat = steady_output_prediction(cl.gains, u, &est.what)?;
            predictions = Some((yhat, ybar_hat));
        }

        let du = match cl.kind {
            ControllerKind::OfflineGradientFlow => {
                // feed the true steady-state map instead of the measurement
                let ybar = steady_output_prediction(cl.gains, u, &w)?;
                controller_derivative(&cfg, cl.costs, cl.feasible, cl.gains, u, &ybar, None, None)?
            }
            ControllerKind::BaselineFbo => {
                controller_derivative(&cfg, cl.costs, cl.feasible, cl.gains, u, &y, None, None)?
            }
            _ => {
                let (yhat, ybar_hat) = predictions.as_ref().unwrap();
                controller_derivative(
                    &cfg,
                    cl.costs,
                    cl.feasible,
                    cl.gains,
                    u,
                    &y,
                    Some(yhat),
                    Some(ybar_hat),
                )?
            }
        };
        dz[layout.total() - m..].copy_from_slice(&du);
        Ok((dz, predictions))
    };

    let mut deriv = |t: f64, z: &[f64]| eval(t, z).map(|(d, _)| d);

    let steps = crate::mathx::ceil(sc.t_end / sc.h) as usize;
    let mut tr = Trajectory::default();
    let record = |t: f64, z: &[f64], tr: &mut Trajectory| -> Result<()> {
        let x = &z[..n];
        let u = &z[layout.total() - m..];
        tr.times.push(t);
        tr.x.push(x.to_vec());
        tr.u.push(u.to_vec());
        tr.y.push(plant.c.matvec(x)?);
        if layout.n_est + layout.q_est > 0 {
            tr.xhat.push(z[n..n + layout.n_est].to_vec());
            tr.what.push(z[n + layout.n_est..n + layout.n_est + layout.q_est].to_vec());
            let (_, predictions) = eval(t, z)?;
            let (yhat, ybar_hat) = predictions.unwrap();
            tr.yhat.push(yhat);
            tr.ybar_hat.push(ybar_hat);
        }
        Ok(())
    };

    record(0.0, &state, &mut tr)?;
    for k in 0..steps {
        let t = k as f64 * sc.h;
        match rk4_step(&mut deriv, t, &state, sc.h) {
            Ok(next) => state = next,
            Err(MatrixError::NonFiniteState) => {
                tr.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        if (k + 1) % sc.record_stride == 0 || k + 1 == steps {
            record((k + 1) as f64 * sc.h, &state, &mut tr)?;
        }
    }
    Ok(tr)
}

/// Derived metrics of a recorded run, using the first output channel for
/// band bookkeeping.
pub fn metrics(tr: &Trajectory, band: &SoftBandPenalty) -> Result<Metrics> {
    if tr.times.is_empty() {
        return Err(MatrixError::DimensionMismatch("empty trajectory".into()));
    }
    let mut nadir = f64::INFINITY;
    let mut settling = 0.0;
    let mut violation = 0.0;
    let mut prev_dist: Option<f64> = None;
    let mut prev_t = tr.times[0];
    for (i, t) in tr.times.iter().enumerate() {
        let y0 = tr.y[i].first().copied().unwrap_or(0.0);
        nadir = nadir.min(y0);
        let d = band_distance(band, y0);
        if d > 0.0 {
            settling = *t;
        }
        if let Some(pd) = prev_dist {
            violation += 0.5 * (pd + d) * (t - prev_t);
        }
        prev_dist = Some(d);
        prev_t = *t;
    }
    Ok(Metrics {
        nadir,
        settling_time: settling,
        band_violation_integral: violation,
        final_u: tr.u.last().cloned().unwrap_or_default(),
        final_y: tr.y.last().cloned().unwrap_or_default(),
        final_what: tr.what.last().cloned().unwrap_or_default(),
    })
}

fn peak_to_peak(samples: &[Vec<f64>]) -> f64 {
    let Some(first) = samples.first() else { return 0.0 };
    let mut worst: f64 = 0.0;
    for ch in 0..first.len() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in samples {
            lo = lo.min(s[ch]);
            hi = hi.max(s[ch]);
        }
        worst = worst.max(hi - lo);
    }
    worst
}

/// Classifies a run: `Diverged` on non-finite state or 10× norm growth over
/// the final half; `Converged` when the tail (last ~20% of the run, at
/// least 30 s where available) has output peak-to-peak and input
/// peak-to-peak below 1e−6; `Oscillating` otherwise.
pub fn classify_stability(tr: &Trajectory) -> StabilityClass {
    if tr.diverged || tr.times.is_empty() {
        return StabilityClass::Diverged;
    }
    let len = tr.times.len();
    let half = len / 2;
    let state_norm = |i: usize| -> f64 {
        let mut v = norm_inf(&tr.x[i]);
        v = v.max(norm_inf(&tr.u[i]));
        v
    };
    let first_half_max = (0..=half.max(0)).map(state_norm).fold(0.0f64, f64::max);
    let last_half_max = (half..len).map(state_norm).fold(0.0f64, f64::max);
    if last_half_max > 10.0 * first_half_max && last_half_max > 1e-6 {
        return StabilityClass::Diverged;
    }
    // tail window: last 20% of samples, widened to 30 s when the run is long
    let t_end = *tr.times.last().unwrap();
    let tail_start_time = (t_end - 30.0).min(0.8 * t_end);
    let tail_from = tr
        .times
        .iter()
        .position(|&t| t >= tail_start_time)
        .unwrap_or(len.saturating_sub(1));
    let y_pp = peak_to_peak(&tr.y[tail_from..]);
    let u_pp = peak_to_peak(&tr.u[tail_from..]);
    if y_pp < 1e-6 && u_pp < 1e-6 {
        StabilityClass::Converged
    } else {
        StabilityClass::Oscillating
    }
}

/// One sweep entry.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub tau: f64,
    pub class: StabilityClass,
    pub metrics: Metrics,
}

/// τ-sweep outcome with the empirical stability boundary (smallest τ in the
/// list whose run converged).
#[derive(Debug, Clone)]
pub struct TauSweepResult {
    pub entries: Vec<SweepEntry>,
    pub smallest_stable_tau: Option<f64>,
}

/// Runs `simulate` per τ value. The step size is tightened to τ/20 for fast
/// controllers. Per-run failures are recorded as diverged entries rather
/// than aborting the sweep.
pub fn tau_sweep(
    cl: &ClosedLoop<'_>,
    init: &InitialConditions,
    sc: &SimConfig,
    band: &SoftBandPenalty,
    taus: &[f64],
) -> TauSweepResult {
    let mut entries = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut sc_run = sc.clone();
        sc_run.h = sc.h.min(tau / 20.0);
        // keep the recorded sample count comparable across runs
        let steps = crate::mathx::ceil(sc_run.t_end / sc_run.h) as usize;
        sc_run.record_stride = (steps / 2000).max(1);
        let entry = match simulate(cl, tau, init, &sc_run) {
            Ok(tr) => {
                let class = classify_stability(&tr);
                match metrics(&tr, band) {
                    Ok(m) => SweepEntry { tau, class, metrics: m },
                    Err(_) => SweepEntry {
                        tau,
                        class: StabilityClass::Diverged,
                        metrics: empty_metrics(),
                    },
                }
            }
            Err(_) => SweepEntry { tau, class: StabilityClass::Diverged, metrics: empty_metrics() },
        };
        entries.push(entry);
    }
    let smallest_stable_tau = entries
        .iter()
        .filter(|e| e.class == StabilityClass::Converged)
        .map(|e| e.tau)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));
    TauSweepResult { entries, smallest_stable_tau }
}

fn empty_metrics() -> Metrics {
    Metrics {
        nadir: f64::NAN,
        settling_time: f64::NAN,
        band_violation_integral: f64::NAN,
        final_u: Vec::new(),
        final_y: Vec::new(),
        final_what: Vec::new(),
    }
}

/// One (ε, τ) grid cell.
#[derive(Debug, Clone)]
pub struct EpsilonSweepEntry {
    pub epsilon: f64,
    pub tau: f64,
    pub class: StabilityClass,
}

/// ε-sweep outcome; `largest_stable_epsilon` is the largest ε whose runs
/// converged at every τ in the grid.
#[derive(Debug, Clone)]
pub struct EpsilonSweepResult {
    pub entries: Vec<EpsilonSweepEntry>,
    pub largest_stable_epsilon: Option<f64>,
}

/// Rebuilds the full plant per ε while keeping the reduced-model estimator
/// fixed at its nominal design, then simulates the (ε, τ) grid.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_sweep(
    tt: &TwoTimescalePlant,
    costs: &CostModel,
    feasible: &BoxSet,
    gains: &DcGains,
    estimator: (&AugmentedModel, &EstimatorGain),
    eta: f64,
    sc: &SimConfig,
    band: &SoftBandPenalty,
    epsilons: &[f64],
    taus: &[f64],
) -> Result<EpsilonSweepResult> {
    let mut entries = Vec::with_capacity(epsilons.len() * taus.len());
    for &eps in epsilons {
        if !(eps > 0.0) {
            return Err(MatrixError::ParameterError("epsilon must be positive".into()));
        }
        let mut tt_eps = tt.clone();
        tt_eps.epsilon = eps;
        let plant = tt_eps.assemble_full()?;
        let cl = ClosedLoop {
            plant: &plant,
            costs,
            feasible,
            gains,
            kind: ControllerKind::EeFboReduced,
            eta,
            estimator: Some(estimator),
        };
        let init = InitialConditions::rest(&plant);
        let res = tau_sweep(&cl, &init, sc, band, taus);
        for e in res.entries {
            entries.push(EpsilonSweepEntry { epsilon: eps, tau: e.tau, class: e.class });
        }
    }
    let mut largest: Option<f64> = None;
    for &eps in epsilons {
        let all_ok = entries
            .iter()
            .filter(|e| e.epsilon == eps)
            .all(|e| e.class == StabilityClass::Converged);
        if all_ok {
            largest = Some(largest.map_or(eps, |a: f64| a.max(eps)));
        }
    }
    Ok(EpsilonSweepResult { entries, largest_stable_epsilon: largest })
}

/// Max distance of recorded inputs from the feasible box.
pub fn max_feasibility_violation(tr: &Trajectory, s: &BoxSet) -> f64 {
    let mut worst: f64 = 0.0;
    for u in &tr.u {
        for (i, &ui) in u.iter().enumerate() {
            let d = (s.lower[i] - ui).max(ui - s.upper[i]).max(0.0);
            worst = worst.max(abs(d));
        }
    }
    worst
}
