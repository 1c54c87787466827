//! Scenario and plant file formats (TOML).
//!
//! Scenario files override fields of the built-in benchmark scenario; every
//! key is optional. Matrices in plant files are row-major arrays of rows.

use fbo_core::bench::{PowerSystemParams, ScenarioConfig};
use fbo_core::controller::ControllerKind;
use fbo_core::plant::{LtiPlant, TwoTimescalePlant};
use fbo_core::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    BaselineFbo,
    EeFboFull,
    EeFboReduced,
    OfflineGradientFlow,
}

impl From<KindArg> for ControllerKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::BaselineFbo => ControllerKind::BaselineFbo,
            KindArg::EeFboFull => ControllerKind::EeFboFull,
            KindArg::EeFboReduced => ControllerKind::EeFboReduced,
            KindArg::OfflineGradientFlow => ControllerKind::OfflineGradientFlow,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub two_h: Option<f64>,
    pub d: Option<f64>,
    pub t_r: Option<f64>,
    pub r_g: Option<f64>,
    pub f_h: Option<f64>,
    pub tau_ibr: Option<f64>,
    pub n_ibr: Option<usize>,
    pub s_base: Option<f64>,
    pub f_base: Option<f64>,
}

/// Scenario file. Units at this boundary are MW, Hz, and seconds; the band
/// is per-unit frequency deviation.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub kind: Option<KindArg>,
    pub tau: Option<f64>,
    pub eta: Option<f64>,
    /// Select `0.5 * eta_max` instead of the fixed default step.
    pub eta_auto: Option<bool>,
    pub t_end: Option<f64>,
    pub h: Option<f64>,
    pub disturbance_mw: Option<f64>,
    pub t_step: Option<f64>,
    pub band_pu: Option<[f64; 2]>,
    pub box_mw: Option<[f64; 2]>,
    pub penalty_weight: Option<f64>,
    pub lqe_q_diag: Option<Vec<f64>>,
    pub lqe_r: Option<f64>,
    pub params: Option<ParamsFile>,
}

impl ScenarioFile {
    /// Builds the scenario, starting from the benchmark defaults for the
    /// resolved controller kind. Command-line `--kind`/`--tau` win over the
    /// file.
    pub fn into_config(self, cli_kind: Option<KindArg>, cli_tau: Option<f64>) -> ScenarioConfig {
        let kind: ControllerKind =
            cli_kind.or(self.kind).unwrap_or(KindArg::EeFboFull).into();
        let tau = cli_tau.or(self.tau).unwrap_or(0.05);
        let mut cfg = ScenarioConfig::benchmark_default(kind, tau);
        if let Some(p) = self.params {
            let d = PowerSystemParams::benchmark();
            cfg.params = PowerSystemParams {
                two_h: p.two_h.unwrap_or(d.two_h),
                d: p.d.unwrap_or(d.d),
                t_r: p.t_r.unwrap_or(d.t_r),
                r_g: p.r_g.unwrap_or(d.r_g),
                f_h: p.f_h.unwrap_or(d.f_h),
                tau_ibr: p.tau_ibr.unwrap_or(d.tau_ibr),
                n_ibr: p.n_ibr.unwrap_or(d.n_ibr),
                s_base: p.s_base.unwrap_or(d.s_base),
                f_base: p.f_base.unwrap_or(d.f_base),
            };
        }
        if let Some(e) = self.eta {
            cfg.eta = Some(e);
        }
        if self.eta_auto == Some(true) {
            cfg.eta = None;
        }
        if let Some(v) = self.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = self.h {
            cfg.h = v;
        }
        if let Some(v) = self.disturbance_mw {
            cfg.disturbance_mw = v;
        }
        if let Some(v) = self.t_step {
            cfg.t_step = v;
        }
        if let Some([lo, hi]) = self.band_pu {
            cfg.band = (lo, hi);
        }
        if let Some([lo, hi]) = self.box_mw {
            cfg.box_mw = (lo, hi);
        }
        if let Some(v) = self.penalty_weight {
            cfg.penalty_weight = v;
        }
        if let Some(v) = self.lqe_q_diag {
            cfg.lqe_q_diag = v;
        }
        if let Some(v) = self.lqe_r {
            cfg.lqe_r = v;
        }
        cfg
    }
}

pub fn load_scenario(
    path: Option<&std::path::Path>,
    cli_kind: Option<KindArg>,
    cli_tau: Option<f64>,
) -> Result<ScenarioConfig, String> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            toml::from_str::<ScenarioFile>(&text)
                .map_err(|e| format!("bad scenario file {}: {e}", p.display()))?
        }
        None => ScenarioFile::default(),
    };
    Ok(file.into_config(cli_kind, cli_tau))
}

/// Row-major matrix literal.
pub type Rows = Vec<Vec<f64>>;

fn to_matrix(name: &str, rows: &Rows) -> Result<Matrix, String> {
    if rows.is_empty() {
        return Err(format!("matrix {name} has no rows"));
    }
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    Matrix::from_rows(&refs).map_err(|e| format!("matrix {name}: {e}"))
}

fn to_rows(m: &Matrix) -> Rows {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LtiSection {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    pub e: Rows,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TwoTimescaleSection {
    pub a11: Rows,
    pub a12: Rows,
    pub a21: Rows,
    pub a22: Rows,
    pub b1: Rows,
    pub b2: Rows,
    pub e1: Rows,
    pub e2: Rows,
    pub c1: Rows,
    pub c2: Rows,
    pub epsilon: f64,
}

/// Standalone plant file: exactly one of the two sections.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lti: Option<LtiSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_timescale: Option<TwoTimescaleSection>,
}

pub enum LoadedPlant {
    Lti(LtiPlant),
    TwoTimescale(TwoTimescalePlant),
}

pub fn load_plant(path: &std::path::Path) -> Result<LoadedPlant, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let file: PlantFile = toml::from_str(&text)
        .map_err(|e| format!("bad plant file {}: {e}", path.display()))?;
    match (file.lti, file.two_timescale) {
        (Some(l), None) => {
            let p = LtiPlant::new_unchecked(
                to_matrix("a", &l.a)?,
                to_matrix("b", &l.b)?,
                to_matrix("c", &l.c)?,
                to_matrix("e", &l.e)?,
            )
            .map_err(|e| format!("plant: {e}"))?;
            Ok(LoadedPlant::Lti(p))
        }
        (None, Some(t)) => {
            let p = TwoTimescalePlant::new(
                to_matrix("a11", &t.a11)?,
                to_matrix("a12", &t.a12)?,
                to_matrix("a21", &t.a21)?,
                to_matrix("a22", &t.a22)?,
                to_matrix("b1", &t.b1)?,
                to_matrix("b2", &t.b2)?,
                to_matrix("e1", &t.e1)?,
                to_matrix("e2", &t.e2)?,
                to_matrix("c1", &t.c1)?,
                to_matrix("c2", &t.c2)?,
                t.epsilon,
            )
            .map_err(|e| format!("plant: {e}"))?;
            Ok(LoadedPlant::TwoTimescale(p))
        }
        _ => Err("plant file needs exactly one of [lti] or [two_timescale]".into()),
    }
}

pub fn plant_file_from_two_timescale(tt: &TwoTimescalePlant) -> PlantFile {
    PlantFile {
        lti: None,
        two_timescale: Some(TwoTimescaleSection {
            a11: to_rows(&tt.a11),
            a12: to_rows(&tt.a12),
            a21: to_rows(&tt.a21),
            a22: to_rows(&tt.a22),
            b1: to_rows(&tt.b1),
            b2: to_rows(&tt.b2),
            e1: to_rows(&tt.e1),
            e2: to_rows(&tt.e2),
            c1: to_rows(&tt.c1),
            c2: to_rows(&tt.c2),
            epsilon: tt.epsilon,
        }),
    }
}
