mod config;
mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fbo_core::bench::{assemble_scenario, run_case_study, ScenarioConfig};
use fbo_core::controller::{contraction_analysis, discrete_map, ControllerKind};
use fbo_core::estimator::riccati_residual;
use fbo_core::objective::eta_max;
use fbo_core::plant::{augment, augment_reduced, dc_gains, reduce, reduced_dc_gains};
use fbo_core::sim::{
    epsilon_sweep, tau_sweep, ClosedLoop, InitialConditions, SimConfig,
};
use fbo_core::verify::{
    build_error_cascade, build_error_cascade_reduced, certify_small_gain_blocks,
    finite_diff_check, iss_bound_audit, kkt_residual, simulate_driven_controller,
    solve_offline_optimum, solve_offline_optimum_from, SplitMix64,
};

use config::{load_plant, load_scenario, plant_file_from_two_timescale, KindArg, LoadedPlant};
use output::{eps_sweep_csv, fmt_f64, matrix_block, tau_sweep_csv, trajectory_csv, write_file};

#[derive(Parser)]
#[command(
    name = "fbo",
    version,
    about = "Feedback-optimization control toolkit: closed-loop simulation, \
             estimator design, and property audits for the frequency-control benchmark."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML); omitted fields fall back to the benchmark.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Controller kind override.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Controller time constant override [s].
    #[arg(long)]
    tau: Option<f64>,
    /// Output directory for CSVs and reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl ScenarioArgs {
    fn config(&self) -> Result<ScenarioConfig, String> {
        load_scenario(self.scenario.as_deref(), self.kind, self.tau)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one closed-loop scenario; emit trajectory CSV, metrics, and the
    /// steady-state audit.
    Simulate(ScenarioArgs),
    /// Sweep the controller time constant and classify each run.
    SweepTau {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Comma-separated tau grid [s].
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-3, 1e-2, 1e-1, 1.0, 10.0])]
        taus: Vec<f64>,
    },
    /// Sweep the fast-timescale parameter with the reduced-design estimator
    /// held fixed at its nominal design.
    SweepEps {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Comma-separated epsilon grid [s].
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.03, 0.1, 0.3, 1.0, 3.0])]
        epsilons: Vec<f64>,
        /// Comma-separated tau grid [s].
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.05])]
        taus: Vec<f64>,
    },
    /// Design the disturbance observer and print gain, Riccati solution,
    /// and stability certificate.
    DesignEstimator(ScenarioArgs),
    /// Run the full property-audit suite on a scenario.
    Verify(ScenarioArgs),
    /// Print the assembled model matrices (scenario or standalone plant
    /// file).
    ShowModel {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Standalone plant file instead of the scenario model.
        #[arg(long)]
        plant: Option<PathBuf>,
        /// Also write the scenario's two-timescale plant to this TOML file.
        #[arg(long)]
        export_plant: Option<PathBuf>,
    },
}

fn kind_name(k: ControllerKind) -> &'static str {
    match k {
        ControllerKind::BaselineFbo => "baseline-fbo",
        ControllerKind::EeFboFull => "ee-fbo-full",
        ControllerKind::EeFboReduced => "ee-fbo-reduced",
        ControllerKind::OfflineGradientFlow => "offline-gradient-flow",
    }
}

fn cmd_simulate(args: &ScenarioArgs) -> Result<bool, String> {
    let cfg = args.config()?;
    let r = run_case_study(&cfg).map_err(|e| e.to_string())?;
    write_file(&args.out, "trajectory.csv", &trajectory_csv(&r.trajectory))?;

    let mut rep = String::new();
    let _ = writeln!(rep, "kind: {}", kind_name(cfg.kind));
    let _ = writeln!(rep, "tau [s]: {}", fmt_f64(cfg.tau));
    let _ = writeln!(rep, "class: {}", r.class);
    let _ = writeln!(rep, "nadir [pu]: {}", fmt_f64(r.metrics.nadir));
    let _ = writeln!(rep, "settling_time [s]: {}", fmt_f64(r.metrics.settling_time));
    let _ = writeln!(
        rep,
        "band_violation_integral [pu*s]: {}",
        fmt_f64(r.metrics.band_violation_integral)
    );
    let _ = writeln!(
        rep,
        "final_u [MW]: {:?}",
        r.metrics.final_u.iter().map(|u| u * cfg.params.s_base).collect::<Vec<_>>()
    );
    let _ = writeln!(rep, "final_y [pu]: {:?}", r.metrics.final_y);
    let _ = writeln!(rep, "u_oracle [pu]: {:?}", r.audit.u_oracle);
    let _ = writeln!(rep, "u_error: {}", fmt_f64(r.audit.u_error));
    if let Some(we) = r.audit.what_error {
        let _ = writeln!(rep, "what_error: {}", fmt_f64(we));
    }
    let _ = writeln!(rep, "kkt_residual_final: {}", fmt_f64(r.audit.kkt_residual_final));
    let _ = writeln!(rep, "band_ok: {}", r.audit.band_ok);
    let _ = writeln!(rep, "input_feasible: {}", r.audit.input_feasible);
    let _ = writeln!(rep, "audit: {}", if r.audit.passed { "PASS" } else { "FAIL" });
    print!("{rep}");
    write_file(&args.out, "report.txt", &rep)?;
    Ok(r.audit.passed)
}

fn cmd_sweep_tau(args: &ScenarioArgs, taus: &[f64]) -> Result<bool, String> {
    let cfg = args.config()?;
    let model = assemble_scenario(&cfg).map_err(|e| e.to_string())?;
    let cl = ClosedLoop {
        plant: &model.plant,
        costs: &model.costs,
        feasible: &model.feasible,
        gains: &model.gains,
        kind: cfg.kind,
        eta: model.eta,
        estimator: model.estimator.as_ref().map(|(a, g)| (a, g)),
    };
    let sc = SimConfig::new(cfg.t_end, cfg.h, cfg.disturbance().map_err(|e| e.to_string())?, 1)
        .map_err(|e| e.to_string())?;
    let res = tau_sweep(&cl, &InitialConditions::rest(&model.plant), &sc, &model.band, taus);
    write_file(&args.out, "sweep_tau.csv", &tau_sweep_csv(&res))?;
    let mut rep = format!("kind: {}\n", kind_name(cfg.kind));
    for e in &res.entries {
        let _ = writeln!(rep, "tau {} -> {}", fmt_f64(e.tau), e.class);
    }
    match res.smallest_stable_tau {
        Some(t) => {
            let _ = writeln!(rep, "smallest stable tau: {}", fmt_f64(t));
        }
        None => {
            let _ = writeln!(rep, "no stable tau in the grid");
        }
    }
    print!("{rep}");
    write_file(&args.out, "report.txt", &rep)?;
    Ok(true)
}

fn cmd_sweep_eps(args: &ScenarioArgs, epsilons: &[f64], taus: &[f64]) -> Result<bool, String> {
    let mut cfg = args.config()?;
    // this sweep probes the reduced design's robustness to the real fast
    // timescale, so the reduced estimator is mandatory
    if cfg.kind != ControllerKind::EeFboReduced {
        let tuned = ScenarioConfig::benchmark_default(ControllerKind::EeFboReduced, cfg.tau);
        cfg.kind = tuned.kind;
        cfg.lqe_q_diag = tuned.lqe_q_diag;
    }
    let model = assemble_scenario(&cfg).map_err(|e| e.to_string())?;
    let (aug, gain) = model
        .estimator
        .as_ref()
        .ok_or("internal: reduced scenario without estimator")?;
    let sc = SimConfig::new(cfg.t_end, cfg.h, cfg.disturbance().map_err(|e| e.to_string())?, 1)
        .map_err(|e| e.to_string())?;
    let res = epsilon_sweep(
        &model.tt,
        &model.costs,
        &model.feasible,
        &model.gains,
        (aug, gain),
        model.eta,
        &sc,
        &model.band,
        epsilons,
        taus,
    )
    .map_err(|e| e.to_string())?;
    write_file(&args.out, "sweep_eps.csv", &eps_sweep_csv(&res))?;
    let mut rep = String::new();
    for e in &res.entries {
        let _ = writeln!(rep, "eps {} tau {} -> {}", fmt_f64(e.epsilon), fmt_f64(e.tau), e.class);
    }
    match res.largest_stable_epsilon {
        Some(x) => {
            let _ = writeln!(rep, "largest stable epsilon: {}", fmt_f64(x));
        }
        None => {
            let _ = writeln!(rep, "no stable epsilon in the grid");
        }
    }
    print!("{rep}");
    write_file(&args.out, "report.txt", &rep)?;
    Ok(true)
}

fn cmd_design_estimator(args: &ScenarioArgs) -> Result<bool, String> {
    let mut cfg = args.config()?;
    if !cfg.kind.uses_estimator() {
        cfg = ScenarioConfig::benchmark_default(ControllerKind::EeFboFull, cfg.tau);
    }
    let model = assemble_scenario(&cfg).map_err(|e| e.to_string())?;
    let (aug, gain) = model.estimator.as_ref().unwrap();
    let weights =
        fbo_core::estimator::LqeWeights::diagonal(&cfg.lqe_q_diag, &[cfg.lqe_r])
            .map_err(|e| e.to_string())?;
    let resid = riccati_residual(aug, &weights, gain).map_err(|e| e.to_string())?;
    let (kappa, lambda) = gain.decay_envelope().map_err(|e| e.to_string())?;

    let mut rep = String::new();
    let _ = writeln!(rep, "kind: {}", kind_name(cfg.kind));
    rep.push_str(&matrix_block("A_aug", &aug.a_aug));
    rep.push_str(&matrix_block("C_aug", &aug.c_aug));
    rep.push_str(&matrix_block("L (observer gain)", &gain.l));
    rep.push_str(&matrix_block("P (Riccati solution)", &gain.riccati_p));
    rep.push_str(&matrix_block(
        "Lyapunov certificate of A_aug + L*C_aug",
        &gain.certificate,
    ));
    let _ = writeln!(rep, "riccati residual (inf-norm): {}", fmt_f64(resid));
    let _ = writeln!(rep, "error decay envelope: kappa {} lambda {}", fmt_f64(kappa), fmt_f64(lambda));
    let ok = resid <= 1e-8;
    let _ = writeln!(rep, "design audit: {}", if ok { "PASS" } else { "FAIL" });
    print!("{rep}");
    write_file(&args.out, "estimator.txt", &rep)?;
    Ok(ok)
}

struct AuditLog {
    lines: String,
    all_ok: bool,
}

impl AuditLog {
    fn new() -> Self {
        Self { lines: String::new(), all_ok: true }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        let _ = writeln!(
            self.lines,
            "{}: {} ({detail})",
            name,
            if ok { "PASS" } else { "FAIL" }
        );
        self.all_ok &= ok;
    }
}

fn cmd_verify(args: &ScenarioArgs) -> Result<bool, String> {
    let cfg = args.config()?;
    let model = assemble_scenario(&cfg).map_err(|e| e.to_string())?;
    let mut log = AuditLog::new();

    // model structure
    let g_full = dc_gains(&model.plant).map_err(|e| e.to_string())?;
    let reduced = reduce(&model.tt).map_err(|e| e.to_string())?;
    let g_red = reduced_dc_gains(&reduced).map_err(|e| e.to_string())?;
    let gain_gap = g_full
        .pi_u
        .sub(&g_red.pi_u)
        .and_then(|d| Ok(d.norm_inf().max(g_full.pi_w.sub(&g_red.pi_w)?.norm_inf())))
        .map_err(|e| e.to_string())?;
    log.check("dc-gain equivalence", gain_gap <= 1e-10, format!("gap {gain_gap:.2e}"));

    let aug_full = augment(&model.plant).map_err(|e| e.to_string())?;
    let aug_red = augment_reduced(&reduced).map_err(|e| e.to_string())?;
    log.check(
        "non-resonance",
        aug_full.nonresonant && aug_red.nonresonant,
        format!("full {} reduced {}", aug_full.nonresonant, aug_red.nonresonant),
    );

    // estimator designs and error cascades, both model orders
    let weights_full =
        fbo_core::estimator::LqeWeights::diagonal(&[1e-2, 1e-2, 1e2, 1e2, 1e6], &[cfg.lqe_r]);
    let weights_red = fbo_core::estimator::LqeWeights::diagonal(&[1e-2, 1e-2, 1e6], &[cfg.lqe_r]);
    match (weights_full, weights_red) {
        (Ok(wf), Ok(wr)) => {
            let gf = fbo_core::estimator::design_lqe(&aug_full, &wf);
            let gr = fbo_core::estimator::design_lqe(&aug_red, &wr);
            match (&gf, &gr) {
                (Ok(gf), Ok(gr)) => {
                    let rf = riccati_residual(&aug_full, &wf, gf).unwrap_or(f64::INFINITY);
                    let rr = riccati_residual(&aug_red, &wr, gr).unwrap_or(f64::INFINITY);
                    log.check(
                        "estimator Riccati residuals",
                        rf <= 1e-8 && rr <= 1e-8,
                        format!("full {rf:.2e} reduced {rr:.2e}"),
                    );
                    let cf = build_error_cascade(&model.plant, &aug_full, gf);
                    let cr = build_error_cascade_reduced(&reduced, &model.tt, &aug_red, gr);
                    log.check(
                        "error-cascade certificates",
                        cf.is_ok() && cr.is_ok(),
                        format!("full {} reduced {}", cf.is_ok(), cr.is_ok()),
                    );
                }
                _ => log.check("estimator design", false, "LQE design failed".into()),
            }
        }
        _ => log.check("estimator weights", false, "invalid LQE weights".into()),
    }

    let sg = certify_small_gain_blocks(&model.tt);
    log.check(
        "small-gain block certificates",
        sg.is_ok(),
        match &sg {
            Ok(c) => format!("alpha0 {} alpha22 {}", c.alpha0, c.alpha22),
            Err(e) => e.to_string(),
        },
    );

    // cost-model gradients against finite differences (points near the
    // penalty kinks are skipped; central differences straddle them)
    let fd_f = finite_diff_check(
        &|u| 0.5 * u.iter().map(|x| x * x).sum::<f64>(),
        &|u| u.to_vec(),
        model.feasible.dim(),
        -0.05,
        0.05,
        50,
        &|_| true,
    );
    let band = cfg.band_penalty().map_err(|e| e.to_string())?;
    let (lo, hi) = cfg.band;
    let fd_g = finite_diff_check(
        &|y| band.value(y[0]),
        &|y| vec![band.gradient(y[0])],
        1,
        3.0 * lo,
        3.0 * hi,
        50,
        &|y| (y[0] - lo).abs() > 1e-5 && (y[0] - hi).abs() > 1e-5,
    );
    log.check(
        "gradient finite-difference checks",
        fd_f <= 1e-6 && fd_g <= 1e-4,
        format!("input cost {fd_f:.2e} band penalty {fd_g:.2e}"),
    );

    // offline optimum: fixed point unique across starts, zero defect
    let w = vec![fbo_core::bench::mw_to_pu(cfg.disturbance_mw, cfg.params.s_base)];
    let u1 = solve_offline_optimum(&model.costs, &model.feasible, &model.gains, &w)
        .map_err(|e| e.to_string())?;
    let u0_alt: Vec<f64> = model.feasible.upper.clone();
    let u2 = solve_offline_optimum_from(&model.costs, &model.feasible, &model.gains, &w, &u0_alt)
        .map_err(|e| e.to_string())?;
    let spread = u1
        .iter()
        .zip(&u2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let kkt = kkt_residual(&model.costs, &model.feasible, &model.gains, &w, &u1)
        .map_err(|e| e.to_string())?;
    log.check(
        "offline optimum uniqueness + KKT",
        spread <= 1e-8 && kkt <= 1e-9,
        format!("start spread {spread:.2e} kkt {kkt:.2e}"),
    );

    // contraction and ISS audits run at a step inside the certified range
    let emax = eta_max(&model.costs, &model.gains.pi_u).map_err(|e| e.to_string())?;
    let eta_a = 0.5 * emax;
    let analysis =
        contraction_analysis(&model.costs, &model.gains, eta_a).map_err(|e| e.to_string())?;
    let mut rng = SplitMix64::new(0x0a11d17);
    let mut contraction_ok = true;
    let m = model.feasible.dim();
    for _ in 0..2000 {
        let u: Vec<f64> = (0..m).map(|_| rng.uniform(-0.1, 0.1)).collect();
        let up: Vec<f64> = (0..m).map(|_| rng.uniform(-0.1, 0.1)).collect();
        let tu = discrete_map(&model.costs, &model.feasible, &model.gains, eta_a, &u, &[0.0], &[0.0])
            .map_err(|e| e.to_string())?;
        let tup =
            discrete_map(&model.costs, &model.feasible, &model.gains, eta_a, &up, &[0.0], &[0.0])
                .map_err(|e| e.to_string())?;
        let lhs: f64 = tu.iter().zip(&tup).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let rhs: f64 =
            u.iter().zip(&up).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() * analysis.rho;
        if lhs > rhs + 1e-12 {
            contraction_ok = false;
        }
    }
    log.check(
        "projected-map contraction",
        contraction_ok,
        format!("rho {:.6}", analysis.rho),
    );

    let u_star = solve_offline_optimum(&model.costs, &model.feasible, &model.gains, &[0.0])
        .map_err(|e| e.to_string())?;
    let mut iss_ok = true;
    let mut worst_margin = f64::INFINITY;
    for _ in 0..3 {
        let (av, fv, pv) = (rng.uniform(0.0, 0.01), rng.uniform(0.1, 3.0), rng.uniform(0.0, 6.28));
        let (ae, fe, pe) = (rng.uniform(0.0, 0.01), rng.uniform(0.1, 3.0), rng.uniform(0.0, 6.28));
        let u0: Vec<f64> = (0..m).map(|_| rng.uniform(-0.03, 0.03)).collect();
        let tr = simulate_driven_controller(
            &model.costs,
            &model.feasible,
            &model.gains,
            eta_a,
            1.0,
            &u0,
            &|t| vec![av * (fv * t + pv).sin()],
            &|t| vec![ae * (fe * t + pe).cos()],
            60.0,
            1e-2,
        )
        .map_err(|e| e.to_string())?;
        let (ok, margin) = iss_bound_audit(&analysis, 1.0, &tr, &u_star);
        iss_ok &= ok;
        worst_margin = worst_margin.min(margin);
    }
    log.check("ISS bound audit", iss_ok, format!("worst margin {worst_margin:.3e}"));

    // end-to-end closed loop with the scenario's own kind and tuning
    let case = run_case_study(&cfg).map_err(|e| e.to_string())?;
    log.check(
        "closed-loop steady-state audit",
        case.audit.passed,
        format!("class {} u_error {:.2e}", case.class, case.audit.u_error),
    );

    print!("{}", log.lines);
    let verdict = format!(
        "{}overall: {}\n",
        log.lines,
        if log.all_ok { "PASS" } else { "FAIL" }
    );
    println!("overall: {}", if log.all_ok { "PASS" } else { "FAIL" });
    write_file(&args.out, "audit.txt", &verdict)?;
    Ok(log.all_ok)
}

fn cmd_show_model(
    args: &ScenarioArgs,
    plant: Option<&PathBuf>,
    export: Option<&PathBuf>,
) -> Result<bool, String> {
    if let Some(path) = plant {
        match load_plant(path)? {
            LoadedPlant::Lti(p) => {
                print!("{}", matrix_block("A", &p.a));
                print!("{}", matrix_block("B", &p.b));
                print!("{}", matrix_block("C", &p.c));
                print!("{}", matrix_block("E", &p.e));
                let g = dc_gains(&p).map_err(|e| e.to_string())?;
                print!("{}", matrix_block("Pi_u", &g.pi_u));
                print!("{}", matrix_block("Pi_w", &g.pi_w));
            }
            LoadedPlant::TwoTimescale(tt) => show_two_timescale(&tt)?,
        }
        return Ok(true);
    }
    let cfg = args.config()?;
    let tt = fbo_core::bench::build_power_system(&cfg.params).map_err(|e| e.to_string())?;
    show_two_timescale(&tt)?;
    if let Some(path) = export {
        let text = toml::to_string(&plant_file_from_two_timescale(&tt))
            .map_err(|e| e.to_string())?;
        std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn show_two_timescale(tt: &fbo_core::plant::TwoTimescalePlant) -> Result<(), String> {
    for (name, m) in [
        ("A11", &tt.a11),
        ("A12", &tt.a12),
        ("A21", &tt.a21),
        ("A22", &tt.a22),
        ("B1", &tt.b1),
        ("B2", &tt.b2),
        ("E1", &tt.e1),
        ("E2", &tt.e2),
        ("C1", &tt.c1),
        ("C2", &tt.c2),
    ] {
        print!("{}", matrix_block(name, m));
    }
    println!("epsilon: {}", fmt_f64(tt.epsilon));
    let full = tt.assemble_full().map_err(|e| e.to_string())?;
    print!("{}", matrix_block("A (assembled)", &full.a));
    let g = dc_gains(&full).map_err(|e| e.to_string())?;
    print!("{}", matrix_block("Pi_u", &g.pi_u));
    print!("{}", matrix_block("Pi_w", &g.pi_w));
    let r = reduce(tt).map_err(|e| e.to_string())?;
    print!("{}", matrix_block("A0 (reduced)", &r.a0));
    print!("{}", matrix_block("B0 (reduced)", &r.b0));
    print!("{}", matrix_block("C0 (reduced)", &r.c0));
    print!("{}", matrix_block("D0 (reduced)", &r.d0));
    print!("{}", matrix_block("Q0 (reduced)", &r.q0));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::SweepTau { args, taus } => cmd_sweep_tau(args, taus),
        Cmd::SweepEps { args, epsilons, taus } => cmd_sweep_eps(args, epsilons, taus),
        Cmd::DesignEstimator(args) => cmd_design_estimator(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::ShowModel { args, plant, export_plant } => {
            cmd_show_model(args, plant.as_ref(), export_plant.as_ref())
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
