//! CSV and report writers. All floating-point output uses 17 significant
//! digits so files round-trip exactly.

use fbo_core::sim::{EpsilonSweepResult, TauSweepResult, Trajectory};
use fbo_core::Matrix;
use std::fmt::Write as _;
use std::path::Path;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_channels(header: &mut String, prefix: &str, count: usize) {
    for i in 1..=count {
        header.push(',');
        let _ = write!(header, "{prefix}{i}");
    }
}

fn push_values(line: &mut String, values: &[f64]) {
    for &v in values {
        line.push(',');
        line.push_str(&fmt_f64(v));
    }
}

pub fn trajectory_csv(tr: &Trajectory) -> String {
    let ny = tr.y.first().map_or(0, |v| v.len());
    let nu = tr.u.first().map_or(0, |v| v.len());
    let nx = tr.x.first().map_or(0, |v| v.len());
    let nxh = tr.xhat.first().map_or(0, |v| v.len());
    let nwh = tr.what.first().map_or(0, |v| v.len());
    let nyh = tr.yhat.first().map_or(0, |v| v.len());
    let nyb = tr.ybar_hat.first().map_or(0, |v| v.len());

    let mut out = String::from("time");
    push_channels(&mut out, "y", ny);
    push_channels(&mut out, "u", nu);
    push_channels(&mut out, "x", nx);
    push_channels(&mut out, "xhat", nxh);
    push_channels(&mut out, "what", nwh);
    push_channels(&mut out, "yhat", nyh);
    push_channels(&mut out, "ybar_hat", nyb);
    out.push('\n');

    for i in 0..tr.times.len() {
        out.push_str(&fmt_f64(tr.times[i]));
        push_values(&mut out, &tr.y[i]);
        push_values(&mut out, &tr.u[i]);
        push_values(&mut out, &tr.x[i]);
        if nxh > 0 {
            push_values(&mut out, &tr.xhat[i]);
        }
        if nwh > 0 {
            push_values(&mut out, &tr.what[i]);
        }
        if nyh > 0 {
            push_values(&mut out, &tr.yhat[i]);
        }
        if nyb > 0 {
            push_values(&mut out, &tr.ybar_hat[i]);
        }
        out.push('\n');
    }
    out
}

pub fn tau_sweep_csv(res: &TauSweepResult) -> String {
    let mut out =
        String::from("tau,class,nadir,settling_time,band_violation_integral\n");
    for e in &res.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(e.tau),
            e.class,
            fmt_f64(e.metrics.nadir),
            fmt_f64(e.metrics.settling_time),
            fmt_f64(e.metrics.band_violation_integral),
        );
    }
    out
}

pub fn eps_sweep_csv(res: &EpsilonSweepResult) -> String {
    let mut out = String::from("epsilon,tau,class\n");
    for e in &res.entries {
        let _ = writeln!(out, "{},{},{}", fmt_f64(e.epsilon), fmt_f64(e.tau), e.class);
    }
    out
}

pub fn matrix_block(name: &str, m: &Matrix) -> String {
    let mut out = format!("{name} ({}x{}):\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        out.push_str("  ");
        for j in 0..m.cols() {
            if j > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{:+.10e}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    std::fs::create_dir_all(dir)
        .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}
