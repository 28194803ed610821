//! Text formats for trajectories, refinement reports and snapshots.
//! All output uses `.` as decimal separator, LF line endings and a header
//! row.

use std::fmt::Write as _;

use crate::convergence::ConvergenceReport;
use crate::diagnostics::{decay_bound_series, Trajectory};
use crate::mesh::FemFunction;

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

/// `t,l2_norm,h1_norm,control_l2,newton_iters`, with the full `H¹` norm.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,l2_norm,h1_norm,control_l2,newton_iters\n");
    let h1 = traj.h1();
    for i in 0..traj.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(traj.times[i]),
            num(traj.l2[i]),
            num(h1[i]),
            num(traj.control_l2[i]),
            traj.newton_iters[i]
        );
    }
    s
}

/// `t,l2_norm,h1_norm,l4_norm,control_l2,decay_bound_rhs`, where the last
/// column is the envelope `e^{-αt}‖Y⁰‖` for the given `α`.
pub fn diagnostics_csv(traj: &Trajectory, alpha: f64) -> String {
    let mut s = String::from("t,l2_norm,h1_norm,l4_norm,control_l2,decay_bound_rhs\n");
    let h1 = traj.h1();
    let rhs = decay_bound_series(traj, alpha);
    for i in 0..traj.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(traj.times[i]),
            num(traj.l2[i]),
            num(h1[i]),
            num(traj.l4[i]),
            num(traj.control_l2[i]),
            num(rhs[i])
        );
    }
    s
}

fn order(o: Option<&f64>) -> String {
    match o {
        Some(v) if v.is_finite() => format!("{v:.3}"),
        _ => "--".into(),
    }
}

/// `resolution,error_l2,oc_l2,error_linf,oc_linf`, one row per rung.
pub fn report_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("resolution,error_l2,oc_l2,error_linf,oc_linf\n");
    for (i, r) in report.ladder.iter().enumerate() {
        let prev = i.checked_sub(1);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.label,
            num(r.error_l2),
            order(prev.and_then(|p| report.orders_l2.get(p))),
            num(r.error_linf),
            order(prev.and_then(|p| report.orders_linf.get(p)))
        );
    }
    s
}

/// Tab-separated `x  y` rows at every mesh node.
pub fn snapshot_dump(f: &FemFunction) -> String {
    let mut s = String::from("x\ty\n");
    for (x, y) in f.mesh().nodes().iter().zip(f.nodal_values()) {
        let _ = writeln!(s, "{}\t{}", num(*x), num(y));
    }
    s
}

/// Splits a CSV produced here into header and numeric rows (`--` → NaN).
pub fn parse_csv(text: &str) -> Option<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines.next()?.split(',').map(str::to_string).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for line in lines {
        let row = line
            .split(',')
            .map(|v| if v == "--" { Some(f64::NAN) } else { v.parse().ok().or_else(|| v.strip_prefix("1/").and_then(|d| d.parse::<f64>().ok()).map(|d| 1.0 / d)) })
            .collect::<Option<Vec<f64>>>()?;
        if row.len() != header.len() {
            return None;
        }
        rows.push(row);
    }
    Some((header, rows))
}
