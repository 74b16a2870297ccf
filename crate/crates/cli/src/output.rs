//! Files written by `simulate` and `sweep`.

use std::fs;
use std::path::Path;

use etc_stab::sim::Termination;
use etc_stab::{Design, Report, Trajectory};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::prepare::Prepared;

fn io(path: &Path, e: impl ToString) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| io(path, e))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| io(path, e))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let (n, agents) = traj.states[0].shape();
    let p = traj.inputs[0].nrows();
    let mut header = vec!["t".to_string(), "agent".to_string()];
    header.extend((1..=n).map(|c| format!("x{c}")));
    header.extend((1..=p).map(|c| format!("u{c}")));
    w.write_record(&header).map_err(|e| io(path, e))?;
    for ((t, x), u) in traj.times.iter().zip(&traj.states).zip(&traj.inputs) {
        for a in 0..agents {
            let mut row = vec![num(*t), (a + 1).to_string()];
            row.extend(x.column(a).iter().map(|v| num(*v)));
            row.extend(u.column(a).iter().map(|v| num(*v)));
            w.write_record(&row).map_err(|e| io(path, e))?;
        }
    }
    finish(w, path)
}

pub fn write_events(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let n = traj.states[0].nrows();
    let mut header = vec![
        "agent".to_string(),
        "event_index".into(),
        "time".into(),
        "mode".into(),
    ];
    header.extend((1..=n).map(|c| format!("p{c}")));
    w.write_record(&header).map_err(|e| io(path, e))?;
    for (i, events) in traj.events.iter().enumerate() {
        for (k, e) in events.iter().enumerate() {
            let mut row = vec![
                (i + 1).to_string(),
                k.to_string(),
                num(e.time),
                traj.mode.name().to_string(),
            ];
            row.extend(e.sample.iter().map(|v| num(*v)));
            w.write_record(&row).map_err(|e| io(path, e))?;
        }
    }
    finish(w, path)
}

pub fn write_phi(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["t", "agent", "phi"])
        .map_err(|e| io(path, e))?;
    for (t, phi) in traj.times.iter().zip(&traj.phi) {
        for (i, v) in phi.iter().enumerate() {
            w.write_record([num(*t), (i + 1).to_string(), num(*v)])
                .map_err(|e| io(path, e))?;
        }
    }
    finish(w, path)
}

pub fn write_metrics(path: &Path, report: &Report) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["t", "tilde_x_norm", "hull_residual", "v1", "envelope"])
        .map_err(|e| io(path, e))?;
    for (s, t) in report.times.iter().enumerate() {
        let env = report
            .envelope_values
            .get(s)
            .map(|v| num(*v))
            .unwrap_or_default();
        w.write_record([
            num(*t),
            num(report.tilde_x_norms[s]),
            num(report.hull_residuals[s]),
            num(report.lyapunov_v1[s]),
            env,
        ])
        .map_err(|e| io(path, e))?;
    }
    finish(w, path)
}

fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| json!(r.iter().copied().collect::<Vec<f64>>()))
            .collect(),
    )
}

pub fn design_json(p: &Prepared) -> Value {
    let d: &Design = &p.design;
    let bounds = p.bounds.map(|b| {
        json!({
            "k_gain": b.k_gain,
            "xi_max": b.xi_max,
            "vartheta": b.vartheta,
            "k_w": b.k_w,
        })
    });
    json!({
        "R": matrix(&d.r),
        "K": matrix(&d.k),
        "varsigma_r": d.varsigma_r,
        "delta": d.delta,
        "riccati_residual": d.riccati_certificate,
        "riccati_residual_bound": -d.delta / 2.0,
        "riccati_iterations": d.riccati_iterations,
        "eta": d.eta,
        "psi": p.grounded.psi.iter().copied().collect::<Vec<f64>>(),
        "m_norm": d.m_norm,
        "v1": d.v1,
        "varsigma_t": d.varsigma_t,
        "rho1": d.rho1,
        "k_max": d.k_max,
        "k_max_dynamic": d.k_max_dynamic,
        "k": p.scenario.trigger.k,
        "trigger_bounds": bounds,
        "closed_loop_abscissa": d.closed_loop_abscissa,
    })
}

fn opt_vec(v: &[Option<f64>]) -> Value {
    Value::Array(
        v.iter()
            .map(|x| x.map_or(Value::Null, |x| json!(x)))
            .collect(),
    )
}

pub fn report_json(name: &str, p: &Prepared, traj: &Trajectory, r: &Report) -> Value {
    let termination = match traj.termination {
        Termination::Completed => json!({ "status": "completed", "time": r.termination_time }),
        Termination::Diverged { time, norm } => {
            json!({ "status": "diverged", "time": time, "norm": norm })
        }
    };
    let envelope = r.envelope.map(|e| {
        json!({
            "k_w": e.k_w,
            "sigma": e.sigma,
            "m": e.m,
            "beta": e.beta,
            "psi0": e.psi0,
            "max_v1_over_psi": r.envelope_ratio_max,
        })
    });
    json!({
        "scenario": name,
        "mode": traj.mode.name(),
        "termination": termination,
        "step": p.scenario.step,
        "horizon": p.scenario.horizon,
        "design": design_json(p),
        "tilde_x_initial": r.initial_tilde_x_norm(),
        "tilde_x_final": r.final_tilde_x_norm(),
        "hull_residual_final": r.final_hull_residuals,
        "trigger_counts": r.trigger_counts,
        "total_triggers": r.total_triggers(),
        "min_inter_event_times": opt_vec(&r.min_inter_event_times),
        "h_estimates": r.h_estimates,
        "setc_zeno_bound_min": r.setc_zeno_bounds.iter().map(|b| b.iter().copied().reduce(f64::min)).collect::<Vec<_>>(),
        "setc_zeno_bounds": r.setc_zeno_bounds,
        "detc_zeno_bounds": opt_vec(&r.detc_zeno_bounds),
        "detc_bound_violations": r.detc_bound_violations.iter().map(|i| i + 1).collect::<Vec<_>>(),
        "envelope": envelope,
        "phi_min": r.phi_min,
        "phi_bound_slack": r.phi_bound_slack,
    })
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    fs::write(path, s).map_err(|e| io(path, e))
}

pub fn plot_script(traj: &Trajectory) -> String {
    let (n, agents) = traj.states[0].shape();
    let m = traj.followers;
    let mut s = String::from(
        "# gnuplot script: states, events, metrics\nset datafile separator ','\nset key outside right\nset grid\nset xlabel 't (s)'\n",
    );
    s.push_str("set terminal pngcairo size 900,500\n");
    for c in 1..=n {
        s.push_str(&format!(
            "set output 'state_x{c}.png'\nset ylabel 'x_{{i{c}}}'\nplot "
        ));
        let parts: Vec<String> = (1..=agents)
            .map(|a| {
                let role = if a <= m { "follower" } else { "leader" };
                format!("'trajectory.csv' every ::1 using 1:(column(2)=={a} ? column({}) : 1/0) with lines title '{role} {a}'", c + 2)
            })
            .collect();
        s.push_str(&parts.join(", \\\n     "));
        s.push('\n');
    }
    s.push_str("set output 'events.png'\nset ylabel 'agent'\nset yrange [0:");
    s.push_str(&(m + 1).to_string());
    s.push_str("]\nplot 'events.csv' every ::1 using 3:1 with points pt 7 ps 0.5 title 'trigger instants'\nset autoscale y\n");
    s.push_str("set output 'metrics.png'\nset logscale y\nset ylabel 'norm'\nplot 'metrics.csv' every ::1 using 1:2 with lines title '|x~|', \\\n     'metrics.csv' every ::1 using 1:3 with lines title 'hull residual', \\\n     'metrics.csv' every ::1 using 1:4 with lines title 'V1'");
    if !traj.phi.is_empty() {
        s.push_str(", \\\n     'metrics.csv' every ::1 using 1:5 with lines title 'envelope'\n");
        s.push_str("set output 'phi.png'\nset ylabel 'phi_i'\nplot ");
        let parts: Vec<String> = (1..=m)
            .map(|i| format!("'phi.csv' every ::1 using 1:(column(2)=={i} ? column(3) : 1/0) with lines title 'phi {i}'"))
            .collect();
        s.push_str(&parts.join(", \\\n     "));
    }
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io(path, e))
}
