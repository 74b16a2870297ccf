//! The four subcommands. Each returns the text to print and the exit code,
//! so they can be driven from tests without spawning a process.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use etc_stab::analysis;
use etc_stab::graph;
use etc_stab::sim::{self, TriggerMode};
use etc_stab::{Error, Report, Trajectory};
use rayon::prelude::*;

use crate::error::{exit, CliError};
use crate::output;
use crate::prepare::{self, Options, Prepared};
use crate::scenario::{self, Loaded, Policy};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

fn scenario_name(l: &Loaded) -> String {
    l.file.name.clone().unwrap_or_else(|| {
        Path::new(&l.origin)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    })
}

fn fmt_complex(z: &nalgebra::Complex<f64>) -> String {
    if z.im.abs() < 1e-12 {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

fn one_based(cell: &[usize]) -> String {
    let v: Vec<String> = cell.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", v.join(", "))
}

pub fn check_graph(l: &Loaded) -> Result<Outcome, CliError> {
    let net = prepare::network(&l.file)
        .map_err(|e| l.error(&[crate::locate::Seg::Key("network".into())], e.to_string()))?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "followers: {}, leaders: {}",
        net.followers(),
        net.leaders()
    );
    let _ = writeln!(
        s,
        "weakly connected: {}",
        if net.is_weakly_connected() {
            "yes"
        } else {
            "no"
        }
    );
    let part = graph::iscc_partition(&net);
    let cells: Vec<String> = part.cells.iter().map(|c| one_based(c)).collect();
    let _ = writeln!(
        s,
        "iSCC cells (c = {}): {}",
        part.cell_count(),
        cells.join(" ")
    );
    let _ = writeln!(
        s,
        "non-iSCC vertices: {}",
        if part.non_iscc.is_empty() {
            "none".to_string()
        } else {
            one_based(&part.non_iscc)
        }
    );
    match graph::laplacian_rank_check(&net) {
        Ok(rc) => {
            let _ = writeln!(
                s,
                "rank L_F = {} (m - c = {}): {}",
                rc.rank,
                net.followers() - rc.cell_count,
                if rc.consistent {
                    "consistent"
                } else {
                    "INCONSISTENT"
                }
            );
        }
        Err(e) => {
            let _ = writeln!(s, "rank check skipped: {e}");
        }
    }
    let pinned = graph::pinning_check(&net);
    let m = graph::assemble_grounded(&net);
    let spectrum: Vec<String> = etc_stab::linalg::eigenvalues(&m)
        .iter()
        .map(fmt_complex)
        .collect();
    if pinned {
        let _ = writeln!(s, "pinning: OK");
    } else {
        let unpinned: Vec<String> = part
            .cells
            .iter()
            .filter(|c| c.iter().all(|&i| net.pinning_weight(i) == 0.0))
            .map(|c| one_based(c))
            .collect();
        let _ = writeln!(
            s,
            "pinning: FAILED (unpinned cells: {})",
            unpinned.join(" ")
        );
    }
    let _ = writeln!(s, "M eigenvalues: {}", spectrum.join(", "));
    if pinned {
        match graph::grounded_matrix(&net) {
            Ok(gm) => {
                let psi: Vec<String> = gm.psi.iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(s, "psi: [{}]", psi.join(", "));
                let _ = writeln!(s, "eta: {:.6}", gm.eta);
                let _ = writeln!(
                    s,
                    "diagonally dominant: {}",
                    if gm.diagonally_dominant { "yes" } else { "no" }
                );
            }
            Err(e) => {
                let _ = writeln!(s, "certificate: FAILED ({e})");
                return Ok(Outcome {
                    text: s,
                    code: exit::SOLVER,
                });
            }
        }
    }
    Ok(Outcome {
        text: s,
        code: if pinned {
            exit::SUCCESS
        } else {
            exit::VALIDATION
        },
    })
}

pub fn design(l: &Loaded) -> Result<Outcome, CliError> {
    let p = prepare::prepare(l, Options::default())?;
    let mut text = serde_json::to_string_pretty(&output::design_json(&p)).expect("json serializes");
    text.push('\n');
    Ok(Outcome {
        text,
        code: exit::SUCCESS,
    })
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: TriggerMode,
    pub diverged: bool,
    pub termination_time: f64,
    pub tilde_x_initial: f64,
    pub tilde_x_final: f64,
    pub hull_residual_final: f64,
    pub trigger_counts: Vec<usize>,
    pub min_inter_event_time: Option<f64>,
}

impl RunSummary {
    fn render(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {name} ({})", self.mode);
        if self.diverged {
            let _ = writeln!(s, "status: diverged at t = {}", self.termination_time);
        } else {
            let _ = writeln!(s, "status: completed at t = {}", self.termination_time);
        }
        let _ = writeln!(
            s,
            "|x~(0)| = {:.6e}, |x~(T)| = {:.6e}",
            self.tilde_x_initial, self.tilde_x_final
        );
        let _ = writeln!(
            s,
            "max hull residual at T: {:.6e}",
            self.hull_residual_final
        );
        let counts: Vec<String> = self.trigger_counts.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "trigger counts: {}", counts.join(" "));
        match self.min_inter_event_time {
            Some(t) => {
                let _ = writeln!(s, "min inter-event time: {t}");
            }
            None => {
                let _ = writeln!(s, "min inter-event time: none (no events after t = 0)");
            }
        }
        s
    }
}

pub fn execute(p: &Prepared) -> Result<(Trajectory, Report), CliError> {
    let traj = sim::run(&p.scenario, &p.design).map_err(|e| match e {
        e @ Error::PhiNonPositive { .. } => CliError::Solver(format!("{e}; reduce the step")),
        other => CliError::Solver(other.to_string()),
    })?;
    let report = analysis::summarize(&traj, &p.scenario, &p.design, &p.grounded)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    Ok((traj, report))
}

/// Runs `p` and writes every artifact into `dir`.
pub fn run_to_dir(
    name: &str,
    l: &Loaded,
    p: &Prepared,
    dir: &Path,
) -> Result<RunSummary, CliError> {
    let (traj, report) = execute(p)?;
    output::create_dir(dir)?;
    output::write_text(&dir.join("scenario.json"), &scenario::to_json(&l.file))?;
    output::write_trajectory(&dir.join("trajectory.csv"), &traj)?;
    output::write_events(&dir.join("events.csv"), &traj)?;
    if !traj.phi.is_empty() {
        output::write_phi(&dir.join("phi.csv"), &traj)?;
    }
    output::write_metrics(&dir.join("metrics.csv"), &report)?;
    output::write_json(
        &dir.join("report.json"),
        &output::report_json(name, p, &traj, &report),
    )?;
    output::write_text(&dir.join("plot.gp"), &output::plot_script(&traj))?;
    Ok(RunSummary {
        mode: traj.mode,
        diverged: report.diverged,
        termination_time: report.termination_time,
        tilde_x_initial: report.initial_tilde_x_norm(),
        tilde_x_final: report.final_tilde_x_norm(),
        hull_residual_final: report.max_final_hull_residual(),
        trigger_counts: report.trigger_counts.clone(),
        min_inter_event_time: traj.min_inter_event_time(),
    })
}

fn output_dir(l: &Loaded, out: Option<&Path>) -> Result<PathBuf, CliError> {
    match (out, &l.file.output.dir) {
        (Some(o), _) => Ok(o.to_path_buf()),
        (None, Some(d)) => Ok(PathBuf::from(d)),
        (None, None) => Err(CliError::Usage(
            "no output directory: pass --out or set output.dir".into(),
        )),
    }
}

pub fn simulate(
    l: &Loaded,
    mode: Option<TriggerMode>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let dir = output_dir(l, out)?;
    let p = prepare::prepare(
        l,
        Options {
            mode,
            ..Options::default()
        },
    )?;
    let summary = run_to_dir(&scenario_name(l), l, &p, &dir)?;
    let mut text = summary.render(&scenario_name(l));
    let _ = writeln!(text, "output: {}", dir.display());
    let code = if summary.diverged {
        text.push_str("DIVERGED\n");
        exit::DIVERGED
    } else {
        exit::SUCCESS
    };
    Ok(Outcome { text, code })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    KScale,
    Beta,
    Sigma,
    Theta,
    Mu,
    H,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::KScale => "k-scale",
            SweepParam::Beta => "beta",
            SweepParam::Sigma => "sigma",
            SweepParam::Theta => "theta",
            SweepParam::Mu => "mu",
            SweepParam::H => "h",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "k-scale" => SweepParam::KScale,
            "beta" => SweepParam::Beta,
            "sigma" => SweepParam::Sigma,
            "theta" => SweepParam::Theta,
            "mu" => SweepParam::Mu,
            "h" => SweepParam::H,
            other => return Err(format!(
                "unknown sweep parameter `{other}` (expected k-scale, beta, sigma, theta, mu or h)"
            )),
        })
    }
}

/// Copy of `l` with one parameter replaced, plus the `k` multiplier.
pub fn apply(l: &Loaded, param: SweepParam, value: f64) -> Result<(Loaded, f64), CliError> {
    let mut out = l.clone();
    let f = &mut out.file;
    let mut k_scale = 1.0;
    fn detc(
        f: &mut scenario::ScenarioFile,
        param: SweepParam,
    ) -> Result<&mut scenario::DetcSpec, CliError> {
        f.trigger.detc.as_mut().ok_or_else(|| {
            CliError::Usage(format!(
                "sweeping {} needs a \"detc\" section",
                param.name()
            ))
        })
    }
    match param {
        SweepParam::KScale => k_scale = value,
        SweepParam::Beta => f.trigger.beta = value,
        SweepParam::Sigma => f.trigger.sigma = value,
        SweepParam::Theta => detc(f, param)?.theta = Policy::Value(value),
        SweepParam::Mu => detc(f, param)?.mu = Policy::Value(value),
        SweepParam::H => f.solver.step = value,
    }
    scenario::validate(&out)?;
    if !(k_scale >= 0.0 && k_scale.is_finite()) {
        return Err(CliError::Usage("k-scale values must be nonnegative".into()));
    }
    Ok((out, k_scale))
}

/// Worker count from `ETC_STAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("ETC_STAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n| n > 0)
}

pub fn sweep(
    l: &Loaded,
    param: SweepParam,
    values: &[f64],
    mode: Option<TriggerMode>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("--values needs at least one value".into()));
    }
    let root = output_dir(l, out)?;
    output::create_dir(&root)?;
    let name = scenario_name(l);
    let job = |&value: &f64| -> (f64, PathBuf, Result<RunSummary, CliError>) {
        let dir = root.join(format!("{}={}", param.name(), value));
        let result = apply(l, param, value).and_then(|(lv, k_scale)| {
            let p = prepare::prepare(&lv, Options { mode, k_scale })?;
            run_to_dir(&name, &lv, &p, &dir)
        });
        (value, dir, result)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let results: Vec<_> = pool.install(|| values.par_iter().map(job).collect());

    let m = l.file.network.followers;
    let csv_path = root.join("sweep.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CliError::Io {
        path: csv_path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut header = vec![
        "param".to_string(),
        "value".into(),
        "mode".into(),
        "status".into(),
    ];
    header.extend((1..=m).map(|i| format!("events_{i}")));
    header.extend([
        "total_events".to_string(),
        "final_tilde_x".into(),
        "min_inter_event_time".into(),
        "dir".into(),
    ]);
    let mut text = String::new();
    let _ = writeln!(text, "{}", header.join(","));
    let io_err = |e: csv::Error| CliError::Io {
        path: csv_path.display().to_string(),
        message: e.to_string(),
    };
    w.write_record(&header).map_err(io_err)?;
    let mut code = exit::SUCCESS;
    for (value, dir, result) in &results {
        let mut row = vec![param.name().to_string(), value.to_string()];
        match result {
            Ok(s) => {
                row.push(s.mode.name().to_string());
                row.push(if s.diverged {
                    "diverged".into()
                } else {
                    "ok".into()
                });
                row.extend(s.trigger_counts.iter().map(|c| c.to_string()));
                row.push(s.trigger_counts.iter().sum::<usize>().to_string());
                row.push(s.tilde_x_final.to_string());
                row.push(
                    s.min_inter_event_time
                        .map(|t| t.to_string())
                        .unwrap_or_default(),
                );
                if s.diverged {
                    code = code.max(exit::DIVERGED);
                }
            }
            Err(e) => {
                row.push(
                    mode.map(|m| m.name().to_string())
                        .unwrap_or_else(|| l.file.trigger.mode.clone()),
                );
                row.push(format!("error: {e}"));
                row.extend(std::iter::repeat(String::new()).take(m + 3));
                code = code.max(e.exit_code());
            }
        }
        row.push(dir.display().to_string());
        let _ = writeln!(text, "{}", row.join(","));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Io {
        path: csv_path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(Outcome { text, code })
}
