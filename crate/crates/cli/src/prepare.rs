//! Turns a validated scenario file into a certified design and a runnable
//! simulation problem.

use etc_stab::control::{self, DesignParams, RiccatiWeight, YoungWeight};
use etc_stab::graph::{self, DirectedNetwork};
use etc_stab::sim::{DynamicTrigger, StaticTrigger, TriggerMode};
use etc_stab::{Bounds, Design, Error, Grounded, Network, Scenario};
use nalgebra::DMatrix;

use crate::error::CliError;
use crate::locate::Seg;
use crate::scenario::{Loaded, Policy, ScenarioFile, Weight};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub mode: Option<TriggerMode>,
    /// Multiplies every resolved `k_i`.
    pub k_scale: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            mode: None,
            k_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub network: Network,
    pub grounded: Grounded,
    pub design: Design,
    pub scenario: Scenario,
    /// Dynamic-trigger constants at the resolved `k`; present whenever
    /// they are positive, in every mode.
    pub bounds: Option<Bounds>,
}

fn rows(m: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j])
}

fn key(k: &str) -> Seg {
    Seg::Key(k.to_string())
}

pub fn network(file: &ScenarioFile) -> Result<Network, etc_stab::Error> {
    let net = &file.network;
    let edges: Vec<_> = net
        .follower_edges
        .iter()
        .map(|&(f, t, w)| (f - 1, t - 1, w))
        .collect();
    let couplings: Vec<_> = net
        .leader_couplings
        .iter()
        .map(|&(f, l, w)| (f - 1, l - 1, w))
        .collect();
    DirectedNetwork::from_edges(net.agents, net.followers, &edges, &couplings)
}

fn param_path(name: &str) -> Vec<Seg> {
    match name {
        "k" => vec![key("trigger"), key("k")],
        "beta" | "sigma" => vec![key("trigger"), key(name)],
        "mu" | "xi" | "theta" | "phi0" | "Theta" => vec![key("trigger"), key("detc"), key(name)],
        "v1" | "delta" | "step" | "horizon" | "varsigma_r" => vec![key("solver"), key(name)],
        "decimation" => vec![key("output"), key("decimation")],
        _ => vec![],
    }
}

fn design_error(l: &Loaded, e: Error) -> CliError {
    match e {
        Error::InvalidParameter { name, reason } => l.error(&param_path(&name), reason),
        Error::Dimension(msg) => l.error(&[key("dynamics")], msg),
        other => CliError::Solver(other.to_string()),
    }
}

/// Pinning verdict plus, when it holds, the grounded matrix.
pub fn graph_stage(l: &Loaded) -> Result<(Network, Grounded), CliError> {
    let net = network(&l.file).map_err(|e| l.error(&[key("network")], e.to_string()))?;
    if !graph::pinning_check(&net) {
        let part = graph::iscc_partition(&net);
        let unpinned: Vec<String> = part
            .cells
            .iter()
            .filter(|cell| cell.iter().all(|&i| net.pinning_weight(i) == 0.0))
            .map(|cell| format!("{:?}", cell.iter().map(|i| i + 1).collect::<Vec<_>>()))
            .collect();
        return Err(l.error(
            &[key("network"), key("leader_couplings")],
            format!(
                "pinning condition fails: iSCC cells without a leader coupling: {}",
                unpinned.join(", ")
            ),
        ));
    }
    let gm = graph::grounded_matrix(&net).map_err(|e| CliError::Solver(e.to_string()))?;
    Ok((net, gm))
}

pub fn design_params(file: &ScenarioFile) -> DesignParams<f64> {
    DesignParams {
        varsigma_r: match file.solver.varsigma_r {
            Weight::Value(v) => RiccatiWeight::Fixed(v),
            Weight::Rule(_) => RiccatiWeight::Eta,
        },
        delta: file.solver.delta,
        v1: match file.solver.v1 {
            Weight::Value(v) => YoungWeight::Fixed(v),
            Weight::Rule(_) => YoungWeight::HalfMargin,
        },
    }
}

fn expand(p: &Policy, m: usize) -> Vec<f64> {
    p.expand(m).expect("not a rule").expect("validated length")
}

pub fn prepare(l: &Loaded, opts: Options) -> Result<Prepared, CliError> {
    let file = &l.file;
    let (net, gm) = graph_stage(l)?;
    let a = rows(&file.dynamics.a);
    let b = rows(&file.dynamics.b);
    let design =
        control::design_gain(&a, &b, &gm, &design_params(file)).map_err(|e| design_error(l, e))?;

    let m = net.followers();
    let k = match file.trigger.k.auto_fraction() {
        Some(frac) => vec![frac.expect("validated") * design.k_cap(); m],
        None => expand(&file.trigger.k, m),
    };
    let k: Vec<f64> = k.into_iter().map(|v| v * opts.k_scale).collect();
    let k_gain = k.iter().copied().fold(0.0, f64::max);

    let mode = match opts.mode {
        Some(mode) => mode,
        None => file.trigger.mode.parse().expect("validated"),
    };
    let mu_min = file
        .trigger
        .detc
        .as_ref()
        .map(|d| expand(&d.mu, m).into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::INFINITY);
    let bounds = if k_gain < design.k_max {
        control::trigger_bounds(&design, k_gain, mu_min).ok()
    } else {
        None
    };

    let dynamic = match &file.trigger.detc {
        Some(d) => {
            let xi = match d.xi.auto_fraction() {
                Some(frac) => {
                    let Some(bd) = bounds else {
                        return Err(l.error(
                            &[key("trigger"), key("detc"), key("xi")],
                            format!(
                                "xi_max is undefined at k = {k_gain}; the dynamic trigger needs k below {}",
                                design.k_max_dynamic.min(design.k_max)
                            ),
                        ));
                    };
                    vec![frac.expect("validated") * bd.xi_max; m]
                }
                None => expand(&d.xi, m),
            };
            Some(DynamicTrigger {
                mu: expand(&d.mu, m),
                xi,
                theta: expand(&d.theta, m),
                phi0: expand(&d.phi0, m),
                phi_cap: expand(&d.phi_cap, m),
            })
        }
        None => None,
    };
    if mode == TriggerMode::Detc && dynamic.is_none() {
        return Err(l.error(&[key("trigger")], "mode detc needs a \"detc\" section"));
    }

    let scenario = Scenario {
        a,
        b,
        network: net.clone(),
        initial_states: rows(&file.initial_states).transpose(),
        mode,
        trigger: StaticTrigger {
            k,
            beta: file.trigger.beta,
            sigma: file.trigger.sigma,
        },
        dynamic,
        horizon: file.solver.horizon,
        step: file.solver.step,
        decimation: file.output.decimation,
    };
    scenario
        .validate_against(&design)
        .map_err(|e| design_error(l, e))?;
    Ok(Prepared {
        network: net,
        grounded: gm,
        design,
        scenario,
        bounds,
    })
}
