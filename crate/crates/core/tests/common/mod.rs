#![allow(dead_code)]

use etc_stab::control::{self, DesignParams};
use etc_stab::graph::{self, DirectedNetwork};
use etc_stab::sim::{DynamicTrigger, Scenario, StaticTrigger, TriggerMode};
use etc_stab::{Design, Grounded, Network};
use nalgebra::{dmatrix, DMatrix};

pub fn stable_a() -> DMatrix<f64> {
    dmatrix![-1.0, 1.0; 2.0, -3.0]
}

pub fn unstable_a() -> DMatrix<f64> {
    dmatrix![1.0, 1.0; 2.0, -3.0]
}

pub fn input_b() -> DMatrix<f64> {
    dmatrix![-1.0; 0.0]
}

/// Four followers on a directed cycle, leaders pinning followers 1 and 3.
pub fn cycle_network() -> Network {
    let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)];
    DirectedNetwork::from_edges(6, 4, &edges, &[(0, 4, 1.0), (2, 5, 1.0)]).unwrap()
}

pub fn initial_states() -> DMatrix<f64> {
    dmatrix![
        -2.0, 7.0, -4.0, 8.0, 2.0, 2.0;
        4.3, -4.5, 3.0, 2.0, 2.0, 1.0
    ]
}

pub fn design_for(a: &DMatrix<f64>, net: &Network) -> (Grounded, Design) {
    let gm = graph::grounded_matrix(net).unwrap();
    let d = control::design_gain(a, &input_b(), &gm, &DesignParams::default()).unwrap();
    (gm, d)
}

pub fn scenario(
    a: DMatrix<f64>,
    design: &Design,
    mode: TriggerMode,
    horizon: f64,
    step: f64,
) -> Scenario<f64> {
    let k = 0.9 * design.k_cap();
    let bounds = control::trigger_bounds(design, k, 1.5).ok();
    let dynamic = bounds.map(|b| DynamicTrigger {
        mu: vec![1.5; 4],
        xi: vec![b.xi_max; 4],
        theta: vec![0.2; 4],
        phi0: vec![50.0; 4],
        phi_cap: vec![100.0; 4],
    });
    Scenario {
        a,
        b: input_b(),
        network: cycle_network(),
        initial_states: initial_states(),
        mode,
        trigger: StaticTrigger {
            k: vec![k; 4],
            beta: 0.1,
            sigma: 0.5,
        },
        dynamic,
        horizon,
        step,
        decimation: 1,
    }
}
