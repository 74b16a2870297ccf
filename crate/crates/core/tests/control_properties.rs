mod common;

use approx::assert_relative_eq;
use etc_stab::control::{self, DesignParams, RiccatiWeight};
use etc_stab::graph;
use etc_stab::linalg;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(n: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-3.0f64..3.0, n * cols)
        .prop_map(move |v| DMatrix::from_vec(n, cols, v))
}

fn plant() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (1usize..=4)
        .prop_flat_map(|n| (matrix(n, n), matrix(n, n)))
        .prop_map(|(a, b)| {
            // full-rank input keeps every pair stabilizable
            let n = a.nrows();
            (a, b + DMatrix::identity(n, n) * 4.0)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn riccati_meets_margin((a, b) in plant(), varsigma in 0.2f64..3.0, delta in 0.01f64..1.0) {
        let sol = control::solve_riccati(&a, &b, varsigma, delta).unwrap();
        prop_assert!((&sol.r - sol.r.transpose()).norm() < 1e-9 * sol.r.norm().max(1.0));
        prop_assert!(linalg::sym_min_eigenvalue(&sol.r) > 0.0);
        let q = control::riccati_inequality_matrix(&a, &b, &sol.r, varsigma);
        prop_assert!(linalg::sym_max_eigenvalue(&q) <= -delta / 2.0);
        prop_assert!((q + DMatrix::identity(a.nrows(), a.nrows()) * delta).norm() < 1e-6 * sol.r.norm().max(1.0));
    }

    #[test]
    fn larger_delta_gives_larger_r((a, b) in plant(), varsigma in 0.2f64..3.0, d1 in 0.0f64..0.5, extra in 0.05f64..1.0) {
        let small = control::solve_riccati(&a, &b, varsigma, d1).unwrap();
        let large = control::solve_riccati(&a, &b, varsigma, d1 + extra).unwrap();
        let diff = linalg::symmetrize(&(large.r - small.r));
        prop_assert!(linalg::sym_min_eigenvalue(&diff) > -1e-8);
    }
}

#[test]
fn cycle_design_is_certified() {
    let net = common::cycle_network();
    let (gm, d) = common::design_for(&common::stable_a(), &net);
    assert_relative_eq!(d.varsigma_r, gm.eta);
    assert!(d.riccati_certificate <= -d.delta / 2.0);
    assert!(d.closed_loop_abscissa < 0.0);
    assert!(d.k_cap() > 0.0 && d.k_cap() <= d.k_max);
    assert_relative_eq!(
        d.k,
        control::feedback_gain(&d.r, &common::input_b()),
        epsilon = 1e-14
    );
}

#[test]
fn unstable_plant_still_gets_a_gain() {
    let net = common::cycle_network();
    let (_, d) = common::design_for(&common::unstable_a(), &net);
    assert!(d.closed_loop_abscissa < 0.0);
}

#[test]
fn trigger_bounds_tighten_with_k() {
    let net = common::cycle_network();
    let (_, d) = common::design_for(&common::stable_a(), &net);
    let cap = d.k_cap();
    let lo = control::trigger_bounds(&d, 0.2 * cap, 1.5).unwrap();
    let hi = control::trigger_bounds(&d, 0.9 * cap, 1.5).unwrap();
    assert!(hi.xi_max > lo.xi_max);
    assert!(hi.vartheta < lo.vartheta);
    assert!(hi.k_w <= lo.k_w);
    assert!(control::trigger_bounds(&d, d.k_max, 1.5).is_err());
}

#[test]
fn fixed_weight_overrides_eta() {
    let net = common::cycle_network();
    let gm = graph::grounded_matrix(&net).unwrap();
    let params = DesignParams {
        varsigma_r: RiccatiWeight::Fixed(2.0),
        ..DesignParams::default()
    };
    let d = control::design_gain(&common::stable_a(), &common::input_b(), &gm, &params).unwrap();
    assert_eq!(d.varsigma_r, 2.0);
}

#[test]
fn unstabilizable_pair_is_rejected() {
    let a = nalgebra::dmatrix![1.0, 0.0; 0.0, 2.0];
    let b = nalgebra::dmatrix![1.0; 0.0];
    assert!(control::check_stabilizable(&a, &b).is_err());
    assert!(control::solve_riccati(&a, &b, 1.0, 0.05).is_err());
}

#[test]
fn leader_combination_rows_sum_to_one() {
    let net = common::cycle_network();
    let gm = graph::grounded_matrix(&net).unwrap();
    let chi = control::chi_coefficients(&gm, &net).unwrap();
    assert_eq!(chi.shape(), (4, 2));
    for row in chi.row_iter() {
        assert_relative_eq!(row.sum(), 1.0, epsilon = 1e-12);
        assert!(row.iter().all(|&c| c >= -1e-12));
    }
}
