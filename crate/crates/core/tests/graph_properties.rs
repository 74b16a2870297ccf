mod common;

use etc_stab::graph::{self, DirectedNetwork};
use etc_stab::linalg;
use etc_stab::Network;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn network_strategy() -> impl Strategy<Value = Network> {
    (1usize..=6).prop_flat_map(|m| {
        let edges = proptest::collection::vec(prop_oneof![3 => Just(0.0), 2 => 0.1f64..4.0], m * m);
        let pins = proptest::collection::vec(prop_oneof![2 => Just(0.0), 1 => 0.1f64..4.0], m);
        (Just(m), edges, pins).prop_map(|(m, e, p)| {
            let adjacency = DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { e[i * m + j] });
            let coupling = DMatrix::from_fn(m, 1, |i, _| p[i]);
            DirectedNetwork::new(adjacency, coupling).unwrap()
        })
    })
}

fn sorted_spectrum(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> = linalg::eigenvalues(m)
        .iter()
        .map(|z| (z.re, z.im.abs()))
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn laplacian_rows_sum_to_zero(net in network_strategy()) {
        let l = graph::laplacian(&net);
        for row in l.row_iter() {
            prop_assert!(row.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn rank_matches_cell_count(net in network_strategy()) {
        prop_assume!(net.is_weakly_connected());
        let check = graph::laplacian_rank_check(&net).unwrap();
        prop_assert!(check.consistent);
        prop_assert!(check.cell_count >= 1);
    }

    #[test]
    fn pinning_iff_grounded_spectrum_positive(net in network_strategy()) {
        let stable = linalg::min_real_part(&graph::assemble_grounded(&net)) > 1e-9;
        prop_assert_eq!(graph::pinning_check(&net), stable);
    }

    #[test]
    fn pinned_networks_get_a_certificate(net in network_strategy()) {
        prop_assume!(graph::pinning_check(&net));
        let gm = graph::grounded_matrix(&net).unwrap();
        prop_assert!(gm.eta > 0.0);
        prop_assert!(gm.psi.iter().all(|&p| p > 0.0 && p <= 1.0));
        prop_assert!((gm.psi_max() - 1.0).abs() < 1e-12);
        let eta = graph::certificate_eta(&gm.matrix, &gm.psi);
        prop_assert!((eta - gm.eta).abs() <= 1e-9 * gm.eta.max(1.0));
    }

    #[test]
    fn verdicts_survive_relabeling(net in network_strategy(), seed in any::<u64>()) {
        let m = net.followers();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut s = seed;
        for i in (1..m).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let relabeled = net.permute_followers(&perm).unwrap();
        prop_assert_eq!(graph::pinning_check(&net), graph::pinning_check(&relabeled));
        prop_assert_eq!(graph::iscc_partition(&net).cell_count(), graph::iscc_partition(&relabeled).cell_count());
        let (a, b) = (sorted_spectrum(&graph::assemble_grounded(&net)), sorted_spectrum(&graph::assemble_grounded(&relabeled)));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.0 - y.0).abs() < 1e-8 && (x.1 - y.1).abs() < 1e-8);
        }
        if net.is_weakly_connected() {
            prop_assert_eq!(graph::laplacian_rank_check(&net).unwrap(), graph::laplacian_rank_check(&relabeled).unwrap());
        }
    }

    #[test]
    fn block_triangular_structure(net in network_strategy()) {
        prop_assume!(net.is_weakly_connected());
        let form = graph::block_triangular_form(&net).unwrap();
        prop_assert!(form.lower_block_triangular);
        prop_assert!(form.cells_have_simple_zero);
        prop_assert!(form.trailing_block_stable);
        prop_assert_eq!(form.block_sizes.iter().sum::<usize>(), net.followers());
    }
}

#[test]
fn cycle_is_one_pinned_cell() {
    let net = common::cycle_network();
    let part = graph::iscc_partition(&net);
    assert_eq!(part.cells, vec![vec![0, 1, 2, 3]]);
    assert!(part.non_iscc.is_empty());
    let check = graph::laplacian_rank_check(&net).unwrap();
    assert_eq!((check.rank, check.cell_count), (3, 1));
    assert!(graph::pinning_check(&net));
}

#[test]
fn unpinned_cell_is_reported() {
    let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (0, 3, 1.0)];
    let net = DirectedNetwork::from_edges(6, 4, &edges, &[(3, 4, 1.0), (3, 5, 1.0)]).unwrap();
    assert!(!graph::pinning_check(&net));
    assert!(graph::grounded_matrix(&net).is_err());
}

#[test]
fn disconnected_graph_is_rejected_by_rank_check() {
    let net = DirectedNetwork::from_edges(3, 2, &[], &[(0, 2, 1.0), (1, 2, 1.0)]).unwrap();
    assert!(graph::laplacian_rank_check(&net).is_err());
}
