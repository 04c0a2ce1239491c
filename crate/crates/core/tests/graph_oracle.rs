use callnet::ingest::PairStats;
use callnet::metrics::{
    clustering_coefficient, degree_sequences, knn_per_node, node_strengths, weighted_clustering, weighted_knn_per_node,
    Direction,
};
use callnet::netbuild::{build_dcn, build_mcn, CallNetwork, NetworkKind, WeightKind};
use callnet_oracles::{close, compare_network, random_pair_stats, Dense};

const REL: f64 = 1e-12;

fn assert_reals(what: &str, got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len(), "{what}: length");
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!(close(*g, *w, REL), "{what}[{i}]: {g} vs {w}");
    }
}

fn check_network(net: &CallNetwork, dense: &Dense) {
    if let Err(e) = compare_network(net, dense) {
        panic!("{:?} network: {e}", net.kind());
    }
}

#[test]
fn random_networks_match_brute_force() {
    for seed in 0..6 {
        let stats = random_pair_stats(300, 700, 12, 0.5, seed);
        check_network(&build_dcn(&stats), &Dense::directed(&stats));
        check_network(&build_mcn(&stats), &Dense::mutual(&stats));
    }
}

#[test]
fn handshake_identities() {
    let stats = random_pair_stats(500, 2_000, 30, 0.4, 99);
    for net in [build_dcn(&stats), build_mcn(&stats)] {
        let g = net.undirected();
        let k = degree_sequences(&net).total;
        assert_eq!(k.iter().map(|&v| v as usize).sum::<usize>(), 2 * g.edge_count());
        let s = node_strengths(&net, WeightKind::Number, Direction::All);
        assert_eq!(s.iter().sum::<u64>(), 2 * net.total_calls());
        let out: u64 = node_strengths(&net, WeightKind::Duration, Direction::Out).iter().sum();
        let inn: u64 = node_strengths(&net, WeightKind::Duration, Direction::In).iter().sum();
        assert_eq!(out, inn);
        if net.kind() == NetworkKind::Mutual {
            // Every mutual edge carries at least one call each way.
            assert!(s.iter().zip(&k).all(|(&s, &k)| s >= 2 * k as u64));
        } else {
            let d = degree_sequences(&net);
            let (i, o) = (d.in_degree.unwrap(), d.out_degree.unwrap());
            for n in 0..k.len() {
                assert!(i[n] + o[n] >= k[n] && k[n] >= i[n].max(o[n]));
            }
        }
    }
}

#[test]
fn uniform_weight_collapse() {
    let base = random_pair_stats(200, 600, 1, 1.0, 5);
    let stats = PairStats::from_entries(
        base.pairs()
            .iter()
            .map(|p| (base.nodes()[p.src as usize].clone(), base.nodes()[p.dst as usize].clone(), 1, 60)),
    )
    .unwrap();
    let mcn = build_mcn(&stats);
    let g = mcn.undirected();
    assert_reals("knn", &weighted_knn_per_node(&g, WeightKind::Duration), &knn_per_node(&g));
    assert_reals("clustering", &weighted_clustering(&mcn, WeightKind::Number), &clustering_coefficient(&mcn).per_node);
}
