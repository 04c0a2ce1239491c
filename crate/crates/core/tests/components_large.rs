use std::collections::VecDeque;

use callnet::components::{
    component_size_distribution, connected_components, ego_ball, giant_component, snowball_growth, ComponentPartition,
};
use callnet::fitting::{empirical_pdf_with, fit_powerlaw_tail, Support};
use callnet::ingest::PairStats;
use callnet::netbuild::{build_dcn, build_mcn, CallNetwork};
use callnet::UserId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn id(i: usize) -> UserId {
    UserId::from(format!("v{i:07}").as_str())
}

/// Directed edges `a -> b` between `n` nodes, `m` of them uniformly random.
fn random_graph(n: usize, m: usize, seed: u64) -> CallNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..m).filter_map(|_| {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        (a != b).then(|| (id(a), id(b), 1, 1))
    });
    build_dcn(&PairStats::from_entries(entries.collect::<Vec<_>>()).unwrap())
}

fn bfs_labels(net: &CallNetwork) -> Vec<u32> {
    let n = net.node_count();
    let mut adj = vec![Vec::new(); n];
    for e in net.edges() {
        adj[e.src as usize].push(e.dst as usize);
        adj[e.dst as usize].push(e.src as usize);
    }
    let mut label = vec![u32::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != u32::MAX {
            continue;
        }
        label[s] = next;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if label[v] == u32::MAX {
                    label[v] = next;
                    q.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

#[test]
fn ten_thousand_nodes_match_bfs() {
    for (seed, m) in [(1, 4_000), (2, 6_000), (3, 12_000)] {
        let net = random_graph(10_000, m, seed);
        assert_eq!(connected_components(&net), ComponentPartition::from_labels(&bfs_labels(&net)));
    }
}

#[test]
fn supercritical_giant_matches_theory() {
    // Mean degree c = 2: the giant fraction S solves S = 1 - exp(-c S).
    let (n, c) = (100_000usize, 2.0f64);
    let net = random_graph(n, (c * n as f64 / 2.0) as usize, 17);
    let mut s: f64 = 0.5;
    for _ in 0..200 {
        s = 1.0 - (-c * s).exp();
    }
    let p = connected_components(&net);
    // Isolated vertices never enter the network, so compare against all n.
    let fraction = p.giant_size() as f64 / n as f64;
    assert!((fraction / s - 1.0).abs() < 0.05, "giant fraction {fraction} vs {s}");
    let giant = giant_component(&net, &p).unwrap();
    assert_eq!(giant.node_count(), p.giant_size());
    assert_eq!(connected_components(&giant).component_count(), 1);
}

/// Discrete power law `p(s) ~ s^-(1 + alpha)` on `s >= 2` by inversion of a
/// tabulated CDF.
fn discrete_powerlaw(alpha: f64, count: usize, seed: u64) -> Vec<usize> {
    let max = 100_000;
    let mut cdf = Vec::with_capacity(max);
    let mut acc = 0.0;
    for s in 2..max {
        acc += (s as f64).powf(-(1.0 + alpha));
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            2 + cdf.partition_point(|&c| c < u)
        })
        .collect()
}

#[test]
fn component_size_tail_refit() {
    let alpha = 2.75;
    let sizes = discrete_powerlaw(alpha, 200_000, 4);
    // One chain per component, plus a large one to act as the giant.
    let mut entries = Vec::new();
    let mut next = 0;
    for &s in sizes.iter().chain([&5_000]) {
        for k in 0..s - 1 {
            entries.push((id(next + k), id(next + k + 1), 1, 1));
        }
        next += s;
    }
    let net = build_dcn(&PairStats::from_entries(entries).unwrap());
    let p = connected_components(&net);
    assert_eq!(p.giant_size(), 5_000);
    let hist = component_size_distribution(&p, true);
    assert_eq!(hist.values().sum::<usize>(), sizes.len());
    let samples: Vec<f64> = hist.iter().flat_map(|(&s, &c)| std::iter::repeat_n(s as f64, c)).collect();
    let pdf = empirical_pdf_with(&samples, 30, Support::Integer).unwrap();
    let fit = fit_powerlaw_tail(&pdf, 2.0).unwrap();
    let got = fit.param("alpha").unwrap();
    assert!((got - alpha).abs() <= 0.15, "alpha = {got}\n{fit}");
}

#[test]
fn mutual_network_has_no_singletons() {
    let net = random_graph(2_000, 8_000, 8);
    let stats = PairStats::from_entries(net.edges().iter().flat_map(|e| {
        let (a, b) = (net.nodes()[e.src as usize].clone(), net.nodes()[e.dst as usize].clone());
        [(a.clone(), b.clone(), 1, 1), (b, a, 1, 1)]
    }))
    .unwrap();
    let mcn = build_mcn(&stats);
    let hist = component_size_distribution(&connected_components(&mcn), false);
    assert!(hist.keys().all(|&s| s >= 2));
}

#[test]
fn snowball_is_monotone_and_saturates() {
    let net = random_graph(20_000, 30_000, 21);
    let p = connected_components(&net);
    let snow = snowball_growth(&net, 8, 40, 3).unwrap();
    for curve in &snow.curves {
        assert_eq!(curve[0], 1);
        assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*curve.last().unwrap(), p.giant_size());
    }
    // Geometric growth on the small-world regime.
    for l in 1..=4 {
        assert!(snow.mean[l] >= 1.2 * snow.mean[l - 1], "{:?}", snow.mean);
    }
    assert_eq!(snow, snowball_growth(&net, 8, 40, 3).unwrap());
    let ball = ego_ball(&net, snow.sources[0].as_bytes(), 2).unwrap();
    assert_eq!(ball.network.node_count(), ball.counts[2]);
}
