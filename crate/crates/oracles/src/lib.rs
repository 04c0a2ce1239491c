//! Slow, obviously-correct reference implementations for the callnet test
//! suites: exact big-integer hypergeometric tails, dense-matrix graph
//! metrics and random test networks.

use std::collections::VecDeque;

use callnet::components::{connected_components, ego_counts, ComponentPartition};
use callnet::ingest::PairStats;
use callnet::metrics::{
    clustering_coefficient, degree_sequences, edge_overlap, knn_per_node, node_strengths, strength_nn_per_node,
    weighted_clustering, weighted_knn_per_node, Direction,
};
use callnet::netbuild::{CallNetwork, NetworkKind, WeightKind};
use callnet::UserId;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `C(n, k)` as an exact integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `num / den` correctly rounded to about 64 significant bits, then to f64.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero());
    if num.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries 80 bits.
    let shift = 80i64 + den.bits() as i64 - num.bits() as i64;
    let q = if shift >= 0 { (num << shift as u64) / den } else { num / (den << (-shift) as u64) };
    let mut v = q.to_f64().unwrap();
    let mut s = shift;
    while s > 0 {
        let step = s.min(1000);
        v *= 2f64.powi(-(step as i32));
        s -= step;
    }
    while s < 0 {
        let step = (-s).min(1000);
        v *= 2f64.powi(step as i32);
        s += step;
    }
    v
}

/// Exact `P(X >= x_obs)` for `X ~ Hypergeometric(n, n_ic, n_jr)`.
///
/// Sums the integer terms `C(n_ic, x) C(n - n_ic, n_jr - x)` over the upper
/// tail and divides once by `C(n, n_jr)`. Summation stops once the remaining
/// terms cannot affect the result above relative `2^-250`.
pub fn hypergeom_upper_tail(x_obs: u64, n: u64, n_ic: u64, n_jr: u64) -> f64 {
    assert!(n_ic <= n && n_jr <= n);
    let lo = (n_ic + n_jr).saturating_sub(n);
    let hi = n_ic.min(n_jr);
    if x_obs > hi {
        return 0.0;
    }
    let start = x_obs.max(lo);
    // Terms decrease beyond the mode.
    let mode = ((n_ic + 1) as u128 * (n_jr + 1) as u128 / (n + 2) as u128) as u64;
    let mut term = binomial(n_ic, start) * binomial(n - n_ic, n_jr - start);
    let mut sum = term.clone();
    for x in start..hi {
        // Exact: the next term is an integer.
        term = term * (n_ic - x) * (n_jr - x) / ((x + 1) * (n + x + 1 - n_ic - n_jr));
        sum += &term;
        // The remaining at most 2^64 terms are each below 2^-256 of the sum.
        if x > mode && term.bits() + 320 < sum.bits() {
            break;
        }
    }
    ratio_to_f64(&sum, &binomial(n, n_jr))
}

/// Exact hypergeometric pmf.
pub fn hypergeom_pmf(x: u64, n: u64, n_ic: u64, n_jr: u64) -> f64 {
    if x > n_ic || x > n_jr || n_jr - x > n - n_ic {
        return 0.0;
    }
    ratio_to_f64(&(binomial(n_ic, x) * binomial(n - n_ic, n_jr - x)), &binomial(n, n_jr))
}

/// Random directed pair statistics over `n_nodes` users.
///
/// Half of the pairs fall inside blocks of ten consecutive users so that the
/// networks carry triangles; each pair is reciprocated with probability
/// `reciprocity`.
pub fn random_pair_stats(n_nodes: usize, n_pairs: usize, max_calls: u64, reciprocity: f64, seed: u64) -> PairStats {
    assert!(n_nodes >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = |i: usize| UserId::from(format!("n{i:05}").as_str());
    let mut entries = Vec::new();
    for k in 0..n_pairs {
        let a = rng.random_range(0..n_nodes);
        let b = if k % 2 == 0 {
            let base = a - a % 10;
            (base + rng.random_range(0..10)).min(n_nodes - 1)
        } else {
            rng.random_range(0..n_nodes)
        };
        if a == b {
            continue;
        }
        let mut push = |s: usize, t: usize, rng: &mut ChaCha8Rng| {
            let calls = rng.random_range(1..=max_calls);
            let duration = rng.random_range(calls..=calls * 600);
            entries.push((id(s), id(t), calls, duration));
        };
        push(a, b, &mut rng);
        if rng.random_bool(reciprocity) {
            push(b, a, &mut rng);
        }
    }
    PairStats::from_entries(entries).expect("generated entries are valid")
}

/// Dense weight matrices of a network's undirected view.
#[derive(Clone, Debug)]
pub struct Dense {
    pub ids: Vec<UserId>,
    /// Directed call counts and durations (`a[i][j]` for `i -> j`).
    pub a: Vec<Vec<u64>>,
    pub d: Vec<Vec<u64>>,
    /// Undirected weights, zero where no edge.
    pub w_n: Vec<Vec<u64>>,
    pub w_d: Vec<Vec<u64>>,
}

impl Dense {
    /// Directed network: every ordered pair is an edge.
    pub fn directed(stats: &PairStats) -> Dense {
        Self::build(stats, false)
    }

    /// Mutual network: only pairs with calls in both directions.
    pub fn mutual(stats: &PairStats) -> Dense {
        Self::build(stats, true)
    }

    fn build(stats: &PairStats, mutual: bool) -> Dense {
        let n = stats.nodes().len();
        let mut a = vec![vec![0u64; n]; n];
        let mut d = vec![vec![0u64; n]; n];
        for p in stats.pairs() {
            a[p.src as usize][p.dst as usize] += p.traffic.calls;
            d[p.src as usize][p.dst as usize] += p.traffic.duration;
        }
        if mutual {
            for i in 0..n {
                for j in 0..n {
                    if a[j][i] == 0 {
                        a[i][j] = 0;
                        d[i][j] = 0;
                    }
                }
            }
        }
        let active: Vec<usize> = (0..n).filter(|&i| (0..n).any(|j| a[i][j] > 0 || a[j][i] > 0)).collect();
        let pick = |m: &Vec<Vec<u64>>| -> Vec<Vec<u64>> {
            active.iter().map(|&i| active.iter().map(|&j| m[i][j]).collect()).collect()
        };
        let (a, d) = (pick(&a), pick(&d));
        let m = active.len();
        let sym = |x: &Vec<Vec<u64>>| -> Vec<Vec<u64>> {
            (0..m).map(|i| (0..m).map(|j| x[i][j] + x[j][i]).collect()).collect()
        };
        let (w_n, w_d) = (sym(&a), sym(&d));
        Dense { ids: active.iter().map(|&i| stats.nodes()[i].clone()).collect(), a, d, w_n, w_d }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn nbrs(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.w_n[i][j] > 0).collect()
    }

    pub fn degree(&self) -> Vec<u32> {
        (0..self.len()).map(|i| self.nbrs(i).len() as u32).collect()
    }

    pub fn out_degree(&self) -> Vec<u32> {
        self.a.iter().map(|row| row.iter().filter(|&&v| v > 0).count() as u32).collect()
    }

    pub fn in_degree(&self) -> Vec<u32> {
        (0..self.len()).map(|j| (0..self.len()).filter(|&i| self.a[i][j] > 0).count() as u32).collect()
    }

    fn w(&self, duration: bool) -> &Vec<Vec<u64>> {
        if duration {
            &self.w_d
        } else {
            &self.w_n
        }
    }

    pub fn strength(&self, duration: bool) -> Vec<u64> {
        self.w(duration).iter().map(|row| row.iter().sum()).collect()
    }

    pub fn out_strength(&self, duration: bool) -> Vec<u64> {
        let m = if duration { &self.d } else { &self.a };
        m.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn in_strength(&self, duration: bool) -> Vec<u64> {
        let m = if duration { &self.d } else { &self.a };
        (0..self.len()).map(|j| (0..self.len()).map(|i| m[i][j]).sum()).collect()
    }

    pub fn knn(&self) -> Vec<f64> {
        let k = self.degree();
        (0..self.len())
            .map(|i| {
                let nb = self.nbrs(i);
                nb.iter().map(|&j| k[j] as f64).sum::<f64>() / nb.len() as f64
            })
            .collect()
    }

    pub fn weighted_knn(&self, duration: bool) -> Vec<f64> {
        let k = self.degree();
        let w = self.w(duration);
        (0..self.len())
            .map(|i| {
                let s: u64 = w[i].iter().sum();
                (0..self.len()).map(|j| k[j] as f64 * w[i][j] as f64).sum::<f64>() / s as f64
            })
            .collect()
    }

    pub fn strength_nn(&self, duration: bool) -> Vec<f64> {
        let s = self.strength(duration);
        (0..self.len())
            .map(|i| {
                let nb = self.nbrs(i);
                nb.iter().map(|&j| s[j] as f64).sum::<f64>() / nb.len() as f64
            })
            .collect()
    }

    pub fn triangles(&self) -> Vec<u64> {
        (0..self.len())
            .map(|i| {
                let nb = self.nbrs(i);
                let mut t = 0;
                for (x, &j) in nb.iter().enumerate() {
                    for &k in &nb[x + 1..] {
                        if self.w_n[j][k] > 0 {
                            t += 1;
                        }
                    }
                }
                t
            })
            .collect()
    }

    pub fn clustering(&self) -> Vec<f64> {
        let t = self.triangles();
        self.degree()
            .iter()
            .zip(&t)
            .map(|(&k, &t)| if k < 2 { 0.0 } else { 2.0 * t as f64 / (k as f64 * (k as f64 - 1.0)) })
            .collect()
    }

    pub fn weighted_clustering(&self, duration: bool) -> Vec<f64> {
        let w = self.w(duration);
        let max = w.iter().flatten().copied().max().unwrap_or(0) as f64;
        (0..self.len())
            .map(|i| {
                let nb = self.nbrs(i);
                let k = nb.len() as f64;
                if nb.len() < 2 {
                    return 0.0;
                }
                let mut sum = 0.0;
                for (x, &j) in nb.iter().enumerate() {
                    for &h in &nb[x + 1..] {
                        if w[j][h] > 0 {
                            sum += ((w[i][j] as f64 / max) * (w[j][h] as f64 / max) * (w[h][i] as f64 / max)).cbrt();
                        }
                    }
                }
                2.0 * sum / (k * (k - 1.0))
            })
            .collect()
    }

    /// `(i, j, n_ij, O_ij)` for `i < j`; `None` for undefined overlap.
    pub fn overlap(&self) -> Vec<(usize, usize, usize, Option<f64>)> {
        let k = self.degree();
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.w_n[i][j] == 0 {
                    continue;
                }
                let common = (0..self.len()).filter(|&h| self.w_n[i][h] > 0 && self.w_n[j][h] > 0).count();
                let denom = k[i] as usize + k[j] as usize - 2 - common;
                out.push((i, j, common, (denom > 0).then(|| common as f64 / denom as f64)));
            }
        }
        out
    }

    /// Component label per node by breadth-first search, labels numbered in
    /// order of each component's smallest node.
    pub fn components(&self) -> Vec<u32> {
        let mut label = vec![u32::MAX; self.len()];
        let mut next = 0;
        for s in 0..self.len() {
            if label[s] != u32::MAX {
                continue;
            }
            label[s] = next;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for v in self.nbrs(u) {
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

    /// `N_s(l)`, `l = 0..=max_distance`, by repeated relaxation over all
    /// node pairs.
    pub fn ego_counts(&self, source: usize, max_distance: usize) -> Vec<usize> {
        let mut inside = vec![false; self.len()];
        inside[source] = true;
        let mut counts = vec![1];
        for _ in 0..max_distance {
            let prev = inside.clone();
            for i in 0..self.len() {
                if !prev[i] {
                    inside[i] = (0..self.len()).any(|j| prev[j] && self.w_n[i][j] > 0);
                }
            }
            counts.push(inside.iter().filter(|&&b| b).count());
        }
        counts
    }
}

/// `n` draws from the continuous power law `p(x) ~ x^-exponent`, `x >= 1`,
/// by closed-form inversion.
pub fn sample_powerlaw(exponent: f64, n: usize, seed: u64) -> Vec<f64> {
    assert!(exponent > 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / (exponent - 1.0))).collect()
}

/// `n` draws from the continuous bi-power law with density proportional to
/// `x^-alpha1` on `[1, brk)` and `brk^(alpha2 - alpha1) x^-alpha2` above.
pub fn sample_bipowerlaw(alpha1: f64, alpha2: f64, brk: f64, n: usize, seed: u64) -> Vec<f64> {
    assert!(alpha1 > 1.0 && alpha2 > 1.0 && brk > 1.0);
    let head = (1.0 - brk.powf(1.0 - alpha1)) / (alpha1 - 1.0);
    let tail = brk.powf(1.0 - alpha1) / (alpha2 - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.random::<f64>() * (head + tail);
            if t < head {
                (1.0 - (alpha1 - 1.0) * t).powf(1.0 / (1.0 - alpha1))
            } else {
                let rest = (t - head) * (alpha2 - 1.0) / brk.powf(alpha2 - alpha1);
                (brk.powf(1.0 - alpha2) - rest).powf(1.0 / (1.0 - alpha2))
            }
        })
        .collect()
}

/// `|a - b| <= rel * max(|a|, |b|)`, with NaN equal to NaN.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Compares every metric of `net` against the dense brute force and returns
/// the first mismatch. Integers must match exactly, reals within 1e-12. Ego
/// balls are compared for up to 50 evenly spaced sources.
pub fn compare_network(net: &CallNetwork, dense: &Dense) -> Result<(), String> {
    const REL: f64 = 1e-12;
    fn reals(what: &str, got: &[f64], want: &[f64]) -> Result<(), String> {
        if got.len() != want.len() {
            return Err(format!("{what}: length {} vs {}", got.len(), want.len()));
        }
        match got.iter().zip(want).position(|(g, w)| !close(*g, *w, REL)) {
            Some(i) => Err(format!("{what}[{i}]: {} vs {}", got[i], want[i])),
            None => Ok(()),
        }
    }
    fn exact<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Result<(), String> {
        if got == want {
            Ok(())
        } else {
            Err(format!("{what}: {got:?} vs {want:?}"))
        }
    }

    exact("nodes", net.nodes(), &dense.ids[..])?;
    let g = net.undirected();
    let deg = degree_sequences(net);
    exact("degree", &deg.total, &dense.degree())?;
    if net.kind() == NetworkKind::Directed {
        exact("out-degree", deg.out_degree.as_ref(), Some(&dense.out_degree()))?;
        exact("in-degree", deg.in_degree.as_ref(), Some(&dense.in_degree()))?;
        for (kind, dur) in [(WeightKind::Number, false), (WeightKind::Duration, true)] {
            exact("out-strength", node_strengths(net, kind, Direction::Out), dense.out_strength(dur))?;
            exact("in-strength", node_strengths(net, kind, Direction::In), dense.in_strength(dur))?;
        }
    }
    for (kind, dur) in [(WeightKind::Number, false), (WeightKind::Duration, true)] {
        exact("strength", node_strengths(net, kind, Direction::All), dense.strength(dur))?;
        reals("weighted knn", &weighted_knn_per_node(&g, kind), &dense.weighted_knn(dur))?;
        reals("strength nn", &strength_nn_per_node(&g, kind), &dense.strength_nn(dur))?;
        reals("weighted clustering", &weighted_clustering(net, kind), &dense.weighted_clustering(dur))?;
    }
    reals("knn", &knn_per_node(&g), &dense.knn())?;
    reals("clustering", &clustering_coefficient(net).per_node, &dense.clustering())?;

    let overlap = edge_overlap(net);
    let want = dense.overlap();
    exact("overlap edges", overlap.edges.len(), want.len())?;
    for (e, &(i, j, common, o)) in overlap.edges.iter().zip(&want) {
        exact("overlap pair", (e.i, e.j, e.common), (i, j, common))?;
        match (e.overlap, o) {
            (Some(a), Some(b)) if close(a, b, REL) => {}
            (None, None) => {}
            (a, b) => return Err(format!("overlap of ({i}, {j}): {a:?} vs {b:?}")),
        }
    }

    exact("components", connected_components(net), ComponentPartition::from_labels(&dense.components()))?;
    // The dense ego oracle is cubic per source; 50 evenly spaced sources keep
    // thousand-node networks affordable.
    for source in (0..net.node_count()).step_by(net.node_count().div_ceil(50).max(1)) {
        exact("ego counts", ego_counts(&g, source, 6), dense.ego_counts(source, 6))?;
    }
    Ok(())
}
