//! Time-invariant backbone networks constraining partner selection.
//!
//! Three kinds are supported: the complete graph (kept virtual, no stored
//! adjacency), Erdős–Rényi G(n, p), and Barabási–Albert preferential
//! attachment. Adjacency lists are sorted, which makes the subpopulation
//! filter a contiguous slice because vaccinated individuals occupy the low
//! index range.

use rand::distr::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use thiserror::Error;

use crate::params::{Group, PopulationSplit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    ErdosRenyi { p: f64 },
    BarabasiAlbert { m: usize },
    EdgeList,
}

/// A time-invariant contact-constraint graph.
///
/// `Complete` answers neighbor queries implicitly; the other kinds store
/// sorted, deduplicated, symmetric adjacency lists without self-loops.
#[derive(Debug, Clone)]
pub enum Backbone {
    Complete {
        n: usize,
    },
    Graph {
        kind: GraphKind,
        seed: u64,
        adj: Vec<Vec<u32>>,
    },
}

#[derive(Debug, Error)]
pub enum NetgenError {
    #[error("edge list line {line}: {reason}")]
    BadEdgeList { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A read-only view over the eligible partners of one individual.
///
/// Either a slice of an explicit adjacency list or a contiguous id range
/// with the individual itself skipped.
#[derive(Debug, Clone, Copy)]
pub enum NeighborView<'a> {
    Slice(&'a [u32]),
    Range { lo: u32, hi: u32, skip: Option<u32> },
}

impl<'a> NeighborView<'a> {
    pub fn len(&self) -> usize {
        match *self {
            NeighborView::Slice(s) => s.len(),
            NeighborView::Range { lo, hi, skip } => {
                (hi - lo) as usize - usize::from(skip.is_some())
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `idx`-th eligible partner, `idx < len()`.
    pub fn get(&self, idx: usize) -> u32 {
        match *self {
            NeighborView::Slice(s) => s[idx],
            NeighborView::Range { lo, skip, .. } => {
                let id = lo + idx as u32;
                match skip {
                    Some(s) if id >= s => id + 1,
                    _ => id,
                }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

impl Backbone {
    /// Complete graph on `n >= 2` individuals; adjacency is implicit.
    pub fn complete(n: usize) -> Backbone {
        assert!(n >= 2, "complete backbone needs n >= 2");
        Backbone::Complete { n }
    }

    /// Erdős–Rényi G(n, p): each unordered pair is an edge independently
    /// with probability `p`. Deterministic given `seed`.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Backbone {
        assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
        let mut adj = vec![Vec::new(); n];
        if p > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let total = n as u64 * (n as u64 - 1) / 2;
            if p >= 1.0 {
                for (i, j) in all_pairs(n) {
                    push_edge(&mut adj, i, j);
                }
            } else {
                // Skip-sample linear pair indices with geometric gaps.
                let gap = Geometric::new(p).expect("0 < p < 1");
                let mut cursor: u64 = 0; // one past the last sampled index
                loop {
                    let skip = gap.sample(&mut rng);
                    let Some(idx) = cursor.checked_add(skip) else {
                        break;
                    };
                    if idx >= total {
                        break;
                    }
                    let (i, j) = pair_from_index(n, idx);
                    push_edge(&mut adj, i, j);
                    cursor = idx + 1;
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Backbone::Graph {
            kind: GraphKind::ErdosRenyi { p },
            seed,
            adj,
        }
    }

    /// Barabási–Albert preferential attachment seeded with an `m`-clique;
    /// every arriving node attaches `m` edges to distinct targets chosen
    /// proportionally to degree. Requires `1 <= m < n`.
    pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Backbone {
        assert!(m >= 1 && m < n, "need 1 <= m < n");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adj = vec![Vec::new(); n];
        // Each endpoint appears once per incident edge, so a uniform draw
        // from this list is degree-proportional.
        let mut endpoints: Vec<u32> = Vec::with_capacity(2 * (m * (m - 1) / 2 + (n - m) * m));
        for (i, j) in all_pairs(m) {
            push_edge(&mut adj, i, j);
            endpoints.push(i as u32);
            endpoints.push(j as u32);
        }
        let mut targets = Vec::with_capacity(m);
        for node in m..n {
            targets.clear();
            if endpoints.is_empty() {
                // m = 1: the seed "clique" is a single isolated node.
                targets.push(0u32);
            } else {
                while targets.len() < m {
                    let pick = endpoints[rng.random_range(0..endpoints.len())];
                    if !targets.contains(&pick) {
                        targets.push(pick);
                    }
                }
            }
            for &t in &targets {
                push_edge(&mut adj, node, t as usize);
                endpoints.push(node as u32);
                endpoints.push(t);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Backbone::Graph {
            kind: GraphKind::BarabasiAlbert { m },
            seed,
            adj,
        }
    }

    /// Builds a backbone from "j k" pairs, one per line, 1-based, j < k.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn from_edge_list(n: usize, text: &str) -> Result<Backbone, NetgenError> {
        let mut adj = vec![Vec::new(); n];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| NetgenError::BadEdgeList {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let mut it = line.split_whitespace();
            let j: usize = it
                .next()
                .ok_or_else(|| bad("missing first endpoint"))?
                .parse()
                .map_err(|_| bad("first endpoint is not an integer"))?;
            let k: usize = it
                .next()
                .ok_or_else(|| bad("missing second endpoint"))?
                .parse()
                .map_err(|_| bad("second endpoint is not an integer"))?;
            if it.next().is_some() {
                return Err(bad("trailing tokens"));
            }
            if j < 1 || k < 1 || j > n || k > n {
                return Err(bad(&format!("endpoints must lie in 1..={n}")));
            }
            if j >= k {
                return Err(bad("expected j < k"));
            }
            push_edge(&mut adj, j - 1, k - 1);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Backbone::Graph {
            kind: GraphKind::EdgeList,
            seed: 0,
            adj,
        })
    }

    /// Writes the edge list in the format read by `from_edge_list`.
    pub fn to_edge_list<W: std::io::Write>(&self, w: &mut W) -> Result<(), NetgenError> {
        match self {
            Backbone::Complete { n } => {
                for (i, j) in all_pairs(*n) {
                    writeln!(w, "{} {}", i + 1, j + 1)?;
                }
            }
            Backbone::Graph { adj, .. } => {
                for (i, list) in adj.iter().enumerate() {
                    for &j in list {
                        if (j as usize) > i {
                            writeln!(w, "{} {}", i + 1, j + 1)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        match self {
            Backbone::Complete { n } => *n,
            Backbone::Graph { adj, .. } => adj.len(),
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, Backbone::Complete { .. })
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        match self {
            Backbone::Complete { n } => n * (n - 1) / 2,
            Backbone::Graph { adj, .. } => adj.iter().map(Vec::len).sum::<usize>() / 2,
        }
    }

    pub fn degree(&self, j: usize) -> usize {
        match self {
            Backbone::Complete { n } => n - 1,
            Backbone::Graph { adj, .. } => adj[j].len(),
        }
    }

    /// Eligible partners of `j`: the whole neighbor set, or only those in
    /// the given subpopulation. The view may be empty.
    pub fn neighbors(&self, j: usize, group: Option<Group>, split: &PopulationSplit) -> NeighborView<'_> {
        match self {
            Backbone::Complete { n } => {
                let (lo, hi) = match group {
                    None => (0usize, *n),
                    Some(g) => {
                        let r = split.range(g);
                        (r.start, r.end)
                    }
                };
                NeighborView::Range {
                    lo: lo as u32,
                    hi: hi as u32,
                    skip: (lo..hi).contains(&j).then_some(j as u32),
                }
            }
            Backbone::Graph { adj, .. } => {
                let list = adj[j].as_slice();
                match group {
                    None => NeighborView::Slice(list),
                    Some(g) => {
                        // Sorted ids make each group a contiguous run.
                        let cut = list.partition_point(|&k| (k as usize) < split.n_v);
                        match g {
                            Group::Vaccinated => NeighborView::Slice(&list[..cut]),
                            Group::NonVaccinated => NeighborView::Slice(&list[cut..]),
                        }
                    }
                }
            }
        }
    }

    /// Uniform draw from `neighbors(j, group)`, or `None` if the view is
    /// empty.
    pub fn sample_partner<R: Rng>(
        &self,
        j: usize,
        group: Option<Group>,
        split: &PopulationSplit,
        rng: &mut R,
    ) -> Option<usize> {
        let view = self.neighbors(j, group, split);
        if view.is_empty() {
            return None;
        }
        Some(view.get(rng.random_range(0..view.len())) as usize)
    }
}

fn push_edge(adj: &mut [Vec<u32>], i: usize, j: usize) {
    debug_assert_ne!(i, j);
    adj[i].push(j as u32);
    adj[j].push(i as u32);
}

fn all_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Inverse of the row-major enumeration of pairs (i, j), i < j.
fn pair_from_index(n: usize, idx: u64) -> (usize, usize) {
    let n = n as u64;
    // Find the row i such that the first idx of row i is <= idx.
    // Row i holds (n - 1 - i) pairs; offsets(i) = i*n - i*(i+1)/2.
    // Solve by the triangular-root estimate, then fix up.
    let total = n * (n - 1) / 2;
    debug_assert!(idx < total);
    let rev = total - 1 - idx;
    // rev counts backwards over rows of length 1, 2, ..., n-1.
    let r = ((((8 * rev + 9) as f64).sqrt() - 1.0) / 2.0) as u64;
    let r = fixup_row(rev, r);
    let i = n - 2 - r;
    // Row i starts at linear index i*n - i*(i+1)/2.
    let offset = i * n - i * (i + 1) / 2;
    let j = i + 1 + (idx - offset);
    (i as usize, j as usize)
}

fn fixup_row(rev: u64, mut r: u64) -> u64 {
    // Row r (from the end) covers rev in [r*(r+1)/2, (r+1)*(r+2)/2).
    while r * (r + 1) / 2 > rev {
        r -= 1;
    }
    while (r + 1) * (r + 2) / 2 <= rev {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn split(n_v: usize, n_n: usize) -> PopulationSplit {
        PopulationSplit { n_v, n_n }
    }

    fn check_invariants(b: &Backbone) {
        if let Backbone::Graph { adj, .. } = b {
            for (i, list) in adj.iter().enumerate() {
                assert!(list.windows(2).all(|w| w[0] < w[1]), "sorted, no dups");
                for &j in list {
                    assert_ne!(j as usize, i, "no self-loops");
                    assert!(
                        adj[j as usize].binary_search(&(i as u32)).is_ok(),
                        "symmetry"
                    );
                }
            }
        }
    }

    #[test]
    fn pair_index_roundtrip() {
        for n in [2usize, 3, 5, 17] {
            for (expect, (i, j)) in all_pairs(n).enumerate() {
                assert_eq!(pair_from_index(n, expect as u64), (i, j));
            }
        }
    }

    #[test]
    fn complete_degrees() {
        assert_eq!(Backbone::complete(3).degree(0), 2);
        assert_eq!(Backbone::complete(10_000).degree(9_999), 9_999);
        let b = Backbone::complete(2);
        assert_eq!(b.edge_count(), 1);
        let s = split(1, 1);
        assert_eq!(b.neighbors(0, None, &s).iter().collect::<Vec<_>>(), [1]);
    }

    #[test]
    fn complete_same_group_view_excludes_self() {
        let b = Backbone::complete(10);
        let s = split(4, 6);
        let view = b.neighbors(2, Some(Group::Vaccinated), &s);
        assert_eq!(view.iter().collect::<Vec<_>>(), [0, 1, 3]);
        let view = b.neighbors(7, Some(Group::NonVaccinated), &s);
        assert_eq!(view.iter().collect::<Vec<_>>(), [4, 5, 6, 8, 9]);
        // j outside the filtered group: nothing to skip.
        let view = b.neighbors(2, Some(Group::NonVaccinated), &s);
        assert_eq!(view.iter().collect::<Vec<_>>(), [4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn er_p_zero_is_empty_and_p_one_is_complete() {
        let b = Backbone::erdos_renyi(50, 0.0, 7);
        assert_eq!(b.edge_count(), 0);
        let s = split(25, 25);
        assert!(b.neighbors(3, None, &s).is_empty());

        let b = Backbone::erdos_renyi(50, 1.0, 7);
        assert_eq!(b.edge_count(), 50 * 49 / 2);
        check_invariants(&b);
    }

    #[test]
    fn er_mean_degree_matches_binomial() {
        // Mean degree = 2M/n with M ~ Binomial(C(n,2), p):
        // E = (n-1)p, sd(2M/n) = 2*sqrt(C(n,2) p (1-p))/n.
        let (n, p) = (10_000usize, 0.01);
        let b = Backbone::erdos_renyi(n, p, 2024);
        let mean = 2.0 * b.edge_count() as f64 / n as f64;
        let expect = (n as f64 - 1.0) * p;
        let pairs = (n * (n - 1) / 2) as f64;
        let sd = 2.0 * (pairs * p * (1.0 - p)).sqrt() / n as f64;
        assert!(
            (mean - expect).abs() <= 3.0 * sd,
            "mean degree {mean} vs {expect} +- {}",
            3.0 * sd
        );
        check_invariants(&b);
    }

    #[test]
    fn ba_base_case_is_clique() {
        let b = Backbone::barabasi_albert(6, 5, 1);
        assert_eq!(b.edge_count(), 15);
        for j in 0..6 {
            assert_eq!(b.degree(j), 5);
        }
        check_invariants(&b);
    }

    #[test]
    fn ba_edge_count_formula() {
        let (n, m) = (10_000usize, 50usize);
        let b = Backbone::barabasi_albert(n, m, 99);
        let clique = (m + 1) * m / 2;
        assert_eq!(b.edge_count(), clique + (n - m - 1) * m);
        check_invariants(&b);
    }

    #[test]
    fn ba_degree_tail_decays() {
        let (n, m) = (10_000usize, 50usize);
        let b = Backbone::barabasi_albert(n, m, 5);
        let ccdf = |d: usize| (0..n).filter(|&j| b.degree(j) > d).count();
        let (c1, c2, c3) = (ccdf(4 * m), ccdf(8 * m), ccdf(16 * m));
        assert!(c1 > c2 && c2 > c3, "ccdf not decaying: {c1} {c2} {c3}");
        assert!(c1 > 0);
    }

    #[test]
    fn filtered_view_can_be_empty() {
        // Nodes 1-4 with edges {(1,3),(1,4)} and V_v = {1,2}:
        // the vaccinated neighbors of node 1 form the empty set.
        let b = Backbone::from_edge_list(4, "1 3\n1 4\n").unwrap();
        let s = split(2, 2);
        assert!(b.neighbors(0, Some(Group::Vaccinated), &s).is_empty());
        assert_eq!(
            b.neighbors(0, Some(Group::NonVaccinated), &s)
                .iter()
                .collect::<Vec<_>>(),
            [2, 3]
        );
    }

    #[test]
    fn edge_list_roundtrip_and_errors() {
        let b = Backbone::erdos_renyi(30, 0.2, 3);
        let mut buf = Vec::new();
        b.to_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let b2 = Backbone::from_edge_list(30, &text).unwrap();
        let s = split(15, 15);
        for j in 0..30 {
            assert_eq!(
                b.neighbors(j, None, &s).iter().collect::<Vec<_>>(),
                b2.neighbors(j, None, &s).iter().collect::<Vec<_>>()
            );
        }

        assert!(Backbone::from_edge_list(4, "3 1\n").is_err());
        assert!(Backbone::from_edge_list(4, "0 2\n").is_err());
        assert!(Backbone::from_edge_list(4, "1 9\n").is_err());
        assert!(Backbone::from_edge_list(4, "1 x\n").is_err());
    }

    #[test]
    fn identical_seeds_reproduce_identical_graphs() {
        for mk in [
            |s| Backbone::erdos_renyi(300, 0.05, s),
            |s| Backbone::barabasi_albert(300, 4, s),
        ] {
            let (a, b, c) = (mk(11), mk(11), mk(12));
            let (Backbone::Graph { adj: aa, .. }, Backbone::Graph { adj: ab, .. }) = (&a, &b)
            else {
                unreachable!()
            };
            assert_eq!(aa, ab);
            if let Backbone::Graph { adj: ac, .. } = &c {
                assert_ne!(aa, ac);
            }
        }
    }

    proptest! {
        #[test]
        fn generated_graphs_are_simple_and_symmetric(
            n in 2usize..60,
            seed in 0u64..1_000,
            which in 0usize..2,
        ) {
            let b = match which {
                0 => Backbone::erdos_renyi(n, 0.3, seed),
                _ => {
                    let m = 1 + (seed as usize) % (n - 1).min(4);
                    Backbone::barabasi_albert(n, m, seed)
                }
            };
            check_invariants(&b);
        }
    }
}
