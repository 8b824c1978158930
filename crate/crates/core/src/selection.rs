//! Choosing k ST pairs with maximum induced edge weight.
//!
//! All ties are broken by ST pair id so every selector except the seeded
//! random one is a pure function of the graph.
//!
//! FGreedy and Div-FGreedy sort once by static weight-degree, O(|V| log |V| + |W|).
//! BGreedy peels through an ordered set, O((|V| + |W|) log |V|).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extraction::STPair;
use crate::resemble::STGraph;

pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Random,
    FGreedy,
    BGreedy,
    DivFGreedy,
    Exact,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Random,
        Algorithm::FGreedy,
        Algorithm::BGreedy,
        Algorithm::DivFGreedy,
        Algorithm::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::FGreedy => "fgreedy",
            Algorithm::BGreedy => "bgreedy",
            Algorithm::DivFGreedy => "div-fgreedy",
            Algorithm::Exact => "exact",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown selection algorithm {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Vertex indices into the graph, in selection order.
    pub indices: Vec<usize>,
    pub chosen: Vec<STPair>,
    pub induced_weight: u64,
    pub type_count: usize,
    pub elapsed: Duration,
    /// Set when fewer than k pairs could be chosen.
    pub short: bool,
}

impl SelectionResult {
    fn finish(g: &STGraph, indices: Vec<usize>, k: usize, started: Instant) -> Self {
        let chosen: Vec<STPair> = indices.iter().map(|&i| g.vertices()[i].clone()).collect();
        let type_count = chosen.iter().map(|p| p.class.as_str()).collect::<BTreeSet<_>>().len();
        SelectionResult {
            induced_weight: g.induced_weight(&indices),
            short: indices.len() < k,
            indices,
            chosen,
            type_count,
            elapsed: started.elapsed(),
        }
    }

    /// Number of chosen pairs per type.
    pub fn type_histogram(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for p in &self.chosen {
            *out.entry(p.class.as_str()).or_default() += 1;
        }
        out
    }
}

fn require_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidArgument("k must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Vertex ids in rank order: `rank[v]` orders vertices lexicographically by id.
fn id_rank(g: &STGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    let ids: Vec<String> = g.vertices().iter().map(STPair::id).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut rank = vec![0; g.len()];
    for (r, v) in order.into_iter().enumerate() {
        rank[v] = r;
    }
    rank
}

/// Vertices by static weight-degree descending, then id.
fn degree_order(g: &STGraph) -> Vec<usize> {
    let rank = id_rank(g);
    let degree: Vec<u64> = (0..g.len()).map(|v| g.weight_degree(v)).collect();
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then(rank[a].cmp(&rank[b])));
    order
}

/// Uniform draw of `min(k, |V|)` distinct vertices.
pub fn select_random(g: &STGraph, k: usize, seed: u64) -> Result<SelectionResult> {
    require_k(k)?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = k.min(g.len());
    let indices = rand::seq::index::sample(&mut rng, g.len(), take).into_vec();
    Ok(SelectionResult::finish(g, indices, k, started))
}

/// The k vertices of highest static weight-degree.
pub fn select_fgreedy(g: &STGraph, k: usize) -> Result<SelectionResult> {
    require_k(k)?;
    let started = Instant::now();
    let mut order = degree_order(g);
    order.truncate(k);
    Ok(SelectionResult::finish(g, order, k, started))
}

/// Adaptive peeling: repeatedly drop the vertex of minimum weight-degree in
/// the surviving subgraph until k remain.
pub fn select_bgreedy(g: &STGraph, k: usize) -> Result<SelectionResult> {
    require_k(k)?;
    if k > g.len() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds |V| = {}", g.len())));
    }
    let started = Instant::now();
    let rank = id_rank(g);
    let mut degree: Vec<u64> = (0..g.len()).map(|v| g.weight_degree(v)).collect();
    let mut alive = vec![true; g.len()];
    let mut queue: BTreeSet<(u64, usize, usize)> = (0..g.len()).map(|v| (degree[v], rank[v], v)).collect();
    for _ in 0..g.len() - k {
        let (_, _, v) = queue.pop_first().expect("more than k vertices remain");
        alive[v] = false;
        for e in g.incident(v) {
            let u = e.other(v);
            if alive[u] {
                queue.remove(&(degree[u], rank[u], u));
                degree[u] -= e.weight();
                queue.insert((degree[u], rank[u], u));
            }
        }
    }
    let mut survivors: Vec<usize> = (0..g.len()).filter(|&v| alive[v]).collect();
    survivors.sort_by_key(|&v| rank[v]);
    Ok(SelectionResult::finish(g, survivors, k, started))
}

/// Per-type cap `max(1, floor(delta * k))`.
pub fn diversity_cap(k: usize, delta: f64) -> usize {
    // tolerate representation error such as 0.29 * 100 = 28.999...
    ((delta * k as f64 + 1e-9).floor() as usize).max(1)
}

/// Forward greedy by static weight-degree, accepting a pair only while its
/// type has fewer than the cap already accepted.
pub fn select_div_fgreedy(g: &STGraph, k: usize, delta: f64) -> Result<SelectionResult> {
    require_k(k)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {delta}")));
    }
    let started = Instant::now();
    let cap = diversity_cap(k, delta);
    let mut per_type: BTreeMap<&str, usize> = BTreeMap::new();
    let mut result = Vec::with_capacity(k);
    for v in degree_order(g) {
        if result.len() == k {
            break;
        }
        let count = per_type.entry(g.vertices()[v].class.as_str()).or_default();
        if *count < cap {
            *count += 1;
            result.push(v);
        }
    }
    Ok(SelectionResult::finish(g, result, k, started))
}

/// Exhaustive optimum over all k-subsets (|V| <= 20); the first optimum in
/// lexicographic subset order (by pair id) wins.
pub fn select_exact(g: &STGraph, k: usize) -> Result<SelectionResult> {
    require_k(k)?;
    if g.len() > EXACT_LIMIT {
        return Err(Error::TooLarge(g.len()));
    }
    let started = Instant::now();
    let n = g.len();
    let k_eff = k.min(n);
    let rank = id_rank(g);
    let mut by_rank = vec![0; n];
    for v in 0..n {
        by_rank[rank[v]] = v;
    }
    let mut weight = vec![vec![0u64; n]; n];
    for e in g.edges() {
        let (a, b) = (rank[e.a], rank[e.b]);
        weight[a][b] = e.weight();
        weight[b][a] = e.weight();
    }

    let mut best: Option<(u64, Vec<usize>)> = None;
    let mut combo: Vec<usize> = (0..k_eff).collect();
    loop {
        let mut total = 0;
        for (x, &i) in combo.iter().enumerate() {
            for &j in &combo[x + 1..] {
                total += weight[i][j];
            }
        }
        if best.as_ref().is_none_or(|(w, _)| total > *w) {
            best = Some((total, combo.clone()));
        }
        // next combination in lexicographic order
        let Some(pos) = (0..k_eff).rev().find(|&i| combo[i] != i + n - k_eff) else { break };
        combo[pos] += 1;
        for i in pos + 1..k_eff {
            combo[i] = combo[i - 1] + 1;
        }
    }
    let indices = best.map(|(_, c)| c.into_iter().map(|r| by_rank[r]).collect()).unwrap_or_default();
    Ok(SelectionResult::finish(g, indices, k, started))
}

pub fn select(g: &STGraph, algorithm: Algorithm, k: usize, delta: f64, seed: u64) -> Result<SelectionResult> {
    match algorithm {
        Algorithm::Random => select_random(g, k, seed),
        Algorithm::FGreedy => select_fgreedy(g, k),
        Algorithm::BGreedy => select_bgreedy(g, k),
        Algorithm::DivFGreedy => select_div_fgreedy(g, k, delta),
        Algorithm::Exact => select_exact(g, k),
    }
}

/// Columns `algo k weight types ms`, as TSV and as an aligned table.
pub fn selection_report(results: &[(String, usize, SelectionResult)]) -> (String, String) {
    let mut tsv = String::from("algo\tk\tweight\ttypes\tms\n");
    let mut table = format!("{:<12} {:>6} {:>12} {:>6} {:>10}\n", "algo", "k", "weight", "types", "ms");
    for (name, k, r) in results {
        let ms = r.elapsed.as_secs_f64() * 1e3;
        let _ = writeln!(tsv, "{name}\t{k}\t{}\t{}\t{ms:.3}", r.induced_weight, r.type_count);
        let _ = writeln!(table, "{name:<12} {k:>6} {:>12} {:>6} {ms:>10.3}", r.induced_weight, r.type_count);
    }
    (tsv, table)
}
