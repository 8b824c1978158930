#![allow(dead_code)]

use std::collections::BTreeSet;

use opinionkb::resemble::{Polarity, STGraph};
use opinionkb::STPair;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn entities(prefix: &str, n: u64) -> BTreeSet<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Graph over `n` pairs `p{i}@T{i % types}`; every listed edge gets its
/// weight as that many shared entities.
pub fn graph(n: usize, types: usize, edges: &[(usize, usize, u64, bool)]) -> STGraph {
    let vertices: Vec<STPair> = (0..n).map(|i| STPair::new(format!("p{i:03}"), format!("T{}", i % types))).collect();
    let edges = edges
        .iter()
        .map(|&(a, b, w, positive)| {
            let polarity = if positive { Polarity::Positive } else { Polarity::Negative };
            (vertices[a].clone(), vertices[b].clone(), polarity, entities(&format!("e{a}_{b}_"), w))
        })
        .collect();
    STGraph::new(vertices, edges).unwrap()
}

/// Erdos-Renyi graph with edge probability `p` and weights in 1..=max_weight.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, types: usize, p: f64, max_weight: u64) -> STGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b, rng.random_range(1..=max_weight), rng.random_bool(0.5)));
            }
        }
    }
    graph(n, types, &edges)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
