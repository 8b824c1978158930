use std::collections::{BTreeMap, BTreeSet};

use opinionkb::inference::{infer, infer_fixpoint, FactSource, SubjectiveFact};
use opinionkb::resemble::{Polarity, STGraph};
use opinionkb::STPair;
use proptest::prelude::*;

const ENTITIES: usize = 6;

type Key = (String, String, bool, bool);

fn vertex(i: usize) -> STPair {
    STPair::new(format!("p{i}"), format!("T{}", i % 2))
}

fn build(n: usize, raw: &[(usize, usize, bool, Vec<bool>)]) -> STGraph {
    let mut seen = BTreeSet::new();
    let edges = raw
        .iter()
        .filter(|(a, b, ..)| a != b && seen.insert(((*a).min(*b), (*a).max(*b))))
        .map(|(a, b, positive, members)| {
            let shared = members.iter().enumerate().filter(|(_, &m)| m).map(|(e, _)| format!("e{e}")).collect();
            let pol = if *positive { Polarity::Positive } else { Polarity::Negative };
            (vertex(*a), vertex(*b), pol, shared)
        })
        .collect();
    STGraph::new((0..n).map(vertex).collect(), edges).unwrap()
}

/// One application of the propagation rule by exhaustive scan, with the same
/// withholding policy: a disagreeing seed cell is kept only for a strictly
/// higher source rank, and a derived cell survives only if no seed occupies
/// it and every derivation agrees.
fn oracle(seeds: &[SubjectiveFact], g: &STGraph) -> BTreeSet<Key> {
    let mut cells: BTreeMap<(String, String), Vec<&SubjectiveFact>> = BTreeMap::new();
    for s in seeds {
        cells.entry((s.entity.clone(), s.pair.id())).or_default().push(s);
    }
    let mut kept: BTreeMap<(String, String), bool> = BTreeMap::new();
    let mut occupied: BTreeSet<(String, String)> = BTreeSet::new();
    for (cell, facts) in &cells {
        occupied.insert(cell.clone());
        let top = |label: bool| facts.iter().filter(|f| f.label == label).map(|f| f.source.rank()).max();
        match (top(true), top(false)) {
            (Some(_), None) => drop(kept.insert(cell.clone(), true)),
            (None, Some(_)) => drop(kept.insert(cell.clone(), false)),
            (Some(t), Some(n)) if t != n => drop(kept.insert(cell.clone(), t > n)),
            _ => {}
        }
    }
    let mut derived: BTreeMap<(String, String), BTreeSet<bool>> = BTreeMap::new();
    for ((entity, pair), &label) in &kept {
        for e in g.edges() {
            let (a, b) = (g.vertices()[e.a].id(), g.vertices()[e.b].id());
            let other = if &a == pair {
                b
            } else if &b == pair {
                a
            } else {
                continue;
            };
            if e.shared_entities.contains(entity) {
                let l = match e.polarity {
                    Polarity::Positive => label,
                    Polarity::Negative => !label,
                };
                derived.entry((entity.clone(), other)).or_default().insert(l);
            }
        }
    }
    let mut out: BTreeSet<Key> = kept.iter().map(|((e, p), &l)| (e.clone(), p.clone(), l, false)).collect();
    for ((e, p), labels) in derived {
        if labels.len() == 1 && !occupied.contains(&(e.clone(), p.clone())) {
            out.insert((e, p, *labels.iter().next().unwrap(), true));
        }
    }
    out
}

fn keys(facts: &[SubjectiveFact]) -> BTreeSet<Key> {
    facts
        .iter()
        .map(|f| (f.entity.clone(), f.pair.id(), f.label, f.source == FactSource::Inference))
        .collect()
}

fn seed_strategy(n: usize) -> impl Strategy<Value = Vec<SubjectiveFact>> {
    let source = prop_oneof![Just(FactSource::Crowd), Just(FactSource::Classifier)];
    prop::collection::vec((0..ENTITIES, 0..n, any::<bool>(), source), 0..100).prop_map(|raw| {
        raw.into_iter()
            .map(|(e, v, l, s)| SubjectiveFact::new(format!("e{e}"), vertex(v), l, s, 0.9))
            .collect()
    })
}

fn instance() -> impl Strategy<Value = (STGraph, Vec<SubjectiveFact>)> {
    (2usize..8).prop_flat_map(|n| {
        let edge = (0..n, 0..n, any::<bool>(), prop::collection::vec(any::<bool>(), ENTITIES));
        (prop::collection::vec(edge, 0..12).prop_map(move |raw| build(n, &raw)), seed_strategy(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn one_step_matches_oracle((g, seeds) in instance()) {
        let (facts, report) = infer(&seeds, &g);
        prop_assert_eq!(keys(&facts), oracle(&seeds, &g));
        prop_assert_eq!(report.inferred_count, facts.iter().filter(|f| f.source == FactSource::Inference).count());
        let cells: BTreeSet<_> = facts.iter().map(|f| (f.entity.clone(), f.pair.id())).collect();
        prop_assert_eq!(cells.len(), facts.len());
    }

    #[test]
    fn fixpoint_is_closed((g, seeds) in instance()) {
        let (facts, _) = infer_fixpoint(&seeds, &g);
        let once = keys(&infer(&seeds, &g).0);
        let all = keys(&facts);
        // every surviving one-step seed is still present
        for k in once.iter().filter(|k| !k.3) {
            prop_assert!(all.contains(k));
        }
        let cells: BTreeSet<_> = facts.iter().map(|f| (f.entity.clone(), f.pair.id())).collect();
        prop_assert_eq!(cells.len(), facts.len());
        for f in facts.iter().filter(|f| f.source == FactSource::Inference) {
            prop_assert!(f.provenance.is_some());
        }
    }
}

#[test]
fn chain_needs_fixpoint() {
    let g = build(3, &[(0, 1, true, vec![true; ENTITIES]), (1, 2, false, vec![true; ENTITIES])]);
    let seeds = vec![SubjectiveFact::new("e0", vertex(0), true, FactSource::Crowd, 1.0)];
    assert_eq!(infer(&seeds, &g).0.len(), 2);
    let (facts, _) = infer_fixpoint(&seeds, &g);
    let last = facts.iter().find(|f| f.pair == vertex(2)).unwrap();
    assert!(!last.label);
    assert_eq!(last.provenance.as_deref(), Some("p1@T1:e0:true"));
}
