use std::collections::BTreeMap;

use opinionkb::crowd::hits::{Hit, HitInstance};
use opinionkb::crowd::{aggregate_pair, agreement, cost, dominant_opinion, AggregationParams, CostModel, Opinion, WorkerAnswer};
use opinionkb::Fraction;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn hit(id: &str, instances: &[&str]) -> Hit {
    Hit {
        id: id.into(),
        property: "big".into(),
        class: "City".into(),
        instances: instances
            .iter()
            .map(|i| HitInstance {
                id: i.to_string(),
                display_properties: BTreeMap::new(),
            })
            .collect(),
        candidate_properties: vec!["area".into(), "population".into()],
        assignments_required: 5,
    }
}

fn answer(hit: &str, worker: usize, instances: &[&str], properties: &[&str]) -> WorkerAnswer {
    WorkerAnswer {
        hit_id: hit.into(),
        worker_id: format!("w{worker}"),
        selected_instances: instances.iter().map(|s| s.to_string()).collect(),
        selected_properties: properties.iter().map(|s| s.to_string()).collect(),
        submitted_at: 0,
    }
}

/// `y/5 - 1/2 >= t/10` rewritten over integers as `2y >= 5 + t`.
fn integer_oracle(yes: i64, tenths: i64) -> bool {
    2 * yes >= 5 + tenths
}

#[test]
fn five_worker_truth_table() {
    for tenths in [1, 3, 5] {
        let params = AggregationParams {
            theta_a: Fraction::new(tenths, 10),
            ..Default::default()
        };
        for mask in 0u32..32 {
            let answers: Vec<WorkerAnswer> = (0..5)
                .map(|w| answer("h/001", w, if mask & (1 << w) != 0 { &["e"] } else { &[] }, &[]))
                .collect();
            let a = agreement(&answers, "e").unwrap();
            let yes = mask.count_ones() as i64;
            assert_eq!(a, Fraction::new(yes, 5));
            let expected = integer_oracle(yes, tenths);
            assert_eq!(dominant_opinion(a, params.theta_a).as_bool(), expected, "mask {mask:05b} theta {tenths}/10");
            let agg = aggregate_pair(&[hit("h/001", &["e"])], &answers, &params).unwrap();
            assert_eq!(agg.instances[0].opinion.as_bool(), expected);
        }
    }
}

#[test]
fn float_boundary_differs_from_exact() {
    // 3/5 - 1/2 = 1/10 exactly, but not in binary floating point
    assert_eq!(dominant_opinion(Fraction::new(3, 5), Fraction::new(1, 10)), Opinion::Yes);
    assert_eq!(dominant_opinion(0.6f64, 0.1f64), Opinion::No);
}

#[test]
fn property_retention() {
    let params = AggregationParams::default();
    let h = hit("h/001", &["a", "b"]);
    let answers = vec![
        answer("h/001", 0, &["a"], &["population"]),
        answer("h/001", 1, &["a"], &["population", "area"]),
        answer("h/001", 2, &[], &["population"]),
        answer("h/001", 3, &["a", "b"], &[]),
        answer("h/001", 4, &["b"], &[]),
    ];
    let agg = aggregate_pair(&[h], &answers, &params).unwrap();
    assert_eq!(agg.retained_names(), vec!["population".to_string()]);
    assert_eq!(agg.retained[0].agreement, Fraction::new(3, 5));
    let labels = agg.labels();
    assert!(labels["a"]);
    assert!(!labels["b"]);
}

#[test]
fn duplicate_answer_rejected() {
    let h = hit("h/001", &["a"]);
    let answers = vec![answer("h/001", 0, &["a"], &[]), answer("h/001", 0, &[], &[])];
    assert!(aggregate_pair(&[h], &answers, &AggregationParams::default()).is_err());
}

#[test]
fn cost_of_forty_hits() {
    let hits: Vec<Hit> = (0..40).map(|i| hit(&format!("h/{i:03}"), &["a", "b", "c", "d", "e"])).collect();
    assert_eq!(cost(&hits, &CostModel::standard()).unwrap(), Fraction::from_integer(6));
    let float = cost(&hits, &CostModel::standard_f64()).unwrap();
    assert!((float - 6.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn aggregation_ignores_log_order(
        votes in prop::collection::vec((prop::collection::vec(any::<bool>(), 3), prop::collection::vec(any::<bool>(), 2)), 1..8),
        seed in any::<u64>(),
    ) {
        let instances = ["a", "b", "c"];
        let props = ["area", "population"];
        let h = hit("h/001", &instances);
        let answers: Vec<WorkerAnswer> = votes
            .iter()
            .enumerate()
            .map(|(w, (iv, pv))| {
                let sel: Vec<&str> = instances.iter().zip(iv).filter(|(_, &b)| b).map(|(s, _)| *s).collect();
                let ps: Vec<&str> = props.iter().zip(pv).filter(|(_, &b)| b).map(|(s, _)| *s).collect();
                answer("h/001", w, &sel, &ps)
            })
            .collect();
        let mut shuffled = answers.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let params = AggregationParams::default();
        prop_assert_eq!(
            aggregate_pair(std::slice::from_ref(&h), &answers, &params).unwrap(),
            aggregate_pair(std::slice::from_ref(&h), &shuffled, &params).unwrap()
        );
    }
}
