use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::applying::features::{distance, featurize, FeatureVector, FeaturizeOptions};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::scalar::Scalar;

pub const MAX_CLUSTERS: usize = 20;
const MAX_ITERATIONS: usize = 50;
// clusters larger than this evaluate a seeded subset of medoid candidates
const CANDIDATE_LIMIT: usize = 400;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub entities: Vec<String>,
    /// The budget exceeded the population.
    pub shortfall: bool,
    pub clusters: usize,
}

/// k-medoids clusters; each entry is (medoid, members) as row indices.
pub fn kmedoids<F: Scalar>(points: &[FeatureVector<F>], c: usize, seed: u64) -> Vec<(usize, Vec<usize>)> {
    let n = points.len();
    let c = c.min(n);
    if c == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // farthest-first from row 0, which is the smallest entity id
    let mut medoids = vec![0];
    let mut nearest: Vec<F> = points.iter().map(|p| distance(p, &points[0])).collect();
    while medoids.len() < c {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if medoids.contains(&i) {
                continue;
            }
            if best.is_none_or(|b| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let m = best.expect("fewer medoids than points");
        medoids.push(m);
        for i in 0..n {
            let d = distance(&points[i], &points[m]);
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }

    let mut clusters = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        clusters = assign(points, &medoids);
        let mut changed = false;
        for (j, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let cost = |cand: usize| members.iter().fold(F::zero(), |acc, &i| acc + distance(&points[cand], &points[i]));
            let candidates: Vec<usize> = if members.len() > CANDIDATE_LIMIT {
                let mut picked: Vec<usize> = sample(&mut rng, members.len(), CANDIDATE_LIMIT)
                    .into_iter()
                    .map(|i| members[i])
                    .collect();
                picked.sort_unstable();
                picked
            } else {
                members.clone()
            };
            let mut best = medoids[j];
            let mut best_cost = cost(best);
            for cand in candidates {
                let c = cost(cand);
                if c < best_cost {
                    best = cand;
                    best_cost = c;
                }
            }
            if best != medoids[j] {
                medoids[j] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    medoids.into_iter().zip(clusters).collect()
}

fn assign<F: Scalar>(points: &[FeatureVector<F>], medoids: &[usize]) -> Vec<Vec<usize>> {
    let mut clusters = vec![Vec::new(); medoids.len()];
    for (i, p) in points.iter().enumerate() {
        // a medoid always belongs to its own cluster
        let j = medoids.iter().position(|&m| m == i).unwrap_or_else(|| {
            let mut best = 0;
            let mut best_d = distance(p, &points[medoids[0]]);
            for (j, &m) in medoids.iter().enumerate().skip(1) {
                let d = distance(p, &points[m]);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        });
        clusters[j].push(i);
    }
    clusters
}

/// Largest-remainder split of `budget` over cluster sizes, at least one per
/// cluster and never more than the cluster holds. Requires
/// `sizes.len() <= budget <= sum(sizes)`.
pub fn allocate(sizes: &[usize], budget: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| (budget * s / n).clamp(1, s)).collect();
    let mut total: usize = alloc.iter().sum();
    while total < budget {
        // remainder of cluster j, scaled by n: budget * s_j - alloc_j * n
        let j = (0..sizes.len())
            .filter(|&j| alloc[j] < sizes[j])
            .max_by(|&a, &b| {
                let ra = (budget * sizes[a]) as i128 - (alloc[a] * n) as i128;
                let rb = (budget * sizes[b]) as i128 - (alloc[b] * n) as i128;
                ra.cmp(&rb).then(b.cmp(&a))
            })
            .expect("budget within population");
        alloc[j] += 1;
        total += 1;
    }
    while total > budget {
        let j = (0..sizes.len())
            .filter(|&j| alloc[j] > 1)
            .min_by(|&a, &b| {
                let ra = (budget * sizes[a]) as i128 - (alloc[a] * n) as i128;
                let rb = (budget * sizes[b]) as i128 - (alloc[b] * n) as i128;
                ra.cmp(&rb).then(b.cmp(&a))
            })
            .expect("budget covers one per cluster");
        alloc[j] -= 1;
        total -= 1;
    }
    alloc
}

/// Picks `budget` instances of `class` spread over its k-medoids clusters.
/// Features are every property observed on the type.
pub fn representative_sample(kb: &KnowledgeBase, class: &str, budget: usize, seed: u64) -> Result<Sample> {
    if budget == 0 {
        return Err(Error::InvalidArgument("sample budget must be at least 1".into()));
    }
    let members = kb.instances_of(class, true)?;
    if members.is_empty() {
        return Err(Error::InsufficientData(format!("type {class} has no instances")));
    }
    if budget >= members.len() {
        if budget > members.len() {
            log::warn!("budget {budget} exceeds the {} instances of {class}", members.len());
        }
        return Ok(Sample {
            entities: members.iter().cloned().collect(),
            shortfall: budget > members.len(),
            clusters: 1,
        });
    }
    let props: Vec<String> = kb.properties_of_type(class)?.into_iter().map(|(p, _)| p).collect();
    let points: Vec<FeatureVector<f64>> = if props.is_empty() {
        members
            .iter()
            .map(|e| FeatureVector {
                entity: e.clone(),
                values: Vec::new(),
            })
            .collect()
    } else {
        featurize(kb, class, &props, FeaturizeOptions::default())?.vectors
    };
    sample_points(&points, budget, seed)
}

/// Sampling over precomputed vectors, which must be sorted by entity id.
pub fn sample_points<F: Scalar>(points: &[FeatureVector<F>], budget: usize, seed: u64) -> Result<Sample> {
    if budget == 0 {
        return Err(Error::InvalidArgument("sample budget must be at least 1".into()));
    }
    if budget >= points.len() {
        return Ok(Sample {
            entities: points.iter().map(|p| p.entity.clone()).collect(),
            shortfall: budget > points.len(),
            clusters: 1,
        });
    }
    let mut clusters = kmedoids(points, MAX_CLUSTERS.min(budget), seed);
    clusters.retain(|(_, m)| !m.is_empty());
    clusters.sort_by(|a, b| points[a.0].entity.cmp(&points[b.0].entity));
    let sizes: Vec<usize> = clusters.iter().map(|(_, m)| m.len()).collect();
    let alloc = allocate(&sizes, budget);
    let mut entities = Vec::with_capacity(budget);
    for ((medoid, members), take) in clusters.iter().zip(alloc) {
        let mut ranked: Vec<(F, &str)> = members
            .iter()
            .map(|&i| (distance(&points[i], &points[*medoid]), points[i].entity.as_str()))
            .collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(b.1)));
        entities.extend(ranked.into_iter().take(take).map(|(_, e)| e.to_string()));
    }
    Ok(Sample {
        entities,
        shortfall: false,
        clusters: clusters.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applying::features::FeatureValue;

    fn blobs() -> Vec<FeatureVector<f64>> {
        let mut v: Vec<FeatureVector<f64>> = (0..200)
            .map(|i| {
                let base = if i < 100 { 0.0 } else { 0.9 };
                FeatureVector {
                    entity: format!("e{i:03}"),
                    values: vec![
                        Some(FeatureValue::Numeric(base + (i % 10) as f64 * 0.01)),
                        Some(FeatureValue::Numeric(base + (i / 10 % 10) as f64 * 0.01)),
                    ],
                }
            })
            .collect();
        v.sort_by(|a, b| a.entity.cmp(&b.entity));
        v
    }

    #[test]
    fn two_blobs_split_evenly() {
        let points = blobs();
        let s = sample_points(&points, 10, 1).unwrap();
        assert_eq!(s.entities.len(), 10);
        let left = s.entities.iter().filter(|e| e[1..].parse::<usize>().unwrap() < 100).count();
        assert_eq!(left, 5);
    }

    #[test]
    fn allocation_is_proportional() {
        assert_eq!(allocate(&[100, 100], 10), vec![5, 5]);
        assert_eq!(allocate(&[90, 9, 1], 10), vec![8, 1, 1]);
        assert_eq!(allocate(&[3, 3, 3], 3), vec![1, 1, 1]);
        assert_eq!(allocate(&[2, 50], 10), vec![1, 9]);
        let a = allocate(&[7, 13, 29, 51], 37);
        assert_eq!(a.iter().sum::<usize>(), 37);
    }

    #[test]
    fn whole_population_and_errors() {
        let text: String = (0..5).map(|i| format!("c{i}\ttype\tCity\tentity\nc{i}\tpop\t{i}\tliteral\n")).collect();
        let kb = KnowledgeBase::parse(&text, "t").unwrap();
        let s = representative_sample(&kb, "City", 9, 0).unwrap();
        assert!(s.shortfall);
        assert_eq!(s.entities.len(), 5);
        let s = representative_sample(&kb, "City", 5, 0).unwrap();
        assert!(!s.shortfall);
        let s = representative_sample(&kb, "City", 2, 0).unwrap();
        assert_eq!(s.entities.len(), 2);
        assert!(representative_sample(&kb, "City", 0, 0).is_err());
    }

    #[test]
    fn deterministic_and_distinct() {
        let points = blobs();
        let a = sample_points(&points, 37, 4).unwrap();
        assert_eq!(a, sample_points(&points, 37, 4).unwrap());
        let mut uniq = a.entities.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 37);
    }
}
