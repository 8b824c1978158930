use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::STPair;
use crate::kb::KnowledgeBase;
use crate::scalar::{fraction_as_f64, Fraction};

pub const INSTANCES_PER_HIT: usize = 5;
pub const DEFAULT_ASSIGNMENTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitInstance {
    pub id: String,
    /// The entity's values for the HIT's candidate properties.
    pub display_properties: BTreeMap<String, String>,
}

/// A multiple-choice task over up to five instances of one ST pair. Serializes
/// as the HIT document served to workers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub property: String,
    #[serde(rename = "type")]
    pub class: String,
    pub instances: Vec<HitInstance>,
    pub candidate_properties: Vec<String>,
    pub assignments_required: usize,
}

impl Hit {
    pub fn st_pair(&self) -> STPair {
        STPair::new(&self.property, &self.class)
    }

    pub fn instance_ids(&self) -> impl Iterator<Item = &str> {
        self.instances.iter().map(|i| i.id.as_str())
    }

    pub fn has_instance(&self, id: &str) -> bool {
        self.instances.iter().any(|i| i.id == id)
    }

    pub fn question(&self) -> String {
        format!("Which of the following are {} {}?", self.property, self.class)
    }
}

/// Chunks an ordered sample into HITs of five; ids are `slug/seq`.
pub fn generate_hits(
    st_pair: &STPair,
    sample: &[String],
    kb: &KnowledgeBase,
    assignments_required: usize,
) -> Result<Vec<Hit>> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument(format!("empty sample for {st_pair}")));
    }
    if assignments_required == 0 {
        return Err(Error::InvalidArgument("assignments_required must be at least 1".into()));
    }
    let members = kb.instances_of(&st_pair.class, true)?;
    if let Some(outsider) = sample.iter().find(|e| !members.contains(*e)) {
        return Err(Error::InvalidArgument(format!(
            "{outsider:?} is not an instance of {}",
            st_pair.class
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = sample.iter().find(|e| !seen.insert(e.as_str())) {
        return Err(Error::InvalidArgument(format!("{dup:?} appears twice in the sample")));
    }
    let candidate_properties: Vec<String> =
        kb.properties_of_type(&st_pair.class)?.into_iter().map(|(p, _)| p).collect();
    if candidate_properties.is_empty() {
        return Err(Error::InvalidArgument(format!("type {} has no objective properties", st_pair.class)));
    }
    let slug = st_pair.slug();
    Ok(sample
        .chunks(INSTANCES_PER_HIT)
        .enumerate()
        .map(|(seq, chunk)| Hit {
            id: format!("{slug}/{:03}", seq + 1),
            property: st_pair.property.clone(),
            class: st_pair.class.clone(),
            instances: chunk
                .iter()
                .map(|e| HitInstance {
                    id: e.clone(),
                    display_properties: candidate_properties
                        .iter()
                        .filter_map(|p| {
                            let vals = kb.values(e, p);
                            (!vals.is_empty()).then(|| {
                                let text: Vec<&str> = vals.iter().map(|v| v.text.as_str()).collect();
                                (p.clone(), text.join(", "))
                            })
                        })
                        .collect(),
                })
                .collect(),
            candidate_properties: candidate_properties.clone(),
            assignments_required,
        })
        .collect())
}

/// Per-assignment price, generic over the currency representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel<M> {
    pub reward_per_assignment: M,
    pub platform_fee_per_assignment: M,
}

impl CostModel<Fraction> {
    /// $0.02 reward plus $0.01 platform fee.
    pub fn standard() -> Self {
        CostModel {
            reward_per_assignment: Fraction::new(2, 100),
            platform_fee_per_assignment: Fraction::new(1, 100),
        }
    }
}

impl Default for CostModel<Fraction> {
    fn default() -> Self {
        Self::standard()
    }
}

impl CostModel<f64> {
    pub fn standard_f64() -> Self {
        CostModel {
            reward_per_assignment: 0.02,
            platform_fee_per_assignment: 0.01,
        }
    }
}

/// Sum over HITs of `assignments_required * (reward + fee)`.
pub fn cost<M>(hits: &[Hit], model: &CostModel<M>) -> Result<M>
where
    M: Num + Copy + PartialOrd + FromPrimitive,
{
    if model.reward_per_assignment < M::zero() || model.platform_fee_per_assignment < M::zero() {
        return Err(Error::InvalidArgument("prices must be non-negative".into()));
    }
    let per = model.reward_per_assignment + model.platform_fee_per_assignment;
    hits.iter().try_fold(M::zero(), |acc, h| {
        let n = M::from_usize(h.assignments_required)
            .ok_or_else(|| Error::InvalidArgument("assignment count out of range".into()))?;
        Ok(acc + n * per)
    })
}

/// Cost model as it appears in config documents (decimal floats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelConfig {
    #[serde(with = "fraction_as_f64")]
    pub reward: Fraction,
    #[serde(with = "fraction_as_f64")]
    pub fee: Fraction,
}

pub fn write_hits(hits: &[Hit], mut out: impl Write) -> Result<()> {
    for h in hits {
        serde_json::to_writer(&mut out, h)?;
        out.write_all(b"\n").map_err(|e| Error::io("<hits>", e))?;
    }
    Ok(())
}

pub fn read_hits(path: impl AsRef<Path>) -> Result<Vec<Hit>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::parse(path.display().to_string(), idx + 1, e.to_string()))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn city_kb(n: usize) -> KnowledgeBase {
        let mut text = String::new();
        for i in 0..n {
            text.push_str(&format!("city{i:03}\ttype\tCity\tentity\ncity{i:03}\tareaLand\t{}\tliteral\n", i * 10));
            if i % 2 == 0 {
                text.push_str(&format!("city{i:03}\tcountry\tLand{}\tentity\n", i % 3));
            }
        }
        text.push_str("rex\ttype\tAnimal\tentity\n");
        KnowledgeBase::parse(&text, "t").unwrap()
    }

    fn sample(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("city{i:03}")).collect()
    }

    #[test]
    fn chunking() {
        let kb = city_kb(200);
        let pair = STPair::new("big", "City");
        let hits = generate_hits(&pair, &sample(200), &kb, 5).unwrap();
        assert_eq!(hits.len(), 40);
        assert!(hits.iter().all(|h| h.instances.len() == 5));
        assert_eq!(hits[0].id, "big-city/001");
        assert_eq!(hits[39].id, "big-city/040");

        let hits = generate_hits(&pair, &sample(7), &kb, 5).unwrap();
        assert_eq!(hits.iter().map(|h| h.instances.len()).collect::<Vec<_>>(), vec![5, 2]);
        assert_eq!(generate_hits(&pair, &sample(5), &kb, 5).unwrap().len(), 1);
    }

    #[test]
    fn hit_content() {
        let kb = city_kb(10);
        let hits = generate_hits(&STPair::new("big", "City"), &sample(5), &kb, 5).unwrap();
        let h = &hits[0];
        assert_eq!(h.candidate_properties, vec!["areaLand", "country"]);
        assert_eq!(h.instances[0].display_properties["areaLand"], "0");
        assert!(!h.instances[1].display_properties.contains_key("country"));
        assert_eq!(h.question(), "Which of the following are big City?");
        let doc = serde_json::to_value(h).unwrap();
        assert_eq!(doc["type"], "City");
        assert_eq!(doc["instances"][0]["id"], "city000");
    }

    #[test]
    fn rejects_bad_samples() {
        let kb = city_kb(10);
        let pair = STPair::new("big", "City");
        assert!(generate_hits(&pair, &[], &kb, 5).is_err());
        assert!(generate_hits(&pair, &["rex".to_string()], &kb, 5).is_err());
        assert!(generate_hits(&pair, &["city001".into(), "city001".into()], &kb, 5).is_err());
        assert!(generate_hits(&STPair::new("cute", "Animal"), &["rex".to_string()], &kb, 5).is_err());
    }

    #[test]
    fn cost_is_exact() {
        let kb = city_kb(200);
        let hits = generate_hits(&STPair::new("big", "City"), &sample(200), &kb, 5).unwrap();
        assert_eq!(cost(&hits, &CostModel::standard()).unwrap(), Fraction::from_integer(6));
        assert_eq!(cost(&[], &CostModel::standard()).unwrap(), Fraction::from_integer(0));
        assert_eq!(cost(&hits[..1], &CostModel::standard()).unwrap(), Fraction::new(15, 100));
        let approx = cost(&hits, &CostModel::standard_f64()).unwrap();
        assert!((approx - 6.0).abs() < 1e-9);
        let negative = CostModel {
            reward_per_assignment: Fraction::new(-1, 100),
            platform_fee_per_assignment: Fraction::new(1, 100),
        };
        assert!(cost(&hits, &negative).is_err());
    }
}
