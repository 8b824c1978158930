//! Knowledge inference over the ST graph and KB enrichment.
//!
//! A fact `(e, ST1, l)` crosses every edge `ST1 - ST2` whose shared entities
//! contain `e`, keeping `l` on positive edges and negating it on negative
//! ones. Contradictions are never emitted: a derived fact that disagrees with
//! a seed, or with another derived fact on the same cell, is withheld and
//! listed in the report.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::STPair;
use crate::kb::SUBJECTIVE_NAMESPACE;
use crate::resemble::STGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactSource {
    Crowd,
    Classifier,
    Inference,
}

impl FactSource {
    /// Higher outranks lower when seeds disagree.
    pub fn rank(self) -> u8 {
        match self {
            FactSource::Crowd => 2,
            FactSource::Classifier => 1,
            FactSource::Inference => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FactRecord", try_from = "FactRecord")]
pub struct SubjectiveFact {
    pub entity: String,
    pub pair: STPair,
    pub label: bool,
    pub source: FactSource,
    pub confidence: f64,
    /// Id of the premise for inferred facts.
    pub provenance: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct FactRecord {
    entity: String,
    property: String,
    #[serde(rename = "type")]
    class: String,
    label: bool,
    source: FactSource,
    confidence: f64,
    #[serde(default)]
    provenance: Option<String>,
}

impl From<SubjectiveFact> for FactRecord {
    fn from(f: SubjectiveFact) -> Self {
        FactRecord {
            entity: f.entity,
            property: f.pair.property,
            class: f.pair.class,
            label: f.label,
            source: f.source,
            confidence: f.confidence,
            provenance: f.provenance,
        }
    }
}

impl TryFrom<FactRecord> for SubjectiveFact {
    type Error = String;

    fn try_from(r: FactRecord) -> std::result::Result<Self, String> {
        if !(0.0..=1.0).contains(&r.confidence) {
            return Err(format!("confidence {} outside [0, 1]", r.confidence));
        }
        Ok(SubjectiveFact {
            entity: r.entity,
            pair: STPair::new(r.property, r.class),
            label: r.label,
            source: r.source,
            confidence: r.confidence,
            provenance: r.provenance,
        })
    }
}

impl SubjectiveFact {
    pub fn new(entity: impl Into<String>, pair: STPair, label: bool, source: FactSource, confidence: f64) -> Self {
        SubjectiveFact {
            entity: entity.into(),
            pair,
            label,
            source,
            confidence,
            provenance: None,
        }
    }

    /// `property@type:entity:label`
    pub fn id(&self) -> String {
        format!("{}:{}:{}", self.pair.id(), self.entity, self.label)
    }

    fn cell(&self) -> (String, STPair) {
        (self.entity.clone(), self.pair.clone())
    }

    /// The `subj:` triple line appended to an enriched KB.
    pub fn triple_line(&self) -> String {
        format!(
            "{}\t{SUBJECTIVE_NAMESPACE}{}\t{}\tliteral",
            self.entity,
            self.pair.id(),
            self.label
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub entity: String,
    pub pair: String,
    /// Ids of the facts that disagreed, including any that survived.
    pub facts: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub seed_count: usize,
    pub inferred_count: usize,
    pub conflict_count: usize,
    pub conflicts: Vec<Conflict>,
}

type Cell = (String, STPair);

/// Keeps one seed per cell. Disagreeing seeds of different rank resolve to
/// the higher rank; equal top ranks suppress the cell.
fn resolve_seeds(seeds: &[SubjectiveFact], conflicts: &mut BTreeMap<Cell, BTreeSet<String>>) -> (BTreeMap<Cell, SubjectiveFact>, BTreeSet<Cell>) {
    let mut by_cell: BTreeMap<Cell, Vec<&SubjectiveFact>> = BTreeMap::new();
    for s in seeds {
        by_cell.entry(s.cell()).or_default().push(s);
    }
    let mut kept = BTreeMap::new();
    let mut frozen = BTreeSet::new();
    for (cell, facts) in by_cell {
        let best = |label: bool| {
            facts
                .iter()
                .filter(|f| f.label == label)
                .max_by(|a, b| {
                    a.source
                        .rank()
                        .cmp(&b.source.rank())
                        .then(a.confidence.total_cmp(&b.confidence))
                })
                .copied()
        };
        let winner = match (best(true), best(false)) {
            (Some(f), None) | (None, Some(f)) => Some(f),
            (Some(t), Some(n)) => {
                conflicts
                    .entry(cell.clone())
                    .or_default()
                    .extend([t.id(), n.id()]);
                match t.source.rank().cmp(&n.source.rank()) {
                    std::cmp::Ordering::Greater => Some(t),
                    std::cmp::Ordering::Less => Some(n),
                    std::cmp::Ordering::Equal => None,
                }
            }
            (None, None) => None,
        };
        match winner {
            Some(f) => {
                kept.insert(cell, f.clone());
            }
            None => {
                frozen.insert(cell);
            }
        }
    }
    (kept, frozen)
}

/// Facts derivable in one step from `premises`.
fn derive<'a>(premises: impl Iterator<Item = &'a SubjectiveFact>, graph: &STGraph) -> Vec<SubjectiveFact> {
    let mut out = Vec::new();
    for p in premises {
        let Some(v) = graph.vertex_index(&p.pair) else {
            continue;
        };
        for edge in graph.incident(v) {
            if !edge.shared_entities.contains(&p.entity) {
                continue;
            }
            out.push(SubjectiveFact {
                entity: p.entity.clone(),
                pair: graph.vertices()[edge.other(v)].clone(),
                label: edge.polarity.apply(p.label),
                source: FactSource::Inference,
                confidence: p.confidence,
                provenance: Some(p.id()),
            });
        }
    }
    out
}

/// Merges candidates into `facts`. Returns the cells that gained a fact.
fn merge(
    candidates: Vec<SubjectiveFact>,
    facts: &mut BTreeMap<Cell, SubjectiveFact>,
    frozen: &mut BTreeSet<Cell>,
    conflicts: &mut BTreeMap<Cell, BTreeSet<String>>,
) -> Vec<Cell> {
    let mut by_cell: BTreeMap<Cell, Vec<SubjectiveFact>> = BTreeMap::new();
    for c in candidates {
        by_cell.entry(c.cell()).or_default().push(c);
    }
    let mut added = Vec::new();
    for (cell, group) in by_cell {
        if frozen.contains(&cell) {
            conflicts.entry(cell).or_default().extend(group.iter().map(|f| f.id()));
            continue;
        }
        if let Some(existing) = facts.get(&cell) {
            let clashing: Vec<String> = group.iter().filter(|f| f.label != existing.label).map(|f| f.id()).collect();
            if !clashing.is_empty() {
                let entry = conflicts.entry(cell.clone()).or_default();
                entry.insert(existing.id());
                entry.extend(clashing);
                frozen.insert(cell);
            }
            continue;
        }
        let labels: BTreeSet<bool> = group.iter().map(|f| f.label).collect();
        if labels.len() > 1 {
            conflicts.entry(cell.clone()).or_default().extend(group.iter().map(|f| f.id()));
            frozen.insert(cell);
            continue;
        }
        let best = group
            .into_iter()
            .reduce(|a, b| {
                if b.confidence > a.confidence || (b.confidence == a.confidence && b.provenance < a.provenance) {
                    b
                } else {
                    a
                }
            })
            .expect("non-empty group");
        facts.insert(cell.clone(), best);
        added.push(cell);
    }
    added
}

fn finish(
    seed_count: usize,
    facts: BTreeMap<Cell, SubjectiveFact>,
    passthrough: Vec<SubjectiveFact>,
    conflicts: BTreeMap<Cell, BTreeSet<String>>,
) -> (Vec<SubjectiveFact>, InferenceReport) {
    let mut out: Vec<SubjectiveFact> = facts.into_values().chain(passthrough).collect();
    out.sort_by(|a, b| {
        (a.source == FactSource::Inference)
            .cmp(&(b.source == FactSource::Inference))
            .then_with(|| a.entity.cmp(&b.entity))
            .then_with(|| a.pair.cmp(&b.pair))
    });
    let inferred_count = out.iter().filter(|f| f.source == FactSource::Inference).count();
    let conflicts: Vec<Conflict> = conflicts
        .into_iter()
        .map(|((entity, pair), ids)| Conflict {
            entity,
            pair: pair.id(),
            facts: ids.into_iter().collect(),
        })
        .collect();
    let report = InferenceReport {
        seed_count,
        inferred_count,
        conflict_count: conflicts.len(),
        conflicts,
    };
    (out, report)
}

fn split_seeds(seeds: &[SubjectiveFact], graph: &STGraph) -> (Vec<SubjectiveFact>, Vec<SubjectiveFact>) {
    let (inside, outside): (Vec<_>, Vec<_>) = seeds.iter().cloned().partition(|s| graph.vertex_index(&s.pair).is_some());
    if !outside.is_empty() {
        log::warn!("{} seed facts name ST pairs outside the graph; passed through", outside.len());
    }
    (inside, outside)
}

/// One application of the rule: seeds are premises, derived facts are not
/// re-used. Output holds the surviving seeds followed by derived facts.
pub fn infer(seeds: &[SubjectiveFact], graph: &STGraph) -> (Vec<SubjectiveFact>, InferenceReport) {
    let (inside, outside) = split_seeds(seeds, graph);
    let mut conflicts = BTreeMap::new();
    let (mut facts, mut frozen) = resolve_seeds(&inside, &mut conflicts);
    let candidates = derive(facts.values(), graph);
    merge(candidates, &mut facts, &mut frozen, &mut conflicts);
    finish(seeds.len(), facts, outside, conflicts)
}

/// Applies the rule until no new fact appears. A conflicting cell is frozen:
/// whatever it held stays, and nothing further is derived into it.
pub fn infer_fixpoint(seeds: &[SubjectiveFact], graph: &STGraph) -> (Vec<SubjectiveFact>, InferenceReport) {
    let (inside, outside) = split_seeds(seeds, graph);
    let mut conflicts = BTreeMap::new();
    let (mut facts, mut frozen) = resolve_seeds(&inside, &mut conflicts);
    let mut frontier: Vec<Cell> = facts.keys().cloned().collect();
    while !frontier.is_empty() {
        let candidates = derive(frontier.iter().map(|c| &facts[c]), graph);
        frontier = merge(candidates, &mut facts, &mut frozen, &mut conflicts);
    }
    finish(seeds.len(), facts, outside, conflicts)
}

pub fn write_facts(facts: &[SubjectiveFact], out: impl Write) -> Result<()> {
    let mut out = BufWriter::new(out);
    for f in facts {
        serde_json::to_writer(&mut out, f)?;
        out.write_all(b"\n").map_err(|e| Error::io("<facts>", e))?;
    }
    out.flush().map_err(|e| Error::io("<facts>", e))
}

pub fn read_facts(path: impl AsRef<Path>) -> Result<Vec<SubjectiveFact>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut facts = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        facts.push(serde_json::from_str(&line).map_err(|e| Error::parse(path.display().to_string(), n + 1, e.to_string()))?);
    }
    Ok(facts)
}

/// Sidecar path for an enriched KB: `enriched.tsv` -> `enriched.facts.jsonl`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("facts.jsonl")
}

/// Copies the KB file verbatim, appends one `subj:` triple per fact and
/// writes the JSON-lines sidecar.
pub fn enrich(kb_path: impl AsRef<Path>, facts: &[SubjectiveFact], out: impl AsRef<Path>) -> Result<PathBuf> {
    let (kb_path, out) = (kb_path.as_ref(), out.as_ref());
    let mut bytes = std::fs::read(kb_path).map_err(|e| Error::io(kb_path, e))?;
    if !facts.is_empty() && !bytes.is_empty() && !bytes.ends_with(b"\n") {
        bytes.push(b'\n');
    }
    for f in facts {
        bytes.extend_from_slice(f.triple_line().as_bytes());
        bytes.push(b'\n');
    }
    std::fs::write(out, &bytes).map_err(|e| Error::io(out, e))?;
    let sidecar = sidecar_path(out);
    let file = File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    write_facts(facts, file)?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::KnowledgeBase;
    use crate::resemble::{build_graph, tests::example1, Polarity};

    fn pair(id: &str) -> STPair {
        STPair::parse_id(id).unwrap()
    }

    fn seed(e: &str, p: &str, l: bool) -> SubjectiveFact {
        SubjectiveFact::new(e, pair(p), l, FactSource::Crowd, 0.8)
    }

    fn derived(out: &[SubjectiveFact]) -> BTreeSet<String> {
        out.iter().filter(|f| f.source == FactSource::Inference).map(|f| f.id()).collect()
    }

    fn chain(polarities: &[Polarity]) -> STGraph {
        let names = ["a@T", "b@T", "c@T", "d@T"];
        let verts: Vec<STPair> = names[..=polarities.len()].iter().map(|n| pair(n)).collect();
        let shared: BTreeSet<String> = ["e".to_string()].into();
        let edges = polarities
            .iter()
            .enumerate()
            .map(|(i, p)| (verts[i].clone(), verts[i + 1].clone(), *p, shared.clone()))
            .collect();
        STGraph::new(verts, edges).unwrap()
    }

    #[test]
    fn example_one_derivations() {
        let (kb, lex, pairs) = example1();
        let g = build_graph(&pairs, &kb, &lex, Default::default()).unwrap();
        let seeds = [seed("BarackObama", "young@President", true), seed("NewYork", "big@City", true)];
        let (out, report) = infer(&seeds, &g);
        let expected: BTreeSet<String> =
            ["old@Politician:BarackObama:false", "large@City:NewYork:true"].iter().map(|s| s.to_string()).collect();
        assert_eq!(derived(&out), expected);
        assert_eq!((report.seed_count, report.inferred_count, report.conflict_count), (2, 2, 0));
        let obama = out.iter().find(|f| f.pair.property == "old").unwrap();
        assert_eq!(obama.provenance.as_deref(), Some("young@President:BarackObama:true"));
        assert_eq!(obama.confidence, 0.8);
    }

    #[test]
    fn isolated_seed_and_flip() {
        let g = chain(&[Polarity::Negative]);
        let (out, _) = infer(&[seed("x", "a@T", true)], &g);
        assert!(derived(&out).is_empty());
        let (yes, _) = infer(&[seed("e", "a@T", true)], &g);
        let (no, _) = infer(&[seed("e", "a@T", false)], &g);
        assert_eq!(derived(&yes), ["b@T:e:false".to_string()].into());
        assert_eq!(derived(&no), ["b@T:e:true".to_string()].into());
    }

    #[test]
    fn conflicts_are_withheld() {
        // b gets yes from a and no from c
        let g = chain(&[Polarity::Positive, Polarity::Negative]);
        let (out, report) = infer(&[seed("e", "a@T", true), seed("e", "c@T", true)], &g);
        assert!(derived(&out).is_empty());
        assert_eq!(report.conflict_count, 1);
        assert_eq!(report.conflicts[0].pair, "b@T");

        // derived disagreeing with a seed: seed stays
        let (out, report) = infer(&[seed("e", "a@T", true), seed("e", "b@T", false)], &g);
        assert_eq!(report.conflict_count, 2);
        assert!(out.iter().any(|f| f.id() == "b@T:e:false" && f.source == FactSource::Crowd));
        assert!(!out.iter().any(|f| f.pair.property == "b" && f.label));
    }

    #[test]
    fn seed_precedence() {
        let g = chain(&[Polarity::Positive]);
        let mut classifier = seed("e", "a@T", false);
        classifier.source = FactSource::Classifier;
        let (out, report) = infer(&[seed("e", "a@T", true), classifier.clone()], &g);
        assert_eq!(report.conflict_count, 1);
        assert_eq!(derived(&out), ["b@T:e:true".to_string()].into());

        let mut crowd_no = seed("e", "a@T", false);
        crowd_no.confidence = 0.6;
        let (out, report) = infer(&[seed("e", "a@T", true), crowd_no], &g);
        assert!(out.is_empty());
        assert_eq!(report.conflicts[0].facts.len(), 2);
    }

    #[test]
    fn fixpoint_traces() {
        let g = chain(&[Polarity::Positive, Polarity::Positive]);
        let (out, _) = infer_fixpoint(&[seed("e", "a@T", true)], &g);
        assert_eq!(derived(&out), ["b@T:e:true".to_string(), "c@T:e:true".to_string()].into());
        let (one, _) = infer(&[seed("e", "a@T", true)], &g);
        assert_eq!(derived(&one), ["b@T:e:true".to_string()].into());

        let g = chain(&[Polarity::Negative]);
        let (out, report) = infer_fixpoint(&[seed("e", "a@T", true)], &g);
        assert_eq!(out.len(), 2);
        assert_eq!(report.conflict_count, 0);

        let empty = STGraph::new(vec![pair("a@T")], vec![]).unwrap();
        let seeds = [seed("e", "a@T", true)];
        assert_eq!(infer_fixpoint(&seeds, &empty).0, seeds.to_vec());
    }

    #[test]
    fn enrich_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let kb_path = dir.path().join("kb.tsv");
        let text = "NewYork\ttype\tCity\tentity\nNewYork\tpopulation\t8000000\tliteral\n";
        std::fs::write(&kb_path, text).unwrap();

        let out = dir.path().join("empty.tsv");
        let side = enrich(&kb_path, &[], &out).unwrap();
        assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
        assert_eq!(std::fs::read_to_string(&side).unwrap(), "");

        let mut f = seed("NewYork", "large@City", true);
        f.source = FactSource::Inference;
        f.provenance = Some("big@City:NewYork:true".into());
        let out = dir.path().join("enriched.tsv");
        let side = enrich(&kb_path, &[f.clone()], &out).unwrap();
        assert_eq!(side, dir.path().join("enriched.facts.jsonl"));
        let written = std::fs::read_to_string(&out).unwrap();
        assert!(written.ends_with("NewYork\tsubj:large@City\ttrue\tliteral\n"));
        let kb = KnowledgeBase::load(&out).unwrap();
        assert!(kb.properties_of_type("City").unwrap().iter().all(|(p, _)| !p.starts_with("subj:")));
        assert_eq!(read_facts(&side).unwrap(), vec![f]);
        let line = std::fs::read_to_string(&side).unwrap();
        assert!(line.contains("\"type\":\"City\"") && line.contains("\"source\":\"inference\""));
    }
}
