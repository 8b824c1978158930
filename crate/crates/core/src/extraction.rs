//! Candidate (adjective, noun) extraction from a POS-tagged corpus and
//! mapping of the nouns onto KB classes.
//!
//! Two copular patterns are recognised:
//!
//! * `NOUN+ VERB(be) DET? ADV* ADJ NOUN` ("Snakes are dangerous animals")
//! * `DET most ADJ NOUN` ("... the most successful film of all time")
//!
//! A given ADJ NOUN occurrence counts once even when both patterns match it.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;

pub const DEFAULT_MIN_SIMILARITY: f64 = 0.8;

const COPULAS: &[&str] = &["is", "are", "was", "were", "am", "be", "been", "being"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Adj,
    Noun,
    Verb,
    Det,
    Adv,
    Other,
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ADJ" => Tag::Adj,
            "NOUN" => Tag::Noun,
            "VERB" => Tag::Verb,
            "DET" => Tag::Det,
            "ADV" => Tag::Adv,
            "OTHER" => Tag::Other,
            other => return Err(Error::InvalidArgument(format!("unknown POS tag {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<Token>,
}

impl TaggedSentence {
    /// Parses `surface/TAG surface/TAG ...`; the tag follows the last `/`.
    pub fn parse(line: &str) -> Result<Self> {
        let tokens = line
            .split_whitespace()
            .map(|tok| {
                let (surface, tag) = tok
                    .rsplit_once('/')
                    .ok_or_else(|| Error::InvalidArgument(format!("token {tok:?} has no /TAG")))?;
                if surface.is_empty() {
                    return Err(Error::InvalidArgument(format!("token {tok:?} has an empty surface")));
                }
                Ok(Token {
                    surface: surface.to_string(),
                    tag: tag.parse()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("empty sentence".into()));
        }
        Ok(TaggedSentence { tokens })
    }
}

/// Reads a tagged corpus, one sentence per line; blank lines are skipped.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<TaggedSentence>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sentence = TaggedSentence::parse(&line).map_err(|e| {
            Error::parse(path.display().to_string(), idx + 1, e.to_string())
        })?;
        out.push(sentence);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPair {
    pub adjective: String,
    pub noun: String,
    pub frequency: u64,
}

/// A (subjective property, KB class) pair. Identity is `(property, class)`;
/// `support` is corpus metadata and does not participate in comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct STPair {
    pub property: String,
    #[serde(rename = "type")]
    pub class: String,
    #[serde(default)]
    pub support: u64,
}

impl STPair {
    pub fn new(property: impl Into<String>, class: impl Into<String>) -> Self {
        STPair {
            property: property.into(),
            class: class.into(),
            support: 0,
        }
    }

    /// Stable identifier `property@class`, also the lexicographic tie-break key.
    pub fn id(&self) -> String {
        format!("{}@{}", self.property, self.class)
    }

    pub fn parse_id(id: &str) -> Result<Self> {
        match id.split_once('@') {
            Some((p, c)) if !p.is_empty() && !c.is_empty() => Ok(STPair::new(p, c)),
            _ => Err(Error::InvalidArgument(format!("malformed ST pair id {id:?}"))),
        }
    }

    /// Filesystem/URL friendly form, e.g. `big-city`.
    pub fn slug(&self) -> String {
        let raw = format!("{}-{}", self.property, self.class).to_lowercase();
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
            .collect()
    }
}

impl PartialEq for STPair {
    fn eq(&self, other: &Self) -> bool {
        self.property == other.property && self.class == other.class
    }
}

impl Eq for STPair {}

impl std::hash::Hash for STPair {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.property.hash(state);
        self.class.hash(state);
    }
}

impl PartialOrd for STPair {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for STPair {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id().cmp(&other.id())
    }
}

impl fmt::Display for STPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.property, self.class)
    }
}

/// Rule-table singularization of a lowercased noun.
pub fn singularize(noun: &str) -> String {
    const KEEP: &[&str] = &["ss", "us", "is"];
    if noun.len() <= 3 || KEEP.iter().any(|s| noun.ends_with(s)) {
        return noun.to_string();
    }
    if let Some(stem) = noun.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if noun.ends_with(suffix) {
            return noun[..noun.len() - 2].to_string();
        }
    }
    match noun.strip_suffix('s') {
        Some(stem) => stem.to_string(),
        None => noun.to_string(),
    }
}

/// Positions `(adj_index, noun_index)` matched in one sentence.
fn match_positions(tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut found = Vec::new();
    let lower = |i: usize| tokens[i].surface.to_lowercase();
    for i in 0..tokens.len() {
        if tokens[i].tag != Tag::Adj || i + 1 >= tokens.len() || tokens[i + 1].tag != Tag::Noun {
            continue;
        }
        let superlative = i >= 2 && tokens[i - 1].tag == Tag::Adv && lower(i - 1) == "most" && tokens[i - 2].tag == Tag::Det;
        let copular = {
            let mut j = i;
            while j > 0 && tokens[j - 1].tag == Tag::Adv {
                j -= 1;
            }
            if j > 0 && tokens[j - 1].tag == Tag::Det {
                j -= 1;
            }
            j >= 2
                && tokens[j - 1].tag == Tag::Verb
                && COPULAS.contains(&lower(j - 1).as_str())
                && tokens[j - 2].tag == Tag::Noun
        };
        if superlative || copular {
            found.push((i, i + 1));
        }
    }
    found
}

/// Extracts and merges raw pairs; order is frequency descending, then
/// adjective and noun.
pub fn extract_pairs<'a>(corpus: impl IntoIterator<Item = &'a TaggedSentence>) -> Vec<RawPair> {
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    for sentence in corpus {
        for (a, n) in match_positions(&sentence.tokens) {
            let adjective = sentence.tokens[a].surface.to_lowercase();
            let noun = singularize(&sentence.tokens[n].surface.to_lowercase());
            if adjective == noun {
                continue;
            }
            *counts.entry((adjective, noun)).or_default() += 1;
        }
    }
    let mut out: Vec<RawPair> = counts
        .into_iter()
        .map(|((adjective, noun), frequency)| RawPair {
            adjective,
            noun,
            frequency,
        })
        .collect();
    out.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then_with(|| a.adjective.cmp(&b.adjective))
            .then_with(|| a.noun.cmp(&b.noun))
    });
    out
}

/// `1 - editdistance / maxlen` over characters.
pub fn similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MapReport {
    pub mapped: usize,
    pub dropped: usize,
}

/// Maps raw pairs to ST pairs whose class label is most similar to the noun.
/// Output order: support descending, then pair id.
pub fn map_to_kb(pairs: &[RawPair], kb: &KnowledgeBase, min_similarity: f64) -> (Vec<STPair>, MapReport) {
    let labels: Vec<(&String, String)> = kb.classes().iter().map(|c| (c, c.to_lowercase())).collect();
    let mut merged: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut report = MapReport::default();
    for pair in pairs {
        let mut best: Option<(&String, f64)> = None;
        for (class, label) in &labels {
            let score = similarity(&pair.noun, label);
            // classes iterate in id order, so strict > keeps the smallest id on ties
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((class, score));
            }
        }
        match best {
            Some((class, score)) if score >= min_similarity => {
                report.mapped += 1;
                *merged.entry((pair.adjective.clone(), class.clone())).or_default() += pair.frequency;
            }
            _ => report.dropped += 1,
        }
    }
    let mut out: Vec<STPair> = merged
        .into_iter()
        .map(|((property, class), support)| STPair {
            property,
            class,
            support,
        })
        .collect();
    out.sort_by(|a, b| b.support.cmp(&a.support).then_with(|| a.id().cmp(&b.id())));
    (out, report)
}

pub fn write_raw_pairs(pairs: &[RawPair], mut out: impl Write) -> std::io::Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", p.adjective, p.noun, p.frequency)?;
    }
    Ok(())
}

pub fn read_raw_pairs(path: impl AsRef<Path>) -> Result<Vec<RawPair>> {
    read_tsv(path.as_ref(), |cols| {
        Ok(RawPair {
            adjective: cols[0].to_string(),
            noun: cols[1].to_string(),
            frequency: cols[2].parse().map_err(|_| "frequency is not an integer".to_string())?,
        })
    })
}

/// `adjective<TAB>class_id<TAB>support`
pub fn write_st_pairs(pairs: &[STPair], mut out: impl Write) -> std::io::Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", p.property, p.class, p.support)?;
    }
    Ok(())
}

pub fn read_st_pairs(path: impl AsRef<Path>) -> Result<Vec<STPair>> {
    read_tsv(path.as_ref(), |cols| {
        Ok(STPair {
            property: cols[0].to_string(),
            class: cols[1].to_string(),
            support: cols[2].parse().map_err(|_| "support is not an integer".to_string())?,
        })
    })
}

fn read_tsv<T>(path: &Path, row: impl Fn(&[&str]) -> std::result::Result<T, String>) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(path.display().to_string(), idx + 1, "expected 3 columns"));
        }
        out.push(row(&cols).map_err(|m| Error::parse(path.display().to_string(), idx + 1, m))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(s: &str) -> TaggedSentence {
        TaggedSentence::parse(s).unwrap()
    }

    #[test]
    fn copular_pattern() {
        let pairs = extract_pairs(&[sentence("Snakes/NOUN are/VERB dangerous/ADJ animals/NOUN")]);
        assert_eq!(
            pairs,
            vec![RawPair {
                adjective: "dangerous".into(),
                noun: "animal".into(),
                frequency: 1
            }]
        );
    }

    #[test]
    fn superlative_counts_once() {
        let s = sentence(
            "Titanic/NOUN is/VERB the/DET most/ADV successful/ADJ film/NOUN of/OTHER all/OTHER time/NOUN",
        );
        let pairs = extract_pairs(&[s]);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].adjective.as_str(), pairs[0].noun.as_str()), ("successful", "film"));
        assert_eq!(pairs[0].frequency, 1);
    }

    #[test]
    fn superlative_without_copula() {
        let s = sentence("Paris/NOUN ,/OTHER the/DET most/ADV beautiful/ADJ city/NOUN");
        assert_eq!(extract_pairs(&[s])[0].adjective, "beautiful");
    }

    #[test]
    fn non_copular_sentence_yields_nothing() {
        assert!(extract_pairs(&[sentence("The/DET dog/NOUN ran/VERB home/NOUN")]).is_empty());
        assert!(extract_pairs(&[sentence("Dogs/NOUN chase/VERB fast/ADJ cars/NOUN")]).is_empty());
    }

    #[test]
    fn duplicates_merge() {
        let a = sentence("Snakes/NOUN are/VERB dangerous/ADJ animals/NOUN");
        let b = sentence("Tigers/NOUN are/VERB very/ADV dangerous/ADJ animals/NOUN");
        let pairs = extract_pairs(&[a, b]);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].frequency, 2);
    }

    #[test]
    fn tag_validation() {
        assert!(TaggedSentence::parse("word/XYZ").is_err());
        assert!(TaggedSentence::parse("word").is_err());
        assert!(TaggedSentence::parse("   ").is_err());
        let s = TaggedSentence::parse("AC/DC/NOUN").unwrap();
        assert_eq!(s.tokens[0].surface, "AC/DC");
    }

    #[test]
    fn singularization_rules() {
        assert_eq!(singularize("animals"), "animal");
        assert_eq!(singularize("cities"), "city");
        assert_eq!(singularize("churches"), "church");
        assert_eq!(singularize("boxes"), "box");
        assert_eq!(singularize("glass"), "glass");
        assert_eq!(singularize("bus"), "bus");
        assert_eq!(singularize("film"), "film");
        assert_eq!(singularize("athletes"), "athlete");
    }

    fn kb(classes: &[&str]) -> KnowledgeBase {
        let text: String = classes
            .iter()
            .enumerate()
            .map(|(i, c)| format!("e{i}\ttype\t{c}\tentity\n"))
            .collect();
        KnowledgeBase::parse(&text, "t").unwrap()
    }

    #[test]
    fn maps_exact_label() {
        let raw = vec![RawPair {
            adjective: "dangerous".into(),
            noun: "animal".into(),
            frequency: 3,
        }];
        let (pairs, report) = map_to_kb(&raw, &kb(&["Animal", "City"]), 0.8);
        assert_eq!(pairs, vec![STPair::new("dangerous", "Animal")]);
        assert_eq!(pairs[0].support, 3);
        assert_eq!(report, MapReport { mapped: 1, dropped: 0 });
    }

    #[test]
    fn drops_dissimilar_noun() {
        let raw = vec![RawPair {
            adjective: "big".into(),
            noun: "metropolis".into(),
            frequency: 1,
        }];
        assert!(similarity("metropolis", "city") < 0.8);
        assert!(similarity("metropolis", "film") < 0.8);
        let (pairs, report) = map_to_kb(&raw, &kb(&["City", "Film"]), 0.8);
        assert!(pairs.is_empty());
        assert_eq!(report.dropped, 1);
        let (pairs, _) = map_to_kb(&[], &kb(&["City"]), 0.8);
        assert!(pairs.is_empty());
    }

    #[test]
    fn tie_goes_to_smallest_class_id() {
        let raw = vec![RawPair {
            adjective: "old".into(),
            noun: "cat".into(),
            frequency: 1,
        }];
        // "cat" is one edit away from both labels
        let (pairs, _) = map_to_kb(&raw, &kb(&["Cot", "Bat"]), 0.5);
        assert_eq!(pairs[0].class, "Bat");
    }

    #[test]
    fn pair_ids() {
        let p = STPair::new("big", "City");
        assert_eq!(p.id(), "big@City");
        assert_eq!(STPair::parse_id("big@City").unwrap(), p);
        assert!(STPair::parse_id("big").is_err());
        assert_eq!(STPair::new("most visited", "dbo:City").slug(), "most-visited-dbo-city");
    }
}
