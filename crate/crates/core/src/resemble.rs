//! Subjective resemble relationships between ST pairs and the weighted ST graph.
//!
//! Two pairs resemble each other on an entity `e` when `e` is an instance of
//! both types, the types are equal or related by `subclassOf*`, and the
//! properties are the same, synonymous (positive) or antonymous (negative).
//! The edge weight between two pairs is the number of such entities.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::STPair;
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }

    /// Label carried over an edge of this polarity.
    pub fn apply(self, label: bool) -> bool {
        match self {
            Polarity::Positive => label,
            Polarity::Negative => !label,
        }
    }
}

/// Synonym groups (an equivalence relation) with antonymy between groups.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    group_of: BTreeMap<String, usize>,
    groups: Vec<BTreeSet<String>>,
    antonyms: BTreeSet<(usize, usize)>,
}

impl Lexicon {
    pub fn from_relations<'a>(
        synonyms: impl IntoIterator<Item = (&'a str, &'a str)>,
        antonyms: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let antonyms: Vec<(&str, &str)> = antonyms.into_iter().collect();
        let mut words: BTreeSet<&str> = BTreeSet::new();
        let synonyms: Vec<(&str, &str)> = synonyms.into_iter().collect();
        for &(a, b) in synonyms.iter().chain(&antonyms) {
            words.insert(a);
            words.insert(b);
        }
        let index: BTreeMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (*w, i)).collect();
        let mut parent: Vec<usize> = (0..words.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in &synonyms {
            let (ra, rb) = (find(&mut parent, index[a]), find(&mut parent, index[b]));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }

        // Number groups in order of their smallest member.
        let mut lex = Lexicon::default();
        let mut root_to_group: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, word) in words.iter().enumerate() {
            let root = find(&mut parent, i);
            let next = root_to_group.len();
            let group = *root_to_group.entry(root).or_insert(next);
            if group == lex.groups.len() {
                lex.groups.push(BTreeSet::new());
            }
            lex.groups[group].insert(word.to_string());
            lex.group_of.insert(word.to_string(), group);
        }
        for &(a, b) in &antonyms {
            let (ga, gb) = (lex.group_of[a], lex.group_of[b]);
            if ga == gb {
                return Err(Error::Structure(format!(
                    "{a:?} and {b:?} are both synonymous and antonymous"
                )));
            }
            lex.antonyms.insert((ga.min(gb), ga.max(gb)));
        }
        Ok(lex)
    }

    /// Reads `lemma1<TAB>lemma2<TAB>rel` with `rel` in `{syn, ant}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut syn = Vec::new();
        let mut ant = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 || cols[0].is_empty() || cols[1].is_empty() {
                return Err(Error::parse(origin, idx + 1, "expected `lemma1<TAB>lemma2<TAB>rel`"));
            }
            match cols[2] {
                "syn" => syn.push((cols[0], cols[1])),
                "ant" => ant.push((cols[0], cols[1])),
                other => {
                    return Err(Error::parse(origin, idx + 1, format!("rel must be syn or ant, found {other:?}")))
                }
            }
        }
        Self::from_relations(syn, ant)
    }

    /// Group key of a lemma; lemmas absent from the lexicon are singletons.
    fn group(&self, lemma: &str) -> Option<usize> {
        self.group_of.get(lemma).copied()
    }

    pub fn synonyms(&self, lemma: &str) -> Option<&BTreeSet<String>> {
        self.group(lemma).map(|g| &self.groups[g])
    }

    /// Lexical relation between two properties.
    pub fn relation(&self, a: &str, b: &str) -> Option<Polarity> {
        if a == b {
            return Some(Polarity::Positive);
        }
        let (ga, gb) = (self.group(a)?, self.group(b)?);
        if ga == gb {
            Some(Polarity::Positive)
        } else if self.antonyms.contains(&(ga.min(gb), ga.max(gb))) {
            Some(Polarity::Negative)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResembleOptions {
    /// Instance membership under subclass closure.
    pub transitive_typing: bool,
    /// Only an asserted subclassOf edge (or equal types) relates two types.
    pub direct_subclass_only: bool,
}

impl Default for ResembleOptions {
    fn default() -> Self {
        ResembleOptions {
            transitive_typing: true,
            direct_subclass_only: false,
        }
    }
}

fn types_related(kb: &KnowledgeBase, a: &str, b: &str, opts: ResembleOptions) -> bool {
    kb.is_subclass_of(a, b, opts.direct_subclass_only) || kb.is_subclass_of(b, a, opts.direct_subclass_only)
}

/// Resemble relation of `a` and `b` on entity `e`.
pub fn resemble(
    a: &STPair,
    b: &STPair,
    e: &str,
    kb: &KnowledgeBase,
    lex: &Lexicon,
    opts: ResembleOptions,
) -> Result<Option<Polarity>> {
    if a == b {
        return Err(Error::InvalidArgument(format!("{a} compared with itself")));
    }
    for class in [&a.class, &b.class] {
        if !kb.is_class(class) {
            return Err(Error::NotFound(format!("class {class:?}")));
        }
    }
    if !kb.is_entity(e) {
        return Err(Error::NotFound(format!("entity {e:?}")));
    }
    let polarity = match lex.relation(&a.property, &b.property) {
        Some(p) => p,
        None => return Ok(None),
    };
    if !types_related(kb, &a.class, &b.class, opts) {
        return Ok(None);
    }
    let member = |class: &str| kb.is_instance_of(e, class, opts.transitive_typing);
    Ok((member(&a.class) && member(&b.class)).then_some(polarity))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResembleEdge {
    /// Vertex indices, `a < b`.
    pub a: usize,
    pub b: usize,
    pub polarity: Polarity,
    pub shared_entities: BTreeSet<String>,
}

impl ResembleEdge {
    pub fn weight(&self) -> u64 {
        self.shared_entities.len() as u64
    }

    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Undirected weighted graph over ST pairs; vertices are sorted by pair id.
#[derive(Debug, Clone, Default)]
pub struct STGraph {
    vertices: Vec<STPair>,
    edges: Vec<ResembleEdge>,
    adjacency: Vec<Vec<usize>>,
    index: BTreeMap<String, usize>,
}

impl STGraph {
    /// Assembles a graph; edges are validated and order-normalized.
    pub fn new(mut vertices: Vec<STPair>, edges: Vec<(STPair, STPair, Polarity, BTreeSet<String>)>) -> Result<Self> {
        vertices.sort();
        if let Some(w) = vertices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate ST pair {}", w[0])));
        }
        let index: BTreeMap<String, usize> = vertices.iter().enumerate().map(|(i, p)| (p.id(), i)).collect();
        let mut normalized = Vec::with_capacity(edges.len());
        let mut seen = BTreeSet::new();
        for (x, y, polarity, shared) in edges {
            let lookup = |p: &STPair| {
                index
                    .get(&p.id())
                    .copied()
                    .ok_or_else(|| Error::NotFound(format!("edge endpoint {p} is not a vertex")))
            };
            let (i, j) = (lookup(&x)?, lookup(&y)?);
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop on {x}")));
            }
            if shared.is_empty() {
                continue;
            }
            let (a, b) = (i.min(j), i.max(j));
            if !seen.insert((a, b)) {
                return Err(Error::InvalidArgument(format!("duplicate edge {x} - {y}")));
            }
            normalized.push(ResembleEdge {
                a,
                b,
                polarity,
                shared_entities: shared,
            });
        }
        normalized.sort_by_key(|e| (e.a, e.b));
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (k, e) in normalized.iter().enumerate() {
            adjacency[e.a].push(k);
            adjacency[e.b].push(k);
        }
        Ok(STGraph {
            vertices,
            edges: normalized,
            adjacency,
            index,
        })
    }

    pub fn vertices(&self) -> &[STPair] {
        &self.vertices
    }

    pub fn edges(&self) -> &[ResembleEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_index(&self, pair: &STPair) -> Option<usize> {
        self.index.get(&pair.id()).copied()
    }

    /// Edges incident to vertex `v`.
    pub fn incident(&self, v: usize) -> impl Iterator<Item = &ResembleEdge> {
        self.adjacency[v].iter().map(move |&k| &self.edges[k])
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<&ResembleEdge> {
        self.incident(u).find(|e| e.other(u) == v)
    }

    /// Sum of incident edge weights in the full graph.
    pub fn weight_degree(&self, v: usize) -> u64 {
        self.incident(v).map(ResembleEdge::weight).sum()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(ResembleEdge::weight).sum()
    }

    /// Sum of weights of edges with both endpoints in `chosen`.
    pub fn induced_weight(&self, chosen: &[usize]) -> u64 {
        let mut member = vec![false; self.vertices.len()];
        for &v in chosen {
            member[v] = true;
        }
        self.edges
            .iter()
            .filter(|e| member[e.a] && member[e.b])
            .map(ResembleEdge::weight)
            .sum()
    }

    /// TSV edge list `pair_a pair_b polarity weight`, preceded by one
    /// `#vertex<TAB>pair_id<TAB>support` line per vertex so isolated pairs survive.
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(out, "#vertex\t{}\t{}", v.id(), v.support)?;
        }
        for e in &self.edges {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                self.vertices[e.a].id(),
                self.vertices[e.b].id(),
                e.polarity.as_str(),
                e.weight()
            )?;
        }
        Ok(())
    }

    /// Reads a graph dump. Entity sets are not part of the dump; each edge
    /// gets `weight` placeholder entities, which suffices for selection.
    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut vertices: BTreeMap<String, STPair> = BTreeMap::new();
        let mut edges = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if let Some(rest) = line.strip_prefix("#vertex\t") {
                let cols: Vec<&str> = rest.split('\t').collect();
                let mut pair = STPair::parse_id(cols[0]).map_err(|e| Error::parse(&origin, idx + 1, e.to_string()))?;
                pair.support = cols.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
                vertices.insert(pair.id(), pair);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if cols.len() != 4 {
                return Err(Error::parse(&origin, idx + 1, "expected 4 columns"));
            }
            let a = STPair::parse_id(cols[0]).map_err(|e| Error::parse(&origin, idx + 1, e.to_string()))?;
            let b = STPair::parse_id(cols[1]).map_err(|e| Error::parse(&origin, idx + 1, e.to_string()))?;
            let polarity = match cols[2] {
                "positive" => Polarity::Positive,
                "negative" => Polarity::Negative,
                other => return Err(Error::parse(&origin, idx + 1, format!("bad polarity {other:?}"))),
            };
            let weight: usize = cols[3]
                .parse()
                .map_err(|_| Error::parse(&origin, idx + 1, "weight is not an integer"))?;
            let shared = (0..weight).map(|i| format!("_:{i}")).collect();
            vertices.entry(a.id()).or_insert_with(|| a.clone());
            vertices.entry(b.id()).or_insert_with(|| b.clone());
            edges.push((a, b, polarity, shared));
        }
        STGraph::new(vertices.into_values().collect(), edges)
    }
}

/// Index-accelerated graph construction: only lexically related pairs are
/// compared, and shared entities come from the smaller type's instance set.
pub fn build_graph(pairs: &[STPair], kb: &KnowledgeBase, lex: &Lexicon, opts: ResembleOptions) -> Result<STGraph> {
    for p in pairs {
        if !kb.is_class(&p.class) {
            return Err(Error::NotFound(format!("class {:?} of {p}", p.class)));
        }
    }
    // Bucket pairs by lexical group so only related properties meet.
    let mut by_property: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        by_property.entry(p.property.as_str()).or_default().push(i);
    }
    let properties: Vec<&str> = by_property.keys().copied().collect();
    let mut edges = Vec::new();
    for (x, &pa) in properties.iter().enumerate() {
        for &pb in &properties[x..] {
            let Some(polarity) = lex.relation(pa, pb) else { continue };
            for &i in &by_property[pa] {
                for &j in &by_property[pb] {
                    if (pa == pb && j <= i) || i == j {
                        continue;
                    }
                    let (a, b) = (&pairs[i], &pairs[j]);
                    if !types_related(kb, &a.class, &b.class, opts) {
                        continue;
                    }
                    let ia = kb.instances_of(&a.class, opts.transitive_typing)?;
                    let ib = kb.instances_of(&b.class, opts.transitive_typing)?;
                    let (small, large) = if ia.len() <= ib.len() { (ia, ib) } else { (ib, ia) };
                    let shared: BTreeSet<String> = small.iter().filter(|e| large.contains(*e)).cloned().collect();
                    if !shared.is_empty() {
                        edges.push((a.clone(), b.clone(), polarity, shared));
                    }
                }
            }
        }
    }
    STGraph::new(pairs.to_vec(), edges)
}
