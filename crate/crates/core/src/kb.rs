//! Objective knowledge base: a triple store with class/instance indexes.
//!
//! The on-disk format is a 4-column TSV (`subject predicate object kind`)
//! where `kind` is `entity` or `literal`. `type` and `subclassOf` are the
//! two reserved predicates; predicates in the `subj:` namespace carry
//! acquired subjective facts and are kept as triples but never indexed as
//! objective properties.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TYPE: &str = "type";
pub const SUBCLASS_OF: &str = "subclassOf";
pub const SUBJECTIVE_NAMESPACE: &str = "subj:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Entity,
    Literal,
}

impl ObjectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::Entity => "entity",
            ObjectKind::Literal => "literal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub object_kind: ObjectKind,
}

impl Triple {
    pub fn is_subjective(&self) -> bool {
        self.predicate.starts_with(SUBJECTIVE_NAMESPACE)
    }
}

/// An object value as seen from the property index.
#[derive(Debug, Clone, PartialEq)]
pub struct Value {
    pub text: String,
    pub kind: ObjectKind,
    /// Set for literals that parse as a finite decimal number.
    pub numeric: Option<f64>,
}

impl Value {
    fn new(text: &str, kind: ObjectKind) -> Self {
        let numeric = match kind {
            ObjectKind::Literal => parse_numeric(text),
            ObjectKind::Entity => None,
        };
        Value {
            text: text.to_string(),
            kind,
            numeric,
        }
    }
}

/// Plain decimal numbers only (`-12`, `3.5`, `1e6`); dates such as
/// `1961-8-4` stay categorical.
fn parse_numeric(text: &str) -> Option<f64> {
    let t = text.trim();
    if t.is_empty() || !t.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')) {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub triples: usize,
    pub classes: usize,
    pub instances: usize,
    pub dangling_references: usize,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    triples: Vec<Triple>,
    classes: BTreeSet<String>,
    /// Directly asserted `type` members.
    direct_instances: BTreeMap<String, BTreeSet<String>>,
    /// Members under subclass closure.
    closed_instances: BTreeMap<String, BTreeSet<String>>,
    subclass_dag: BTreeMap<String, BTreeSet<String>>,
    /// Reflexive-transitive superclasses of every class.
    ancestors: BTreeMap<String, BTreeSet<String>>,
    /// Direct types of every instance.
    types: BTreeMap<String, BTreeSet<String>>,
    property_index: BTreeMap<String, BTreeMap<String, Vec<Value>>>,
    report: LoadReport,
}

impl KnowledgeBase {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses TSV text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut triples = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("expected 4 tab-separated columns, found {}", cols.len()),
                ));
            }
            let object_kind = match cols[3] {
                "entity" => ObjectKind::Entity,
                "literal" => ObjectKind::Literal,
                other => {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("kind must be `entity` or `literal`, found {other:?}"),
                    ))
                }
            };
            if cols[0].is_empty() || cols[1].is_empty() {
                return Err(Error::parse(origin, line_no, "empty subject or predicate"));
            }
            if (cols[1] == TYPE || cols[1] == SUBCLASS_OF) && object_kind != ObjectKind::Entity {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("`{}` requires an entity object", cols[1]),
                ));
            }
            triples.push(Triple {
                subject: cols[0].to_string(),
                predicate: cols[1].to_string(),
                object: cols[2].to_string(),
                object_kind,
            });
        }
        Self::from_triples(triples)
    }

    pub fn from_triples(triples: Vec<Triple>) -> Result<Self> {
        let mut kb = KnowledgeBase::default();
        let mut instance_ids = BTreeSet::new();

        for t in &triples {
            match t.predicate.as_str() {
                TYPE => {
                    kb.classes.insert(t.object.clone());
                    instance_ids.insert(t.subject.clone());
                    kb.direct_instances
                        .entry(t.object.clone())
                        .or_default()
                        .insert(t.subject.clone());
                    kb.types
                        .entry(t.subject.clone())
                        .or_default()
                        .insert(t.object.clone());
                }
                SUBCLASS_OF => {
                    kb.classes.insert(t.object.clone());
                    kb.classes.insert(t.subject.clone());
                    kb.subclass_dag
                        .entry(t.subject.clone())
                        .or_default()
                        .insert(t.object.clone());
                }
                _ if t.is_subjective() => {}
                _ => {
                    kb.property_index
                        .entry(t.subject.clone())
                        .or_default()
                        .entry(t.predicate.clone())
                        .or_default()
                        .push(Value::new(&t.object, t.object_kind));
                }
            }
        }

        if let Some(both) = kb.classes.intersection(&instance_ids).next() {
            return Err(Error::Structure(format!(
                "{both:?} is used both as a class and as an instance"
            )));
        }
        for class in &kb.classes {
            kb.subclass_dag.entry(class.clone()).or_default();
        }
        kb.compute_ancestors()?;

        for (class, members) in &kb.direct_instances {
            for ancestor in &kb.ancestors[class] {
                kb.closed_instances
                    .entry(ancestor.clone())
                    .or_default()
                    .extend(members.iter().cloned());
            }
        }
        for class in &kb.classes {
            kb.closed_instances.entry(class.clone()).or_default();
        }

        let subjects: BTreeSet<&str> = triples.iter().map(|t| t.subject.as_str()).collect();
        let dangling = triples
            .iter()
            .filter(|t| {
                t.object_kind == ObjectKind::Entity
                    && !subjects.contains(t.object.as_str())
                    && !kb.classes.contains(&t.object)
            })
            .count();

        kb.report = LoadReport {
            triples: triples.len(),
            classes: kb.classes.len(),
            instances: instance_ids.len(),
            dangling_references: dangling,
        };
        if dangling > 0 {
            log::warn!("knowledge base has {dangling} dangling entity references");
        }
        kb.triples = triples;
        Ok(kb)
    }

    fn compute_ancestors(&mut self) -> Result<()> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
        let mut ancestors: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();

        // Iterative post-order DFS so deep hierarchies cannot overflow the stack.
        for root in self.subclass_dag.keys() {
            if marks.contains_key(root.as_str()) {
                continue;
            }
            let mut stack: Vec<(&str, bool)> = vec![(root.as_str(), false)];
            while let Some((class, expanded)) = stack.pop() {
                if expanded {
                    let mut acc = BTreeSet::from([class.to_string()]);
                    for parent in &self.subclass_dag[class] {
                        acc.extend(ancestors[parent].iter().cloned());
                    }
                    ancestors.insert(class.to_string(), acc);
                    marks.insert(class, Mark::Done);
                    continue;
                }
                match marks.get(class) {
                    Some(Mark::Done) => continue,
                    Some(Mark::Active) => {
                        return Err(Error::Structure(format!("subclassOf cycle through {class:?}")))
                    }
                    None => {}
                }
                marks.insert(class, Mark::Active);
                stack.push((class, true));
                for parent in &self.subclass_dag[class] {
                    match marks.get(parent.as_str()) {
                        Some(Mark::Active) => {
                            return Err(Error::Structure(format!(
                                "subclassOf cycle through {parent:?}"
                            )))
                        }
                        Some(Mark::Done) => {}
                        None => stack.push((parent.as_str(), false)),
                    }
                }
            }
        }
        self.ancestors = ancestors;
        Ok(())
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn classes(&self) -> &BTreeSet<String> {
        &self.classes
    }

    pub fn is_class(&self, id: &str) -> bool {
        self.classes.contains(id)
    }

    pub fn is_entity(&self, id: &str) -> bool {
        self.types.contains_key(id) || self.property_index.contains_key(id)
    }

    fn require_class(&self, class: &str) -> Result<()> {
        if self.is_class(class) {
            Ok(())
        } else {
            Err(Error::NotFound(format!("class {class:?}")))
        }
    }

    /// Instances of `class`, either directly asserted or under subclass closure.
    pub fn instances_of(&self, class: &str, transitive: bool) -> Result<&BTreeSet<String>> {
        self.require_class(class)?;
        static EMPTY: BTreeSet<String> = BTreeSet::new();
        let index = if transitive {
            &self.closed_instances
        } else {
            &self.direct_instances
        };
        Ok(index.get(class).unwrap_or(&EMPTY))
    }

    pub fn is_instance_of(&self, entity: &str, class: &str, transitive: bool) -> bool {
        self.instances_of(class, transitive)
            .map(|members| members.contains(entity))
            .unwrap_or(false)
    }

    /// Direct superclasses.
    pub fn superclasses(&self, class: &str) -> Option<&BTreeSet<String>> {
        self.subclass_dag.get(class)
    }

    /// `sub subclassOf* sup`, reflexive. With `direct_only` only a single
    /// asserted edge (or identity) counts.
    pub fn is_subclass_of(&self, sub: &str, sup: &str, direct_only: bool) -> bool {
        if sub == sup {
            return self.is_class(sub);
        }
        if direct_only {
            self.subclass_dag.get(sub).is_some_and(|parents| parents.contains(sup))
        } else {
            self.ancestors.get(sub).is_some_and(|anc| anc.contains(sup))
        }
    }

    pub fn types_of(&self, entity: &str) -> Option<&BTreeSet<String>> {
        self.types.get(entity)
    }

    /// Objective properties of an entity (reserved and subjective predicates excluded).
    pub fn properties(&self, entity: &str) -> Option<&BTreeMap<String, Vec<Value>>> {
        self.property_index.get(entity)
    }

    pub fn values(&self, entity: &str, predicate: &str) -> &[Value] {
        self.property_index
            .get(entity)
            .and_then(|props| props.get(predicate))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Predicates observed on instances of `class` with the fraction of
    /// instances carrying each; coverage descending, then name.
    pub fn properties_of_type(&self, class: &str) -> Result<Vec<(String, f64)>> {
        let members = self.instances_of(class, true)?;
        if members.is_empty() {
            return Ok(Vec::new());
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for entity in members {
            if let Some(props) = self.property_index.get(entity) {
                for predicate in props.keys() {
                    *counts.entry(predicate.as_str()).or_default() += 1;
                }
            }
        }
        let total = members.len() as f64;
        let mut out: Vec<(String, f64)> = counts
            .into_iter()
            .map(|(p, n)| (p.to_string(), n as f64 / total))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(out)
    }

    /// Deterministic text dump of every index.
    pub fn dump_indexes(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report\t{:?}", self.report);
        for class in &self.classes {
            let direct = self.direct_instances.get(class).map_or(0, BTreeSet::len);
            let _ = writeln!(
                out,
                "class\t{class}\tsuper={:?}\tdirect={direct}\tclosed={:?}",
                self.subclass_dag[class], self.closed_instances[class]
            );
        }
        for (entity, props) in &self.property_index {
            for (predicate, values) in props {
                let rendered: Vec<String> = values
                    .iter()
                    .map(|v| format!("{}:{}:{:?}", v.kind.as_str(), v.text, v.numeric))
                    .collect();
                let _ = writeln!(out, "prop\t{entity}\t{predicate}\t{}", rendered.join("|"));
            }
        }
        out
    }
}
