//! Stage functions over a run directory.
//!
//! Every stage reads its inputs from files written by earlier stages, so a
//! run can resume from whatever is already on disk. Stage seeds are derived
//! from the global seed and the stage name.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use opinionkb::applying::{self, featurize, FeaturizeOptions, TrainedModel};
use opinionkb::crowd::answer_log::{read_answers, write_answers};
use opinionkb::crowd::hits::{read_hits, write_hits};
use opinionkb::crowd::{aggregate_pair, generate_hits, simulate_workers, Hit, PairAggregate, ScenarioSpec, TaskStore};
use opinionkb::extraction::{self, read_corpus, read_raw_pairs, read_st_pairs, write_raw_pairs, write_st_pairs};
use opinionkb::inference::{self, read_facts, write_facts, FactSource, InferenceReport, SubjectiveFact};
use opinionkb::resemble::{build_graph, Lexicon, ResembleOptions, STGraph};
use opinionkb::scalar::fraction_to_f64;
use opinionkb::selection::{select, Algorithm};
use opinionkb::{KnowledgeBase, STPair};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Mode, PipelineConfig};

pub const RAW_PAIRS: &str = "raw_pairs.tsv";
pub const ST_PAIRS: &str = "st_pairs.tsv";
pub const GRAPH: &str = "graph.tsv";
pub const SELECTION: &str = "selection.tsv";
pub const SAMPLES: &str = "samples.tsv";
pub const HITS: &str = "hits.jsonl";
pub const ANSWERS: &str = "answers.jsonl";
pub const AGGREGATION: &str = "aggregation.json";
pub const MODELS: &str = "models.json";
pub const SEED_FACTS: &str = "seed_facts.jsonl";
pub const INFERENCE: &str = "inference.json";
pub const ENRICHED: &str = "enriched_kb.tsv";
pub const ENRICHED_FACTS: &str = "enriched_kb.facts.jsonl";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Extract,
    Map,
    Graph,
    Select,
    Sample,
    Hits,
    Answers,
    Aggregate,
    Train,
    Apply,
    Infer,
    Enrich,
}

impl Stage {
    pub const ALL: [Stage; 12] = [
        Stage::Extract,
        Stage::Map,
        Stage::Graph,
        Stage::Select,
        Stage::Sample,
        Stage::Hits,
        Stage::Answers,
        Stage::Aggregate,
        Stage::Train,
        Stage::Apply,
        Stage::Infer,
        Stage::Enrich,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Map => "map",
            Stage::Graph => "graph",
            Stage::Select => "select",
            Stage::Sample => "sample",
            Stage::Hits => "hits",
            Stage::Answers => "answers",
            Stage::Aggregate => "aggregate",
            Stage::Train => "train",
            Stage::Apply => "apply",
            Stage::Infer => "infer",
            Stage::Enrich => "enrich",
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Extract => &[RAW_PAIRS],
            Stage::Map => &[ST_PAIRS],
            Stage::Graph => &[GRAPH],
            Stage::Select => &[SELECTION],
            Stage::Sample => &[SAMPLES],
            Stage::Hits => &[HITS],
            Stage::Answers => &[ANSWERS],
            Stage::Aggregate => &[AGGREGATION],
            Stage::Train => &[MODELS],
            Stage::Apply => &[SEED_FACTS],
            Stage::Infer => &[INFERENCE],
            Stage::Enrich => &[ENRICHED, ENRICHED_FACTS],
        }
    }
}

/// Mixes the global seed with a label.
pub fn stage_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Per-pair model record in `models.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub pair: String,
    pub features: Vec<String>,
    pub labelled: usize,
    pub positives: usize,
    pub cv_accuracy: Option<f64>,
    pub model: TrainedModel<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceOutput {
    pub report: InferenceReport,
    pub facts: Vec<SubjectiveFact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub artifacts: Vec<ManifestEntry>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub dir: PathBuf,
    kb: Option<KnowledgeBase>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_selection(path: &Path) -> Result<Vec<STPair>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let id = l.split('\t').nth(1).ok_or_else(|| anyhow!("malformed selection line {l:?}"))?;
            Ok(STPair::parse_id(id)?)
        })
        .collect()
}

pub fn read_samples(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for l in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let (pair, entity) = l.split_once('\t').ok_or_else(|| anyhow!("malformed sample line {l:?}"))?;
        out.entry(pair.to_string()).or_default().push(entity.to_string());
    }
    Ok(out)
}

pub fn read_models(path: &Path) -> Result<Vec<PairModel>> {
    read_json(path)
}

pub fn read_inference(path: &Path) -> Result<InferenceOutput> {
    read_json(path)
}

pub fn read_aggregation(path: &Path) -> Result<Vec<PairAggregate>> {
    read_json(path)
}

/// HITs grouped by ST pair id, in file order.
pub fn hits_by_pair(hits: &[Hit]) -> BTreeMap<String, Vec<Hit>> {
    let mut out: BTreeMap<String, Vec<Hit>> = BTreeMap::new();
    for h in hits {
        out.entry(h.st_pair().id()).or_default().push(h.clone());
    }
    out
}

impl Pipeline {
    pub fn new(config: PipelineConfig, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating run directory {}", dir.display()))?;
        Ok(Pipeline { config, dir, kb: None })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn kb(&mut self) -> Result<&KnowledgeBase> {
        if self.kb.is_none() {
            let kb = KnowledgeBase::load(&self.config.kb)?;
            self.kb = Some(kb);
        }
        Ok(self.kb.as_ref().expect("loaded"))
    }

    fn lexicon(&self) -> Result<Lexicon> {
        Ok(Lexicon::load(&self.config.lexicon)?)
    }

    pub fn is_complete(&self, stage: Stage) -> bool {
        if !stage.outputs().iter().all(|f| self.path(f).is_file()) {
            return false;
        }
        if stage == Stage::Answers {
            // a partially answered serve log is not complete
            let (Ok(hits), Ok(answers)) = (read_hits(self.path(HITS)), read_answers(self.path(ANSWERS))) else {
                return false;
            };
            let needed: usize = hits.iter().map(|h| h.assignments_required).sum();
            return answers.len() >= needed;
        }
        true
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<()> {
        let started = Instant::now();
        let result = match stage {
            Stage::Extract => self.extract(),
            Stage::Map => self.map(),
            Stage::Graph => self.graph(),
            Stage::Select => self.select(),
            Stage::Sample => self.sample(),
            Stage::Hits => self.hits(),
            Stage::Answers => match self.config.mode {
                Mode::Simulate => self.simulate(),
                Mode::Serve => self.serve(),
            },
            Stage::Aggregate => self.aggregate(),
            Stage::Train => self.train(),
            Stage::Apply => self.apply(),
            Stage::Infer => self.infer(),
            Stage::Enrich => self.enrich(),
        };
        result.with_context(|| format!("stage {} failed", stage.name()))?;
        log::info!("stage {} done in {:.2?}", stage.name(), started.elapsed());
        Ok(())
    }

    /// Runs every stage, skipping those whose outputs exist until the first
    /// one that has to run; everything after it runs again.
    pub fn run(&mut self) -> Result<Manifest> {
        self.config.validate()?;
        let mut rerun = false;
        for stage in Stage::ALL {
            if !rerun && self.is_complete(stage) {
                log::info!("stage {} already complete", stage.name());
                continue;
            }
            rerun = true;
            self.run_stage(stage)?;
        }
        self.write_manifest()
    }

    pub fn extract(&mut self) -> Result<()> {
        let corpus = read_corpus(&self.config.corpus)?;
        let pairs = extraction::extract_pairs(&corpus);
        log::info!("{} sentences, {} raw pairs", corpus.len(), pairs.len());
        let mut out = create(&self.path(RAW_PAIRS))?;
        write_raw_pairs(&pairs, &mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn map(&mut self) -> Result<()> {
        let raw = read_raw_pairs(self.path(RAW_PAIRS))?;
        let min_sim = self.config.min_similarity;
        let (pairs, report) = extraction::map_to_kb(&raw, self.kb()?, min_sim);
        log::info!("{} pairs mapped, {} dropped", report.mapped, report.dropped);
        let mut out = create(&self.path(ST_PAIRS))?;
        write_st_pairs(&pairs, &mut out)?;
        out.flush()?;
        Ok(())
    }

    fn build_graph(&mut self) -> Result<STGraph> {
        let pairs = read_st_pairs(self.path(ST_PAIRS))?;
        let lex = self.lexicon()?;
        Ok(build_graph(&pairs, self.kb()?, &lex, ResembleOptions::default())?)
    }

    pub fn graph(&mut self) -> Result<()> {
        let g = self.build_graph()?;
        log::info!("graph: {} vertices, {} edges, weight {}", g.len(), g.edges().len(), g.total_weight());
        let mut out = create(&self.path(GRAPH))?;
        g.write_tsv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn select(&mut self) -> Result<()> {
        let g = STGraph::read_tsv(self.path(GRAPH))?;
        let algo = self.config.algorithm()?;
        let r = select(&g, algo, self.config.k, self.config.delta, stage_seed(self.config.seed, "select"))?;
        if r.short {
            log::warn!("selected {} of {} requested pairs", r.chosen.len(), self.config.k);
        }
        let mut out = create(&self.path(SELECTION))?;
        writeln!(out, "rank\tpair\tweight_degree")?;
        for (rank, (&v, p)) in r.indices.iter().zip(&r.chosen).enumerate() {
            writeln!(out, "{}\t{}\t{}", rank + 1, p.id(), g.weight_degree(v))?;
        }
        writeln!(out, "#induced_weight\t{}\t{}", r.induced_weight, algo.name())?;
        out.flush()?;
        Ok(())
    }

    pub fn sample(&mut self) -> Result<()> {
        let chosen = read_selection(&self.path(SELECTION))?;
        let budget = self.config.sample_budget;
        let seed = self.config.seed;
        let mut out = create(&self.path(SAMPLES))?;
        let kb = self.kb()?;
        writeln!(out, "pair\tentity")?;
        for pair in &chosen {
            let s = applying::representative_sample(kb, &pair.class, budget, stage_seed(seed, &format!("sample:{}", pair.id())))?;
            if s.shortfall {
                log::warn!("{}: only {} instances for a budget of {budget}", pair.id(), s.entities.len());
            }
            for e in &s.entities {
                writeln!(out, "{}\t{e}", pair.id())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn hits(&mut self) -> Result<()> {
        let samples = read_samples(&self.path(SAMPLES))?;
        let chosen = read_selection(&self.path(SELECTION))?;
        let workers = self.config.workers_per_hit;
        let kb = self.kb()?;
        let mut all = Vec::new();
        for pair in &chosen {
            let sample = samples.get(&pair.id()).ok_or_else(|| anyhow!("no sample for {}", pair.id()))?;
            all.extend(generate_hits(pair, sample, kb, workers)?);
        }
        let mut out = create(&self.path(HITS))?;
        write_hits(&all, &mut out)?;
        out.flush()?;
        Ok(())
    }

    fn scenario(&self) -> Result<ScenarioSpec> {
        let path = self
            .config
            .scenario
            .as_ref()
            .ok_or_else(|| anyhow!("no scenario configured"))?;
        Ok(ScenarioSpec::load(path)?)
    }

    pub fn simulate(&mut self) -> Result<()> {
        let hits = read_hits(self.path(HITS))?;
        let scenario = self.scenario()?;
        let seed = stage_seed(self.config.seed, "simulate");
        let answers = simulate_workers(&hits, &scenario, self.kb()?, seed)?;
        let mut out = create(&self.path(ANSWERS))?;
        write_answers(&answers, &mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Serves the HITs over HTTP until every assignment is answered or the
    /// timeout fires. Answers are logged straight into the run directory.
    pub fn serve(&mut self) -> Result<()> {
        let hits = read_hits(self.path(HITS))?;
        let store = opinionkb_service::shared(TaskStore::open(hits, self.path(ANSWERS))?);
        let bind = self.config.bind_address.clone();
        let timeout = (self.config.serve_timeout > 0).then(|| Duration::from_secs(self.config.serve_timeout));
        let runtime = tokio::runtime::Runtime::new()?;
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::bind(&bind)
                .await
                .with_context(|| format!("binding {bind}"))?;
            let (tx, rx) = tokio::sync::oneshot::channel::<()>();
            let server = tokio::spawn(opinionkb_service::serve(listener, store.clone(), async {
                rx.await.ok();
            }));
            let started = Instant::now();
            let mut last = None;
            loop {
                let p = store.lock().expect("task store lock").progress();
                if last != Some(p) {
                    log::info!("progress: {}/{} HITs complete, {} answers", p.hits_complete, p.hits_total, p.answers);
                    last = Some(p);
                }
                if p.hits_complete == p.hits_total {
                    break;
                }
                if timeout.is_some_and(|t| started.elapsed() >= t) {
                    let _ = tx.send(());
                    server.await??;
                    bail!("timed out with {}/{} HITs complete", p.hits_complete, p.hits_total);
                }
                tokio::time::sleep(Duration::from_millis(250)).await;
            }
            let _ = tx.send(());
            server.await??;
            Ok(())
        })
    }

    pub fn aggregate(&mut self) -> Result<()> {
        let hits = read_hits(self.path(HITS))?;
        let answers = read_answers(self.path(ANSWERS))?;
        let params = self.config.aggregation()?;
        let mut out = Vec::new();
        for (_, pair_hits) in hits_by_pair(&hits) {
            out.push(aggregate_pair(&pair_hits, &answers, &params)?);
        }
        write_json(&self.path(AGGREGATION), &out)
    }

    pub fn train(&mut self) -> Result<()> {
        let aggregates = read_aggregation(&self.path(AGGREGATION))?;
        let hits = hits_by_pair(&read_hits(self.path(HITS))?);
        let kind = self.config.model_kind()?;
        let hyper = self.config.hyper();
        let folds = self.config.folds;
        let seed = self.config.seed;
        let opts = FeaturizeOptions {
            include_relations: self.config.include_relations,
        };
        let kb = self.kb()?;
        let mut out = Vec::new();
        for agg in &aggregates {
            let pair = STPair::parse_id(&agg.pair)?;
            let mut retained = agg.retained_names();
            if retained.is_empty() {
                log::warn!("{}: crowd retained no properties; using every candidate", agg.pair);
                retained = hits
                    .get(&agg.pair)
                    .and_then(|h| h.first())
                    .map(|h| h.candidate_properties.clone())
                    .unwrap_or_default();
            }
            let set = featurize::<f64>(kb, &pair.class, &retained, opts)?;
            let labels = agg.labels();
            let model = applying::train(&set, &labels, kind, hyper)?;
            let cv_accuracy = if labels.len() >= folds {
                Some(applying::cross_validate(&set, &labels, kind, hyper, folds, stage_seed(seed, &format!("cv:{}", agg.pair)))?)
            } else {
                log::warn!("{}: {} labels, too few for {folds}-fold cross-validation", agg.pair, labels.len());
                None
            };
            out.push(PairModel {
                pair: agg.pair.clone(),
                features: set.schema.predicates().map(str::to_string).collect(),
                labelled: labels.len(),
                positives: labels.values().filter(|l| **l).count(),
                cv_accuracy,
                model,
            });
        }
        write_json(&self.path(MODELS), &out)
    }

    /// Crowd facts for answered instances, classifier facts for the rest.
    pub fn apply(&mut self) -> Result<()> {
        let aggregates: BTreeMap<String, PairAggregate> = read_aggregation(&self.path(AGGREGATION))?
            .into_iter()
            .map(|a| (a.pair.clone(), a))
            .collect();
        let models = read_models(&self.path(MODELS))?;
        let opts = FeaturizeOptions {
            include_relations: self.config.include_relations,
        };
        let kb = self.kb()?;
        let mut facts = Vec::new();
        for pm in &models {
            let pair = STPair::parse_id(&pm.pair)?;
            let agg = aggregates.get(&pm.pair).ok_or_else(|| anyhow!("no aggregate for {}", pm.pair))?;
            let mut crowd = BTreeSet::new();
            for inst in &agg.instances {
                let a = fraction_to_f64(inst.agreement);
                let label = inst.opinion.as_bool();
                crowd.insert(inst.entity.as_str());
                facts.push(SubjectiveFact::new(
                    inst.entity.clone(),
                    pair.clone(),
                    label,
                    FactSource::Crowd,
                    if label { a } else { 1.0 - a },
                ));
            }
            let rest: Vec<_> = if pm.features.is_empty() {
                kb.instances_of(&pair.class, true)?
                    .iter()
                    .filter(|e| !crowd.contains(e.as_str()))
                    .map(|e| applying::FeatureVector {
                        entity: e.clone(),
                        values: Vec::new(),
                    })
                    .collect()
            } else {
                featurize::<f64>(kb, &pair.class, &pm.features, opts)?
                    .vectors
                    .into_iter()
                    .filter(|v| !crowd.contains(v.entity.as_str()))
                    .collect()
            };
            facts.extend(applying::apply_model(&pm.model, &pm.model.schema, &rest, &pair)?);
        }
        let mut out = create(&self.path(SEED_FACTS))?;
        write_facts(&facts, &mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn infer(&mut self) -> Result<()> {
        let seeds = read_facts(self.path(SEED_FACTS))?;
        let g = self.build_graph()?;
        let (facts, report) = if self.config.fixpoint {
            inference::infer_fixpoint(&seeds, &g)
        } else {
            inference::infer(&seeds, &g)
        };
        log::info!(
            "{} seed facts, {} inferred, {} conflicts",
            report.seed_count,
            report.inferred_count,
            report.conflict_count
        );
        write_json(&self.path(INFERENCE), &InferenceOutput { report, facts })
    }

    pub fn enrich(&mut self) -> Result<()> {
        let out = read_inference(&self.path(INFERENCE))?;
        inference::enrich(&self.config.kb, &out.facts, self.path(ENRICHED))?;
        Ok(())
    }

    /// Hashes every file in the run directory except the manifest itself.
    pub fn write_manifest(&self) -> Result<Manifest> {
        let mut names: Vec<String> = std::fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST)
            .collect();
        names.sort();
        let mut artifacts = Vec::with_capacity(names.len());
        for name in names {
            let bytes = std::fs::read(self.path(&name))?;
            artifacts.push(ManifestEntry {
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
                file: name,
            });
        }
        let manifest = Manifest {
            seed: self.config.seed,
            artifacts,
        };
        write_json(&self.path(MANIFEST), &manifest)?;
        Ok(manifest)
    }
}

/// Standalone selection used by the `select` subcommand and the report.
pub fn run_selection(g: &STGraph, algo: Algorithm, k: usize, delta: f64, seed: u64) -> Result<opinionkb::SelectionResult> {
    Ok(select(g, algo, k, delta, stage_seed(seed, "select"))?)
}
