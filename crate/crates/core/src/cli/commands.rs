//! Subcommand bodies. Each reads its inputs, writes artifacts under the
//! output directory with a `.meta.json` sidecar, and records a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Backend, PipelineConfig, SelectorKind};
use crate::annotations::{feature_table, write_feature_csv, AnnotationKB};
use crate::corpus::{
    chunk_note, filter_notes, pick_distractors, synth_cohort, synth_narrative, synth_world, validate_cohort,
    ClinicalNote, NoteChunk, Patient,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    ablation_run, delta_csv, evaluate_cohort, exact_name_lookup, export_rankings, import_external_ranking,
    metrics_csv, permutation_delta, MetricsReport,
};
use crate::extraction::{extract_corpus, CorpusExtraction, Extractor, Gazetteer, MentionRecord, RemoteExtractor};
use crate::io::{parse_jsonl, read_jsonl, read_text, to_jsonl, write_text};
use crate::ontology::{compute_stats, Ontology, OntologyStats, TermId};
use crate::ranking::{
    build_instances, rank_terms, select_model, split_cohort, train_boosted, train_pairwise_linear, FeatureSchema,
    Featurizer, ModelKind, RankModel,
};
use crate::standardization::{
    standardize_corpus, HashedNgramEmbedder, RemoteSelector, Selector, ThresholdSelector, VectorIndex,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    World,
    Ingest,
    Synth,
    Chunk,
    Extract,
    Standardize,
    Train,
    Rank,
    Evaluate,
    Ablate,
    Permtest,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::World => "world",
            Stage::Ingest => "ingest",
            Stage::Synth => "synth",
            Stage::Chunk => "chunk",
            Stage::Extract => "extract",
            Stage::Standardize => "standardize",
            Stage::Train => "train",
            Stage::Rank => "rank",
            Stage::Evaluate => "evaluate",
            Stage::Ablate => "ablate",
            Stage::Permtest => "permtest",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub force: bool,
    /// Alternative ranked-list file for `rank` (candidates) or `evaluate`.
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub command: String,
    pub config_hash: String,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub complete: bool,
    pub artifacts: Vec<ArtifactEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile<T> {
    pub provenance: Provenance,
    pub report: T,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldMarkup {
    pub patient_id: String,
    pub note_id: String,
    pub annotated: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub patient_id: String,
    pub terms: Vec<TermId>,
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub kind: ModelKind,
    pub validation_map30: f64,
    pub rounds: usize,
    pub best_round: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub selected: ModelKind,
    pub candidates: Vec<CandidateSummary>,
    pub train_patients: Vec<String>,
    pub validation_patients: Vec<String>,
    pub train_instances: usize,
    pub validation_instances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OntologySummary {
    pub terms: usize,
    pub live_terms: usize,
    pub root: TermId,
    pub total_diseases: usize,
}

pub(crate) fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn json_text<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    opts: &'a RunOptions,
    stage: Stage,
    hash: String,
    artifacts: Vec<ArtifactEntry>,
}

impl<'a> Run<'a> {
    fn out(&self, rel: &str) -> PathBuf {
        self.cfg.out_dir.join(rel)
    }

    fn manifest(&self, complete: bool) -> Result<()> {
        let m = Manifest {
            command: self.stage.name().into(),
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            version: VERSION.into(),
            complete,
            artifacts: self.artifacts.clone(),
        };
        write_text(&self.out(&format!("manifests/{}.json", self.stage.name())), &json_text(&m)?)
    }

    fn write(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.out(rel);
        let meta = |complete| ArtifactMeta {
            command: self.stage.name().into(),
            config_hash: self.hash.clone(),
            complete,
        };
        write_text(&sidecar(&path), &json_text(&meta(false))?)?;
        write_text(&path, text)?;
        write_text(&sidecar(&path), &json_text(&meta(true))?)?;
        self.artifacts.push(ArtifactEntry {
            path: rel.into(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        });
        Ok(())
    }

    fn report<T: Serialize>(&mut self, rel: &str, report: T) -> Result<()> {
        let file = ReportFile {
            provenance: Provenance {
                command: self.stage.name().into(),
                config_hash: self.hash.clone(),
                seed: self.cfg.seed,
                version: VERSION.into(),
            },
            report,
        };
        self.write(rel, &json_text(&file)?)
    }

    /// Refuses inputs produced under another config or left incomplete,
    /// unless forced. Files without a sidecar are external and accepted.
    fn check(&self, path: &Path) -> Result<()> {
        let side = sidecar(path);
        if !side.exists() {
            return Ok(());
        }
        let meta: ArtifactMeta = serde_json::from_str(&read_text(&side)?)?;
        let problem = if !meta.complete {
            Some(format!("{} is incomplete", path.display()))
        } else if meta.config_hash != self.hash {
            Some(format!(
                "{} was produced with config {} but the current config is {}",
                path.display(),
                meta.config_hash,
                self.hash
            ))
        } else {
            None
        };
        match problem {
            Some(p) if self.opts.force => {
                log::warn!("{p}; continuing because of --force");
                Ok(())
            }
            Some(p) => Err(Error::ArtifactMismatch(p)),
            None => Ok(()),
        }
    }

    fn input(&self, configured: &Option<PathBuf>, default: &str, what: &str) -> Result<PathBuf> {
        let path = configured.clone().unwrap_or_else(|| self.out(default));
        if !path.exists() {
            return Err(Error::Config(format!("{what} not found at {}", path.display())));
        }
        self.check(&path)?;
        Ok(path)
    }

    fn artifact(&self, rel: &str, producer: &str) -> Result<PathBuf> {
        let path = self.out(rel);
        if !path.exists() {
            return Err(Error::Config(format!(
                "{} not found; run `{producer}` first",
                path.display()
            )));
        }
        self.check(&path)?;
        Ok(path)
    }

    fn ontology_path(&self) -> Result<PathBuf> {
        self.input(&self.cfg.paths.ontology, "world/hp.obo", "ontology")
    }

    fn knowledge(&self) -> Result<(Ontology, AnnotationKB, OntologyStats)> {
        let op = self.ontology_path()?;
        let dp = self.input(&self.cfg.paths.disease_annotations, "world/diseases.tsv", "disease annotations")?;
        let gp = match &self.cfg.paths.gene_annotations {
            Some(p) => Some(self.input(&Some(p.clone()), "", "gene annotations")?),
            None if self.cfg.paths.ontology.is_none() => Some(self.input(&None, "world/genes.tsv", "gene annotations")?),
            None => None,
        };
        let o = Ontology::load(&op)?;
        let genes = gp.map(|p| read_text(&p)).transpose()?.unwrap_or_default();
        let kb = AnnotationKB::load(&read_text(&dp)?, &genes, &o)?;
        let s = compute_stats(&o, &kb)?;
        Ok((o, kb, s))
    }

    fn cohort(&self, o: &Ontology) -> Result<Vec<Patient>> {
        let path = self.input(&self.cfg.paths.cohort, "cohort.jsonl", "cohort")?;
        let cohort: Vec<Patient> = read_jsonl(&path)?;
        validate_cohort(&cohort, o)?;
        Ok(cohort)
    }

    fn rankings(&self, path: &Path, o: &Ontology, internal: bool) -> Result<BTreeMap<String, Vec<TermId>>> {
        let imported = import_external_ranking(&read_text(path)?, o);
        if let Some(issue) = imported.issues.first() {
            let msg = format!("{} line {}: {}", path.display(), issue.line, issue.message);
            if internal {
                return Err(Error::Ingest(msg));
            }
            for i in &imported.issues {
                log::warn!("{} line {}: {}", path.display(), i.line, i.message);
            }
        }
        Ok(imported.lists)
    }
}

/// Runs one subcommand. The caller owns the thread pool.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig, opts: &RunOptions) -> Result<()> {
    cfg.validate()?;
    let mut run = Run {
        cfg,
        opts,
        stage,
        hash: cfg.hash(),
        artifacts: Vec::new(),
    };
    match stage {
        Stage::World => {}
        Stage::Ingest | Stage::Synth | Stage::Train => {
            run.ontology_path()?;
        }
        Stage::Chunk => {
            run.input(&cfg.paths.notes, "notes.jsonl", "notes")?;
        }
        Stage::Extract | Stage::Standardize | Stage::Rank | Stage::Evaluate | Stage::Ablate | Stage::Permtest => {
            run.ontology_path()?;
        }
    }
    run.manifest(false)?;
    match stage {
        Stage::World => world(&mut run)?,
        Stage::Ingest => ingest(&mut run)?,
        Stage::Synth => synth(&mut run)?,
        Stage::Chunk => chunk(&mut run)?,
        Stage::Extract => extract(&mut run)?,
        Stage::Standardize => standardize(&mut run)?,
        Stage::Train => train(&mut run)?,
        Stage::Rank => rank(&mut run)?,
        Stage::Evaluate => evaluate(&mut run)?,
        Stage::Ablate => ablate(&mut run)?,
        Stage::Permtest => permtest(&mut run)?,
    }
    run.manifest(true)
}

fn world(run: &mut Run) -> Result<()> {
    let w = synth_world(run.cfg.seed, &run.cfg.synth.world);
    run.write("world/hp.obo", &w.to_obo())?;
    run.write("world/diseases.tsv", &w.disease_tsv())?;
    run.write("world/genes.tsv", &w.gene_tsv())
}

fn ingest(run: &mut Run) -> Result<()> {
    let (o, kb, s) = run.knowledge()?;
    let mut csv = Vec::new();
    write_feature_csv(&feature_table(&o, &s, &kb), &mut csv).map_err(|e| Error::io(run.out("features.csv"), e))?;
    run.write("features.csv", &String::from_utf8(csv).expect("utf-8 csv"))?;
    let summary = OntologySummary {
        terms: o.len(),
        live_terms: o.live_count(),
        root: o.root().clone(),
        total_diseases: kb.total_diseases(),
    };
    run.write("ontology_summary.json", &json_text(&summary)?)
}

fn synth(run: &mut Run) -> Result<()> {
    let o = Ontology::load(&run.ontology_path()?)?;
    let sc = &run.cfg.synth;
    let seed = run.cfg.seed;
    let cohort = synth_cohort(&o, sc.patients, seed, &sc.cohort);
    let narratives = cohort
        .par_iter()
        .map(|p| {
            let d = pick_distractors(&o, p, sc.distractors, sc.distractor_max_depth, seed);
            synth_narrative(p, &o, seed, &d)
        })
        .collect::<Result<Vec<_>>>()?;
    let notes: Vec<&ClinicalNote> = narratives.iter().map(|n| &n.note).collect();
    let gold: Vec<GoldMarkup> = narratives
        .iter()
        .map(|n| GoldMarkup {
            patient_id: n.note.patient_id.clone(),
            note_id: n.note.note_id.clone(),
            annotated: n.annotated.clone(),
        })
        .collect();
    run.write("cohort.jsonl", &to_jsonl(&cohort)?)?;
    run.write("notes.jsonl", &to_jsonl(&notes)?)?;
    run.write("gold_markup.jsonl", &to_jsonl(&gold)?)
}

fn chunk(run: &mut Run) -> Result<()> {
    let path = run.input(&run.cfg.paths.notes, "notes.jsonl", "notes")?;
    let notes: Vec<ClinicalNote> = read_jsonl(&path)?;
    let kept = filter_notes(&notes, &run.cfg.extraction.exclude_patterns, &BTreeMap::new())?;
    if kept.len() < notes.len() {
        log::info!("dropped {} of {} notes", notes.len() - kept.len(), notes.len());
    }
    let max = run.cfg.extraction.max_chunk_chars;
    let chunks: Vec<NoteChunk> = kept.iter().flat_map(|n| chunk_note(n, max)).collect();
    run.write("chunks.jsonl", &to_jsonl(&chunks)?)
}

fn extract(run: &mut Run) -> Result<()> {
    let chunks: Vec<NoteChunk> = read_jsonl(&run.artifact("chunks.jsonl", "chunk")?)?;
    let o = Ontology::load(&run.ontology_path()?)?;
    let ex = &run.cfg.extraction;
    let extractor: Box<dyn Extractor> = match ex.backend {
        Backend::Gazetteer => Box::new(Gazetteer::from_ontology(&o)),
        Backend::Remote => Box::new(RemoteExtractor::new(
            ex.remote.clone().expect("validated"),
            ex.prompt.clone(),
        )),
    };
    let out = extract_corpus(&chunks, extractor.as_ref(), run.cfg.concurrency)?;
    if !out.errors.is_empty() {
        log::warn!("{} chunks failed extraction", out.errors.len());
    }
    run.write("mentions.jsonl", &to_jsonl(&out.records())?)?;
    run.write("extraction_errors.jsonl", &to_jsonl(&out.errors)?)?;
    run.write("extraction_warnings.jsonl", &to_jsonl(&out.warnings)?)
}

fn mentions(run: &Run) -> Result<CorpusExtraction> {
    let records: Vec<MentionRecord> = read_jsonl(&run.artifact("mentions.jsonl", "extract")?)?;
    Ok(CorpusExtraction::from_records(records))
}

fn standardize(run: &mut Run) -> Result<()> {
    let ex = mentions(run)?;
    let o = Ontology::load(&run.ontology_path()?)?;
    let sc = &run.cfg.standardization;
    let provider = HashedNgramEmbedder {
        dimension: sc.dimension,
        ..HashedNgramEmbedder::default()
    };
    let index = VectorIndex::build(&o, &provider)?;
    let selector: Box<dyn Selector> = match sc.selector {
        SelectorKind::Threshold => Box::new(ThresholdSelector { threshold: sc.threshold }),
        SelectorKind::Remote => Box::new(RemoteSelector::new(sc.remote.clone().expect("validated"))),
    };
    let st = standardize_corpus(&ex.mentions, &o, &index, &provider, selector.as_ref(), sc.top_k, run.cfg.concurrency)?;
    run.write("standardized.jsonl", &to_jsonl(&st.trace)?)?;
    run.write("terms.jsonl", &export_rankings(&st.ordered)?)
}

fn train(run: &mut Run) -> Result<()> {
    let (o, kb, s) = run.knowledge()?;
    let cohort = run.cohort(&o)?;
    let rc = &run.cfg.ranking;
    let seed = run.cfg.seed;
    let (train, val) = split_cohort(&cohort, rc.train_ratio, seed)?;
    let featurizer = Featurizer::new(FeatureSchema::from_cohort(&cohort), &o, &s, &kb);
    let schema = featurizer.schema().clone();
    let tr = build_instances(&train, &o, &featurizer, &rc.sampling, seed)?;
    let va = build_instances(&val, &o, &featurizer, &rc.sampling, seed)?;
    let linear = train_pairwise_linear(&schema, &tr, Some(&va), &rc.linear, seed)?;
    let boosted = train_boosted(&schema, &tr, &va, &rc.boosted, seed)?;
    let candidates = [linear, boosted];
    let (best, maps) = select_model(&candidates, &va)?;
    let summary = TrainingSummary {
        selected: candidates[best].kind(),
        candidates: candidates
            .iter()
            .zip(&maps)
            .map(|(m, map)| CandidateSummary {
                kind: m.kind(),
                validation_map30: *map,
                rounds: m.meta.rounds,
                best_round: m.meta.best_round,
            })
            .collect(),
        train_patients: train.iter().map(|p| p.patient_id.clone()).collect(),
        validation_patients: val.iter().map(|p| p.patient_id.clone()).collect(),
        train_instances: tr.len(),
        validation_instances: va.len(),
    };
    run.write("model.json", &candidates[best].to_json()?)?;
    run.report("training.json", summary)
}

fn rank(run: &mut Run) -> Result<()> {
    let (o, kb, s) = run.knowledge()?;
    let cohort = run.cohort(&o)?;
    let model = RankModel::from_json(&read_text(&run.artifact("model.json", "train")?)?)?;
    let lists = match &run.opts.input {
        Some(p) => run.rankings(p, &o, false)?,
        None => run.rankings(&run.artifact("terms.jsonl", "standardize")?, &o, true)?,
    };
    let patients: BTreeMap<&str, &Patient> = cohort.iter().map(|p| (p.patient_id.as_str(), p)).collect();
    if let Some(p) = lists.keys().find(|p| !patients.contains_key(p.as_str())) {
        return Err(Error::Ingest(format!("ranked patient {p} is not in the cohort")));
    }
    let featurizer = Featurizer::new(model.schema.clone(), &o, &s, &kb);
    let rows = patients
        .par_iter()
        .map(|(pid, p)| {
            let candidates: BTreeSet<TermId> = lists.get(*pid).into_iter().flatten().cloned().collect();
            let ranked = rank_terms(&model, &featurizer, p, &candidates)?;
            Ok(RankedRow {
                patient_id: pid.to_string(),
                terms: ranked.iter().map(|r| r.term_id.clone()).collect(),
                scores: ranked.iter().map(|r| r.score).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run.write("ranked.jsonl", &to_jsonl(&rows)?)
}

fn gold(cohort: &[Patient]) -> BTreeMap<String, BTreeSet<TermId>> {
    cohort
        .iter()
        .map(|p| (p.patient_id.clone(), p.curated_terms.clone()))
        .collect()
}

fn evaluate(run: &mut Run) -> Result<()> {
    let (o, _, s) = run.knowledge()?;
    let cohort = run.cohort(&o)?;
    let (lists, stage) = match &run.opts.input {
        Some(p) => (run.rankings(p, &o, false)?, "external"),
        None => (run.rankings(&run.artifact("ranked.jsonl", "rank")?, &o, true)?, "prioritized"),
    };
    let report = evaluate_cohort(&lists, &gold(&cohort), &o, &s, &run.cfg.eval_config(), stage)?;
    run.write("metrics.csv", &metrics_csv(std::slice::from_ref(&report)))?;
    run.report("metrics.json", report)
}

fn ablate(run: &mut Run) -> Result<()> {
    let (o, _, s) = run.knowledge()?;
    let cohort = run.cohort(&o)?;
    let optional = |rel: &str| -> Result<Option<PathBuf>> {
        let p = run.out(rel);
        if p.exists() {
            run.check(&p)?;
            Ok(Some(p))
        } else {
            Ok(None)
        }
    };
    let exact = match optional("mentions.jsonl")? {
        Some(p) => {
            let lookup = exact_name_lookup(&o);
            let ex = CorpusExtraction::from_records(parse_jsonl::<MentionRecord>(&read_text(&p)?)?);
            Some(
                ex.mentions
                    .iter()
                    .map(|(pid, ms)| {
                        let mut seen = BTreeSet::new();
                        let terms = ms
                            .iter()
                            .filter_map(|m| lookup(&m.surface))
                            .filter(|t| seen.insert(t.clone()))
                            .collect();
                        (pid.clone(), terms)
                    })
                    .collect::<BTreeMap<String, Vec<TermId>>>(),
            )
        }
        None => None,
    };
    let standardized = optional("terms.jsonl")?.map(|p| run.rankings(&p, &o, true)).transpose()?;
    let ranked = optional("ranked.jsonl")?.map(|p| run.rankings(&p, &o, true)).transpose()?;
    let stages = [
        ("extraction".to_string(), exact.as_ref()),
        ("standardization".to_string(), standardized.as_ref()),
        ("prioritization".to_string(), ranked.as_ref()),
    ];
    let reports: Vec<MetricsReport> = ablation_run(&stages, &gold(&cohort), &o, &s, &run.cfg.eval_config())?;
    run.write("ablation.csv", &metrics_csv(&reports))?;
    run.report("ablation.json", reports)
}

fn permtest(run: &mut Run) -> Result<()> {
    let (o, _, s) = run.knowledge()?;
    let cohort = run.cohort(&o)?;
    let lists = run.rankings(&run.artifact("ranked.jsonl", "rank")?, &o, true)?;
    let report = permutation_delta(&lists, &gold(&cohort), &o, &s, &run.cfg.eval_config())?;
    run.write("permutation.csv", &delta_csv(&report))?;
    run.report("permutation.json", report)
}
