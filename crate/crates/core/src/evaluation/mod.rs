//! Top-k metrics, bootstrap intervals, permutation baselines and ablations.

mod external;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{LinMatrix, Ontology, OntologyStats, TermId};
use crate::seed::substream;

pub use external::{export_rankings, import_external_ranking, ExternalRanking, ImportIssue, ImportedRankings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub cutoffs: Vec<usize>,
    pub bootstrap_iterations: usize,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            cutoffs: vec![10, 20, 30, 40, 50],
            bootstrap_iterations: 1000,
            permutations: 200,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoffs.is_empty() || self.cutoffs[0] == 0 || self.cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "cutoffs must be positive and strictly ascending, got {:?}",
                self.cutoffs
            )));
        }
        if self.bootstrap_iterations == 0 || self.permutations == 0 {
            return Err(Error::Config("bootstrap iterations and permutations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// The ranked list was empty, so precision is undefined (reported 0).
    pub empty: bool,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Precision, recall and F1 of the first `min(k, len)` terms by exact id.
pub fn topk_prf(ranked: &[TermId], gold: &BTreeSet<TermId>, k: usize) -> Prf {
    let top = &ranked[..k.min(ranked.len())];
    let hits = top.iter().filter(|t| gold.contains(*t)).count() as f64;
    let precision = if top.is_empty() { 0.0 } else { hits / top.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { hits / gold.len() as f64 };
    Prf {
        precision,
        recall,
        f1: f1(precision, recall),
        empty: top.is_empty(),
    }
}

const METRICS: [&str; 6] = ["precision", "recall", "f1", "lin_similarity", "mean_fn", "mean_fp"];

/// Metrics of one patient's list, seen through a row order.
struct PatientCase {
    gold_len: usize,
    is_gold: Vec<bool>,
    lin: LinMatrix,
}

impl PatientCase {
    fn new(o: &Ontology, s: &OntologyStats, list: &[TermId], gold: &BTreeSet<TermId>) -> Result<Self> {
        let cols: Vec<TermId> = gold.iter().cloned().collect();
        Ok(PatientCase {
            gold_len: gold.len(),
            is_gold: list.iter().map(|t| gold.contains(t)).collect(),
            lin: LinMatrix::new(o, s, list, &cols)?,
        })
    }

    /// `[precision, recall, f1, lin, fn, fp]` per cutoff.
    fn metrics(&self, order: &[usize], cutoffs: &[usize]) -> Vec<[f64; 6]> {
        cutoffs
            .iter()
            .map(|&k| {
                let top = &order[..k.min(order.len())];
                let hits = top.iter().filter(|&&i| self.is_gold[i]).count();
                let p = if top.is_empty() { 0.0 } else { hits as f64 / top.len() as f64 };
                let r = hits as f64 / self.gold_len as f64;
                [
                    p,
                    r,
                    f1(p, r),
                    self.lin.best_match_average(top),
                    (self.gold_len - hits) as f64,
                    (top.len() - hits) as f64,
                ]
            })
            .collect()
    }
}

fn dedup_keep_order(list: &[TermId]) -> Vec<TermId> {
    let mut seen = BTreeSet::new();
    list.iter().filter(|t| seen.insert(*t)).cloned().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub k: usize,
    pub precision: Estimate,
    pub recall: Estimate,
    pub f1: Estimate,
    pub lin_similarity: Estimate,
    pub mean_fn: Estimate,
    pub mean_fp: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub stage: String,
    #[serde(default)]
    pub model_id: Option<String>,
    pub seed: u64,
    pub cohort_size: usize,
    /// Patients with a ranked list but no gold terms.
    pub excluded_patients: usize,
    /// Evaluated patients whose list was empty.
    pub empty_lists: usize,
    pub bootstrap_iterations: usize,
    pub rows: Vec<MetricRow>,
}

/// Type-7 quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn column_means(rows: &[Vec<f64>], pick: impl Iterator<Item = usize>) -> Vec<f64> {
    let width = rows.first().map_or(0, Vec::len);
    let mut sums = vec![0.0; width];
    let mut n = 0usize;
    for i in pick {
        for (s, v) in sums.iter_mut().zip(&rows[i]) {
            *s += v;
        }
        n += 1;
    }
    sums.iter().map(|s| s / n.max(1) as f64).collect()
}

/// Point means and 95% percentile intervals of per-patient value vectors,
/// resampling patients with replacement. Replicate `r` draws from its own
/// seeded stream, so results do not depend on thread count.
pub fn bootstrap_means(rows: &[Vec<f64>], iterations: usize, seed: u64, stream: &str) -> (Vec<f64>, Vec<(f64, f64)>) {
    let n = rows.len();
    let point = column_means(rows, 0..n);
    if n == 0 {
        return (point, Vec::new());
    }
    let replicates: Vec<Vec<f64>> = (0..iterations)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, stream, r as u64);
            let picks: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            column_means(rows, picks.into_iter())
        })
        .collect();
    let intervals = (0..point.len())
        .map(|c| {
            let mut col: Vec<f64> = replicates.iter().map(|r| r[c]).collect();
            col.sort_by(f64::total_cmp);
            (quantile(&col, 0.025), quantile(&col, 0.975))
        })
        .collect();
    (point, intervals)
}

struct Cohort {
    ids: Vec<String>,
    cases: Vec<PatientCase>,
    lists: Vec<Vec<TermId>>,
    excluded: usize,
}

/// Patients with gold terms; those without a list are evaluated with an
/// empty one. Lists of patients without gold are excluded and counted.
fn prepare(
    ranked: &BTreeMap<String, Vec<TermId>>,
    gold: &BTreeMap<String, BTreeSet<TermId>>,
    o: &Ontology,
    s: &OntologyStats,
) -> Result<Cohort> {
    let excluded = ranked
        .keys()
        .filter(|p| gold.get(*p).is_none_or(|g| g.is_empty()))
        .count();
    let ids: Vec<String> = gold
        .iter()
        .filter(|(_, g)| !g.is_empty())
        .map(|(p, _)| p.clone())
        .collect();
    let lists: Vec<Vec<TermId>> = ids
        .iter()
        .map(|p| ranked.get(p).map(|l| dedup_keep_order(l)).unwrap_or_default())
        .collect();
    let cases = ids
        .par_iter()
        .zip(&lists)
        .map(|(p, l)| PatientCase::new(o, s, l, &gold[p]))
        .collect::<Result<_>>()?;
    Ok(Cohort {
        ids,
        cases,
        lists,
        excluded,
    })
}

fn estimate(value: f64, ci: Option<(f64, f64)>) -> Estimate {
    Estimate {
        value,
        lo: ci.map(|c| c.0),
        hi: ci.map(|c| c.1),
    }
}

/// Patient-level means per cutoff with bootstrap intervals.
pub fn evaluate_cohort(
    ranked: &BTreeMap<String, Vec<TermId>>,
    gold: &BTreeMap<String, BTreeSet<TermId>>,
    o: &Ontology,
    s: &OntologyStats,
    cfg: &EvalConfig,
    stage: &str,
) -> Result<MetricsReport> {
    cfg.validate()?;
    let cohort = prepare(ranked, gold, o, s)?;
    if cohort.excluded > 0 {
        log::warn!("{} patients without gold terms were excluded", cohort.excluded);
    }
    let per_patient: Vec<Vec<f64>> = cohort
        .cases
        .par_iter()
        .map(|c| {
            let order: Vec<usize> = (0..c.is_gold.len()).collect();
            c.metrics(&order, &cfg.cutoffs).into_iter().flatten().collect()
        })
        .collect();
    let (point, ci) = bootstrap_means(&per_patient, cfg.bootstrap_iterations, cfg.seed, &format!("bootstrap/{stage}"));
    let width = METRICS.len();
    let rows = cfg
        .cutoffs
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let e = |m: usize| {
                let c = j * width + m;
                estimate(point.get(c).copied().unwrap_or(0.0), ci.get(c).copied())
            };
            MetricRow {
                k,
                precision: e(0),
                recall: e(1),
                f1: e(2),
                lin_similarity: e(3),
                mean_fn: e(4),
                mean_fp: e(5),
            }
        })
        .collect();
    Ok(MetricsReport {
        stage: stage.to_string(),
        model_id: None,
        seed: cfg.seed,
        cohort_size: cohort.ids.len(),
        excluded_patients: cohort.excluded,
        empty_lists: cohort.lists.iter().filter(|l| l.is_empty()).count(),
        bootstrap_iterations: cfg.bootstrap_iterations,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub k: usize,
    pub metric: String,
    pub prioritized: f64,
    pub permuted: f64,
    pub delta: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub seed: u64,
    pub cohort_size: usize,
    pub permutations: usize,
    pub bootstrap_iterations: usize,
    pub rows: Vec<DeltaRow>,
}

impl DeltaReport {
    pub fn row(&self, k: usize, metric: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.k == k && r.metric == metric)
    }
}

const DELTA_METRICS: usize = 4;

/// Prioritized metrics minus their mean over random orderings of the same
/// term set, per patient, then bootstrapped over patients.
pub fn permutation_delta(
    ranked: &BTreeMap<String, Vec<TermId>>,
    gold: &BTreeMap<String, BTreeSet<TermId>>,
    o: &Ontology,
    s: &OntologyStats,
    cfg: &EvalConfig,
) -> Result<DeltaReport> {
    cfg.validate()?;
    let cohort = prepare(ranked, gold, o, s)?;
    let nk = cfg.cutoffs.len();
    // per patient: [prioritized (nk*4), permuted mean (nk*4), delta (nk*4)]
    let per_patient: Vec<Vec<f64>> = cohort
        .ids
        .par_iter()
        .zip(&cohort.cases)
        .map(|(pid, case)| {
            let n = case.is_gold.len();
            let mut order: Vec<usize> = (0..n).collect();
            let base: Vec<f64> = case.metrics(&order, &cfg.cutoffs).iter().flat_map(|m| m[..DELTA_METRICS].to_vec()).collect();
            let mut acc = vec![0.0; nk * DELTA_METRICS];
            let mut rng = substream(cfg.seed, &format!("permutation/{pid}"), 0);
            for _ in 0..cfg.permutations {
                order.shuffle(&mut rng);
                for (a, m) in acc.iter_mut().zip(case.metrics(&order, &cfg.cutoffs).iter().flat_map(|m| m[..DELTA_METRICS].to_vec())) {
                    *a += m;
                }
            }
            let permuted: Vec<f64> = acc.iter().map(|a| a / cfg.permutations as f64).collect();
            let delta: Vec<f64> = base.iter().zip(&permuted).map(|(b, p)| b - p).collect();
            [base, permuted, delta].concat()
        })
        .collect();
    let (point, ci) = bootstrap_means(&per_patient, cfg.bootstrap_iterations, cfg.seed, "bootstrap/delta");
    let block = nk * DELTA_METRICS;
    let mut rows = Vec::new();
    for (j, &k) in cfg.cutoffs.iter().enumerate() {
        for (m, name) in METRICS[..DELTA_METRICS].iter().enumerate() {
            let c = j * DELTA_METRICS + m;
            rows.push(DeltaRow {
                k,
                metric: name.to_string(),
                prioritized: point.get(c).copied().unwrap_or(0.0),
                permuted: point.get(block + c).copied().unwrap_or(0.0),
                delta: estimate(point.get(2 * block + c).copied().unwrap_or(0.0), ci.get(2 * block + c).copied()),
            });
        }
    }
    Ok(DeltaReport {
        seed: cfg.seed,
        cohort_size: cohort.ids.len(),
        permutations: cfg.permutations,
        bootstrap_iterations: cfg.bootstrap_iterations,
        rows,
    })
}

/// A named stage and its ranked lists, if the stage produced any.
pub type StageLists<'a> = (String, Option<&'a BTreeMap<String, Vec<TermId>>>);

/// One report per pipeline stage, all over the same gold patients. A stage
/// whose output is missing is a configuration error.
pub fn ablation_run(
    stages: &[StageLists<'_>],
    gold: &BTreeMap<String, BTreeSet<TermId>>,
    o: &Ontology,
    s: &OntologyStats,
    cfg: &EvalConfig,
) -> Result<Vec<MetricsReport>> {
    stages
        .iter()
        .map(|(name, lists)| {
            let lists = lists.ok_or_else(|| Error::Config(format!("stage {name} has no artifact")))?;
            let shared: BTreeMap<String, Vec<TermId>> = lists
                .iter()
                .filter(|(p, _)| gold.contains_key(*p))
                .map(|(p, l)| (p.clone(), l.clone()))
                .collect();
            evaluate_cohort(&shared, gold, o, s, cfg, name)
        })
        .collect()
}

/// Resolves mentions by exact, case-insensitive term name only.
pub fn exact_name_lookup(o: &Ontology) -> impl Fn(&str) -> Option<TermId> + '_ {
    let names: BTreeMap<String, TermId> = o
        .live_terms()
        .map(|t| (t.name.to_lowercase(), t.id.clone()))
        .collect();
    move |surface: &str| names.get(&surface.trim().to_lowercase()).cloned()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("stage,k,patients");
    for m in METRICS {
        out.push_str(&format!(",{m},{m}_lo,{m}_hi"));
    }
    out.push('\n');
    for r in reports {
        for row in &r.rows {
            out.push_str(&format!("{},{},{}", r.stage, row.k, r.cohort_size));
            for e in [&row.precision, &row.recall, &row.f1, &row.lin_similarity, &row.mean_fn, &row.mean_fp] {
                out.push_str(&format!(",{},{},{}", e.value, fmt_opt(e.lo), fmt_opt(e.hi)));
            }
            out.push('\n');
        }
    }
    out
}

pub fn delta_csv(report: &DeltaReport) -> String {
    let mut out = String::from("k,metric,prioritized,permuted,delta,delta_lo,delta_hi\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.k,
            r.metric,
            r.prioritized,
            r.permuted,
            r.delta.value,
            fmt_opt(r.delta.lo),
            fmt_opt(r.delta.hi)
        ));
    }
    out
}
