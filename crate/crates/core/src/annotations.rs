//! Disease and gene annotation knowledgebases and per-term rarity features.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Ontology, OntologyStats, TermId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Omim,
    Orphanet,
}

impl Source {
    pub const ALL: [Source; 2] = [Source::Omim, Source::Orphanet];

    pub fn parse(s: &str) -> Option<Source> {
        match s {
            "omim" => Some(Source::Omim),
            "orphanet" => Some(Source::Orphanet),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Omim => "omim",
            Source::Orphanet => "orphanet",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub omim: usize,
    pub orphanet: usize,
    pub genes: usize,
}

impl Totals {
    pub fn diseases(&self, source: Source) -> usize {
        match source {
            Source::Omim => self.omim,
            Source::Orphanet => self.orphanet,
        }
    }
}

/// Deduplicated term→disease (per source) and term→gene maps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnnotationKB {
    disease_annots: BTreeMap<Source, BTreeMap<TermId, BTreeSet<String>>>,
    gene_annots: BTreeMap<TermId, BTreeSet<String>>,
    totals: Totals,
}

fn data_rows(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

impl AnnotationKB {
    /// Parses `term_id<TAB>disease_id<TAB>source` and `term_id<TAB>gene_symbol`
    /// rows. `#` lines are comments.
    pub fn load(disease_tsv: &str, gene_tsv: &str, o: &Ontology) -> Result<Self> {
        let mut kb = AnnotationKB::default();
        let mut unresolved = Vec::new();

        for (line, row) in data_rows(disease_tsv) {
            let fields: Vec<&str> = row.split('\t').map(str::trim).collect();
            let [term, disease, source] = fields[..] else {
                return Err(Error::Line {
                    line,
                    message: format!("expected 3 tab-separated fields, got {}", fields.len()),
                });
            };
            let source = Source::parse(source).ok_or_else(|| Error::Line {
                line,
                message: format!("unknown source {source:?}"),
            })?;
            if disease.is_empty() {
                return Err(Error::Line {
                    line,
                    message: "empty disease id".into(),
                });
            }
            match TermId::parse(term) {
                Ok(t) if o.contains(&t) => kb.add_disease(t, disease, source),
                _ => unresolved.push(format!("disease line {line}: {term}")),
            }
        }
        for (line, row) in data_rows(gene_tsv) {
            let fields: Vec<&str> = row.split('\t').map(str::trim).collect();
            let [term, gene] = fields[..] else {
                return Err(Error::Line {
                    line,
                    message: format!("expected 2 tab-separated fields, got {}", fields.len()),
                });
            };
            if gene.is_empty() {
                return Err(Error::Line {
                    line,
                    message: "empty gene symbol".into(),
                });
            }
            match TermId::parse(term) {
                Ok(t) if o.contains(&t) => kb.add_gene(t, gene),
                _ => unresolved.push(format!("gene line {line}: {term}")),
            }
        }
        if !unresolved.is_empty() {
            return Err(Error::Ingest(format!(
                "unresolvable term ids: {}",
                unresolved.join("; ")
            )));
        }
        kb.refresh_totals();
        Ok(kb)
    }

    /// Builds a KB from in-memory rows; every term must exist in `o`.
    pub fn from_rows<'a>(
        diseases: impl IntoIterator<Item = (&'a TermId, &'a str, Source)>,
        genes: impl IntoIterator<Item = (&'a TermId, &'a str)>,
        o: &Ontology,
    ) -> Result<Self> {
        let mut kb = AnnotationKB::default();
        for (t, d, s) in diseases {
            o.term(t)?;
            kb.add_disease(t.clone(), d, s);
        }
        for (t, g) in genes {
            o.term(t)?;
            kb.add_gene(t.clone(), g);
        }
        kb.refresh_totals();
        Ok(kb)
    }

    fn add_disease(&mut self, term: TermId, disease: &str, source: Source) {
        self.disease_annots
            .entry(source)
            .or_default()
            .entry(term)
            .or_default()
            .insert(disease.to_string());
    }

    fn add_gene(&mut self, term: TermId, gene: &str) {
        self.gene_annots
            .entry(term)
            .or_default()
            .insert(gene.to_string());
    }

    fn refresh_totals(&mut self) {
        let distinct = |s: Source| -> usize {
            self.disease_annots
                .get(&s)
                .map(|m| m.values().flatten().collect::<BTreeSet<_>>().len())
                .unwrap_or(0)
        };
        self.totals = Totals {
            omim: distinct(Source::Omim),
            orphanet: distinct(Source::Orphanet),
            genes: self
                .gene_annots
                .values()
                .flatten()
                .collect::<BTreeSet<_>>()
                .len(),
        };
    }

    pub fn totals(&self) -> &Totals {
        &self.totals
    }

    /// Distinct (source, disease) pairs.
    pub fn total_diseases(&self) -> usize {
        self.totals.omim + self.totals.orphanet
    }

    pub fn diseases(&self, source: Source, term: &TermId) -> Option<&BTreeSet<String>> {
        self.disease_annots.get(&source)?.get(term)
    }

    pub fn genes(&self, term: &TermId) -> Option<&BTreeSet<String>> {
        self.gene_annots.get(term)
    }

    /// Iterates `(term, disease, source)` rows in a stable order.
    pub fn disease_rows(&self) -> impl Iterator<Item = (&TermId, &str, Source)> + '_ {
        self.disease_annots.iter().flat_map(|(&s, m)| {
            m.iter()
                .flat_map(move |(t, ds)| ds.iter().map(move |d| (t, d.as_str(), s)))
        })
    }

    pub fn gene_rows(&self) -> impl Iterator<Item = (&TermId, &str)> + '_ {
        self.gene_annots
            .iter()
            .flat_map(|(t, gs)| gs.iter().map(move |g| (t, g.as_str())))
    }

    /// Directly annotated live term indices for each disease of `source`
    /// (all sources when `None`), one list per disease.
    pub(crate) fn disease_term_lists(&self, o: &Ontology, source: Option<Source>) -> Vec<Vec<usize>> {
        let mut by_disease: BTreeMap<(Source, &str), Vec<usize>> = BTreeMap::new();
        for (t, d, s) in self.disease_rows() {
            if source.is_some_and(|want| want != s) {
                continue;
            }
            let entry = by_disease.entry((s, d)).or_default();
            if let Ok(i) = o.live_idx(t) {
                entry.push(i);
            }
        }
        by_disease.into_values().collect()
    }

    fn gene_term_lists(&self, o: &Ontology) -> Vec<Vec<usize>> {
        let mut by_gene: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (t, g) in self.gene_rows() {
            let entry = by_gene.entry(g).or_default();
            if let Ok(i) = o.live_idx(t) {
                entry.push(i);
            }
        }
        by_gene.into_values().collect()
    }

    fn direct_disease_count(&self, source: Source, term: &TermId) -> usize {
        self.diseases(source, term).map_or(0, BTreeSet::len)
    }
}

/// `-ln(d / D)`; at `d = 0` the smoothed `-ln((d + 1) / (D + 1))`.
pub fn idf_value(d: usize, total: usize) -> f64 {
    if d == 0 {
        -(1.0 / (total as f64 + 1.0)).ln()
    } else {
        -(d as f64 / total as f64).ln()
    }
}

/// Inverse document frequency of `term` among the diseases of `source`.
pub fn idf(kb: &AnnotationKB, o: &Ontology, source: Source, term: &TermId, propagate: bool) -> Result<f64> {
    let total = kb.totals.diseases(source);
    if total == 0 {
        return Err(Error::EmptySource(source.to_string()));
    }
    let d = if propagate {
        let i = o.live_idx(term)?;
        o.propagated_counts(kb.disease_term_lists(o, Some(source)))[i]
    } else {
        o.term(term)?;
        kb.direct_disease_count(source, term)
    };
    Ok(idf_value(d, total))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermFeatureRow {
    pub term_id: TermId,
    pub ic: f64,
    pub gene_count: usize,
    pub gene_fraction: f64,
    pub disease_count: usize,
    pub disease_fraction: f64,
    pub idf_omim: f64,
    pub idf_orphanet: f64,
}

pub const FEATURE_CSV_HEADER: &str =
    "term_id,ic,gene_count,gene_fraction,disease_count,disease_fraction,idf_omim,idf_orphanet";

/// Descendant-propagated counts for every term, computed once.
struct PropagatedCounts {
    genes: Vec<usize>,
    omim: Vec<usize>,
    orphanet: Vec<usize>,
}

impl PropagatedCounts {
    fn new(o: &Ontology, kb: &AnnotationKB) -> Self {
        PropagatedCounts {
            genes: o.propagated_counts(kb.gene_term_lists(o)),
            omim: o.propagated_counts(kb.disease_term_lists(o, Some(Source::Omim))),
            orphanet: o.propagated_counts(kb.disease_term_lists(o, Some(Source::Orphanet))),
        }
    }

    fn row(&self, o: &Ontology, s: &OntologyStats, kb: &AnnotationKB, i: usize) -> TermFeatureRow {
        let totals = kb.totals();
        let fraction = |c: usize, t: usize| if t == 0 { 0.0 } else { c as f64 / t as f64 };
        // an empty source carries no rarity signal
        let source_idf = |c: usize, t: usize| if t == 0 { 0.0 } else { idf_value(c, t) };
        let disease_count = s.count_at(i);
        TermFeatureRow {
            term_id: o.id_at(i).clone(),
            ic: s.ic_at(i),
            gene_count: self.genes[i],
            gene_fraction: fraction(self.genes[i], totals.genes),
            disease_count,
            disease_fraction: fraction(disease_count, s.total_diseases()),
            idf_omim: source_idf(self.omim[i], totals.omim),
            idf_orphanet: source_idf(self.orphanet[i], totals.orphanet),
        }
    }
}

pub fn featurize_term(o: &Ontology, s: &OntologyStats, kb: &AnnotationKB, term: &TermId) -> Result<TermFeatureRow> {
    let i = o.live_idx(term)?;
    Ok(PropagatedCounts::new(o, kb).row(o, s, kb, i))
}

/// One row per non-obsolete term, ordered by id.
pub fn feature_table(o: &Ontology, s: &OntologyStats, kb: &AnnotationKB) -> Vec<TermFeatureRow> {
    let counts = PropagatedCounts::new(o, kb);
    (0..o.len())
        .filter(|&i| o.is_live_idx(i))
        .map(|i| counts.row(o, s, kb, i))
        .collect()
}

pub fn write_feature_csv<W: Write>(rows: &[TermFeatureRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{FEATURE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.term_id, r.ic, r.gene_count, r.gene_fraction, r.disease_count, r.disease_fraction, r.idf_omim, r.idf_orphanet
        )?;
    }
    Ok(())
}
