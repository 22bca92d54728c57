//! Patient-term feature vectors.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::annotations::{feature_table, AnnotationKB, TermFeatureRow};
use crate::corpus::{Patient, Sex};
use crate::error::{Error, Result};
use crate::ontology::{Ontology, OntologyStats, TermId};

pub const UNKNOWN_CATEGORY: &str = "unknown";

const TERM_FEATURES: [&str; 7] = [
    "ic",
    "gene_count",
    "gene_fraction",
    "disease_count",
    "disease_fraction",
    "idf_omim",
    "idf_orphanet",
];

/// Ordered feature names: age, sex one-hot, symptom category one-hot with a
/// trailing unknown slot, then the term features.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub categories: Vec<String>,
    pub names: Vec<String>,
}

impl FeatureSchema {
    pub fn new(categories: impl IntoIterator<Item = String>) -> Self {
        let mut cats: Vec<String> = categories
            .into_iter()
            .filter(|c| c != UNKNOWN_CATEGORY)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        cats.push(UNKNOWN_CATEGORY.into());
        let mut names = vec!["age_years".to_string()];
        names.extend(["sex_female", "sex_male", "sex_other"].map(String::from));
        names.extend(cats.iter().map(|c| format!("category_{c}")));
        names.extend(TERM_FEATURES.map(String::from));
        FeatureSchema { categories: cats, names }
    }

    /// Categories observed in the training cohort.
    pub fn from_cohort(cohort: &[Patient]) -> Self {
        Self::new(cohort.iter().map(|p| p.symptom_category.clone()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn category_slot(&self, category: &str) -> usize {
        self.categories
            .iter()
            .position(|c| c == category)
            .unwrap_or(self.categories.len() - 1)
    }

    pub fn patient_part(&self, p: &Patient) -> Vec<f64> {
        let mut v = vec![0.0; 4 + self.categories.len()];
        v[0] = p.age_years;
        let sex = match p.sex {
            Sex::Female => 0,
            Sex::Male => 1,
            Sex::Other => 2,
        };
        v[1 + sex] = 1.0;
        v[4 + self.category_slot(&p.symptom_category)] = 1.0;
        v
    }
}

pub fn term_part(row: &TermFeatureRow) -> [f64; 7] {
    [
        row.ic,
        row.gene_count as f64,
        row.gene_fraction,
        row.disease_count as f64,
        row.disease_fraction,
        row.idf_omim,
        row.idf_orphanet,
    ]
}

/// Combines a schema with the precomputed per-term feature table.
pub struct Featurizer {
    schema: FeatureSchema,
    table: HashMap<TermId, [f64; 7]>,
}

impl Featurizer {
    pub fn new(schema: FeatureSchema, o: &Ontology, s: &OntologyStats, kb: &AnnotationKB) -> Self {
        let table = feature_table(o, s, kb)
            .iter()
            .map(|r| (r.term_id.clone(), term_part(r)))
            .collect();
        Featurizer { schema, table }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn features(&self, p: &Patient, term: &TermId) -> Result<Vec<f64>> {
        let t = self.table.get(term).ok_or_else(|| Error::Featurize {
            patient: p.patient_id.clone(),
            term: term.to_string(),
            message: "term is unknown or obsolete".into(),
        })?;
        let mut v = self.schema.patient_part(p);
        v.extend_from_slice(t);
        Ok(v)
    }
}
