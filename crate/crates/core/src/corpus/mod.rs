//! Cohorts, clinical notes and note preprocessing.

mod segment;
mod synth;
mod world;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Ontology, TermId};

pub use segment::{chunk_note, split_sentences, DEFAULT_MAX_CHARS};
pub use synth::{
    pick_distractors, synth_cohort, synth_narrative, CohortConfig, SyntheticNarrative,
};
pub use world::{synth_world, SyntheticWorld, WorldConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
    #[serde(alias = "unknown")]
    Other,
}

impl Sex {
    pub const ALL: [Sex; 3] = [Sex::Female, Sex::Male, Sex::Other];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patient {
    pub patient_id: String,
    pub age_years: f64,
    pub sex: Sex,
    pub symptom_category: String,
    #[serde(default)]
    pub curated_terms: BTreeSet<TermId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalNote {
    pub note_id: String,
    pub patient_id: String,
    pub note_type: String,
    pub timestamp: NaiveDate,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteChunk {
    pub chunk_id: String,
    pub note_id: String,
    pub patient_id: String,
    pub text: String,
    pub start_offset: usize,
    pub end_offset: usize,
}

/// Checks cohort invariants: unique ids, curated terms live in `o`.
pub fn validate_cohort(cohort: &[Patient], o: &Ontology) -> Result<()> {
    let mut seen = BTreeSet::new();
    for p in cohort {
        if !seen.insert(&p.patient_id) {
            return Err(Error::Ingest(format!("duplicate patient {}", p.patient_id)));
        }
        if p.age_years.is_nan() || p.age_years < 0.0 {
            return Err(Error::Ingest(format!("invalid age for {}", p.patient_id)));
        }
        for t in &p.curated_terms {
            if !o.is_live(t) {
                return Err(Error::Ingest(format!(
                    "patient {} has unresolvable term {t}",
                    p.patient_id
                )));
            }
        }
    }
    Ok(())
}

/// Normalizes line endings, drops control characters other than tab and
/// newline, and trims trailing whitespace. Chunk offsets refer to this text.
pub fn clean_note_text(text: &str) -> String {
    let normalized = text.replace("\r\n", "\n").replace('\r', "\n");
    let kept: String = normalized
        .chars()
        .filter(|&c| c == '\n' || c == '\t' || !c.is_control())
        .collect();
    kept.trim_end().to_string()
}

/// Drops notes dated at or after their patient's cutoff, notes whose type
/// or text matches any exclusion pattern, and notes that are blank after
/// cleaning. Input order is preserved.
pub fn filter_notes(
    notes: &[ClinicalNote],
    exclude_patterns: &[String],
    cutoffs: &BTreeMap<String, NaiveDate>,
) -> Result<Vec<ClinicalNote>> {
    let patterns: Vec<Regex> = exclude_patterns
        .iter()
        .map(|p| Regex::new(p).map_err(|e| Error::Config(format!("invalid pattern {p:?}: {e}"))))
        .collect::<Result<_>>()?;
    Ok(notes
        .iter()
        .filter(|n| {
            cutoffs
                .get(&n.patient_id)
                .is_none_or(|cut| n.timestamp < *cut)
        })
        .filter(|n| {
            !patterns
                .iter()
                .any(|re| re.is_match(&n.note_type) || re.is_match(&n.text))
        })
        .filter(|n| !clean_note_text(&n.text).trim().is_empty())
        .cloned()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(id: &str, kind: &str, date: (i32, u32, u32), text: &str) -> ClinicalNote {
        ClinicalNote {
            note_id: id.into(),
            patient_id: "P1".into(),
            note_type: kind.into(),
            timestamp: NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap(),
            text: text.into(),
        }
    }

    #[test]
    fn cutoff_and_patterns() {
        let notes = vec![
            note("1", "Progress", (2020, 1, 1), "seen"),
            note("2", "Progress", (2021, 1, 1), "late"),
            note("3", "Scheduling", (2020, 2, 1), "appt"),
            note("4", "Consultation", (2020, 12, 31), "ok"),
        ];
        let cutoffs = BTreeMap::from([(
            "P1".to_string(),
            NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(),
        )]);
        let kept = filter_notes(&notes, &["(?i)schedul".to_string()], &cutoffs).unwrap();
        let ids: Vec<&str> = kept.iter().map(|n| n.note_id.as_str()).collect();
        assert_eq!(ids, vec!["1", "4"]);

        assert_eq!(filter_notes(&notes, &[], &BTreeMap::new()).unwrap(), notes);
        assert!(matches!(
            filter_notes(&notes, &["(".to_string()], &BTreeMap::new()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn cleaning() {
        assert_eq!(clean_note_text("a\r\nb\u{7}c  \n"), "a\nbc");
    }

    #[test]
    fn patient_jsonl_shape() {
        let line = r#"{"patient_id":"P1","age_years":4.5,"sex":"unknown","symptom_category":"Neurology","curated_terms":["HP:0000545"]}"#;
        let p: Patient = serde_json::from_str(line).unwrap();
        assert_eq!(p.sex, Sex::Other);
        assert_eq!(p.curated_terms.len(), 1);
    }
}
