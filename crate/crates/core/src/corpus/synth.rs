//! Seeded synthetic cohorts and template-based clinical narratives.

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ClinicalNote, Patient, Sex};
use crate::error::{Error, Result};
use crate::ontology::{Ontology, TermId};
use crate::seed::substream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    /// Median curated terms per patient.
    pub median_terms: f64,
    /// Log-scale spread; 0.7574 puts the quartiles at 9 and 25 around 15.
    pub log_sigma: f64,
    pub max_terms: usize,
    /// Curated terms are drawn from terms at least this deep.
    pub min_depth: usize,
    pub max_age: f64,
    pub sex_weights: [f64; 3],
    pub categories: Vec<String>,
    pub id_prefix: String,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            median_terms: 15.0,
            log_sigma: 0.7574,
            max_terms: 80,
            min_depth: 3,
            max_age: 70.0,
            sex_weights: [0.48, 0.48, 0.04],
            categories: [
                "Neurology",
                "Musculoskeletal",
                "Cardiology",
                "Gastroenterology",
                "Immunology",
                "Other",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            id_prefix: "P".into(),
        }
    }
}

fn eligible_terms(o: &Ontology, min_depth: usize) -> Vec<TermId> {
    let deep: Vec<TermId> = o
        .live_terms()
        .filter(|t| o.depth(&t.id).is_ok_and(|d| d >= min_depth))
        .map(|t| t.id.clone())
        .collect();
    if deep.len() >= 30 {
        return deep;
    }
    o.live_terms()
        .filter(|t| &t.id != o.root())
        .map(|t| t.id.clone())
        .collect()
}

/// Draws `n` patients. Curated-term counts follow a discretized log-normal
/// around `median_terms`.
pub fn synth_cohort(o: &Ontology, n: usize, seed: u64, cfg: &CohortConfig) -> Vec<Patient> {
    if n == 0 {
        return Vec::new();
    }
    let pool = eligible_terms(o, cfg.min_depth);
    let mut rng = substream(seed, "synth_cohort", 0);
    let count_dist = Normal::new(cfg.median_terms.ln(), cfg.log_sigma).expect("finite sigma");
    let cap = cfg.max_terms.min(pool.len()).max(1);
    let sex_total: f64 = cfg.sex_weights.iter().sum();

    (0..n)
        .map(|i| {
            let raw = count_dist.sample(&mut rng).exp().round() as usize;
            let count = raw.clamp(1, cap);
            let curated: BTreeSet<TermId> = pool.choose_multiple(&mut rng, count).cloned().collect();
            let age = (rng.gen::<f64>() * cfg.max_age * 10.0).floor() / 10.0;
            let mut u = rng.gen::<f64>() * sex_total;
            let mut sex = Sex::Other;
            for (s, w) in Sex::ALL.iter().zip(cfg.sex_weights) {
                if u < w {
                    sex = *s;
                    break;
                }
                u -= w;
            }
            let category = cfg
                .categories
                .choose(&mut rng)
                .cloned()
                .unwrap_or_else(|| "Other".into());
            Patient {
                patient_id: format!("{}{:05}", cfg.id_prefix, i + 1),
                age_years: age,
                sex,
                symptom_category: category,
                curated_terms: curated,
            }
        })
        .collect()
}

/// General terms (shallower than `max_depth`, root excluded) that are not
/// curated for `p`, to be mentioned in narratives without being curated.
pub fn pick_distractors(o: &Ontology, p: &Patient, count: usize, max_depth: usize, seed: u64) -> Vec<TermId> {
    let pool: Vec<TermId> = o
        .live_terms()
        .filter(|t| &t.id != o.root() && !p.curated_terms.contains(&t.id))
        .filter(|t| o.depth(&t.id).is_ok_and(|d| d <= max_depth))
        .map(|t| t.id.clone())
        .collect();
    let mut rng = substream(seed, &format!("distractors/{}", p.patient_id), 0);
    let mut picked: Vec<TermId> = pool.choose_multiple(&mut rng, count.min(pool.len())).cloned().collect();
    picked.sort();
    picked
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticNarrative {
    /// Narrative with every curated term name wrapped in `<span>` tags.
    pub annotated: String,
    /// The same narrative without tags.
    pub note: ClinicalNote,
}

const MENTION_TEMPLATES: &[&str] = &[
    "Examination was notable for {}.",
    "The patient has a history of {}.",
    "Parents report {} since early childhood.",
    "Prior imaging showed evidence of {}.",
    "Review of outside records documents {}.",
    "At the last visit there was concern for {}.",
    "The referring team described {}.",
    "Findings on evaluation included {}.",
];

const FILLER: &[&str] = &[
    "Family history was reviewed in detail.",
    "Medications were reconciled at this visit.",
    "Vital signs were within normal limits.",
    "The plan was discussed with the family.",
    "Follow up was arranged in three months.",
    "Growth parameters were recorded.",
    "Immunizations are up to date.",
];

const NOTE_TYPES: &[&str] = &["Progress", "Consultations", "History and Physical", "Letter"];

/// Builds a template narrative in which each curated term name appears
/// verbatim once (span-tagged in the annotated variant). `distractors` are
/// mentioned untagged.
pub fn synth_narrative(p: &Patient, o: &Ontology, seed: u64, distractors: &[TermId]) -> Result<SyntheticNarrative> {
    if p.curated_terms.is_empty() {
        return Err(Error::Generation(format!("patient {} has no curated terms", p.patient_id)));
    }
    let mut rng = substream(seed, &format!("narrative/{}", p.patient_id), 0);

    let mut items: Vec<(String, bool)> = Vec::new();
    for (t, curated) in p
        .curated_terms
        .iter()
        .map(|t| (t, true))
        .chain(distractors.iter().map(|t| (t, false)))
    {
        let name = &o.term(t)?.name;
        if name.trim().is_empty() {
            return Err(Error::Generation(format!("term {t} has an empty name")));
        }
        items.push((name.clone(), curated));
    }
    items.shuffle(&mut rng);

    let sex = match p.sex {
        Sex::Female => "female",
        Sex::Male => "male",
        Sex::Other => "patient",
    };
    let mut annotated_sentences = vec![format!(
        "This {:.1}-year-old {sex} was referred for {} evaluation.",
        p.age_years,
        p.symptom_category.to_lowercase()
    )];
    for (name, curated) in &items {
        let tpl = MENTION_TEMPLATES.choose(&mut rng).unwrap();
        let mention = if *curated {
            format!("<span>{name}</span>")
        } else {
            name.clone()
        };
        annotated_sentences.push(tpl.replace("{}", &mention));
        if rng.gen_bool(0.3) {
            annotated_sentences.push(FILLER.choose(&mut rng).unwrap().to_string());
        }
    }

    let mut annotated = String::new();
    for (i, s) in annotated_sentences.iter().enumerate() {
        if i > 0 {
            annotated.push_str(if rng.gen_bool(0.15) { "\n\n" } else { " " });
        }
        annotated.push_str(s);
    }
    let plain = annotated.replace("<span>", "").replace("</span>", "");
    let base = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let timestamp = base + Days::new(rng.gen_range(0..730));
    let note = ClinicalNote {
        note_id: format!("{}-N1", p.patient_id),
        patient_id: p.patient_id.clone(),
        note_type: NOTE_TYPES.choose(&mut rng).unwrap().to_string(),
        timestamp,
        text: plain,
    };
    Ok(SyntheticNarrative { annotated, note })
}
