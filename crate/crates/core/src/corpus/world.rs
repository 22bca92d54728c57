//! Synthetic HPO-like ontology and annotation knowledgebase.
//!
//! The generated hierarchy is a balanced tree (plus a few extra is_a edges)
//! whose leaves carry few disease annotations, so specificity grows with
//! depth the way it does in real annotation corpora. Term names are two- or
//! three-word phrases built around a unique invented noun, so no name is a
//! word-bounded substring of another.

use std::collections::BTreeSet;
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationKB, Source};
use crate::error::Result;
use crate::ontology::{Ontology, TermId, TermRecord};
use crate::seed::substream;

const ADJECTIVES: &[&str] = &[
    "Abnormal", "Congenital", "Progressive", "Bilateral", "Recurrent", "Chronic", "Focal",
    "Diffuse", "Episodic", "Severe", "Asymmetric", "Hypoplastic", "Dysplastic", "Cystic",
    "Sclerotic", "Atrophic", "Hypertrophic", "Intermittent", "Persistent", "Transient",
    "Segmental", "Generalized", "Lateral", "Medial", "Distal", "Proximal", "Nodular", "Fibrotic",
    "Calcified", "Ectopic",
];

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gl", "kr",
    "pl", "st", "th", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ae", "ou"];
const SUFFIXES: &[&str] = &["osis", "emia", "algia", "opathy", "itis", "oma", "ectasia", "iasis"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub systems: usize,
    pub groups_per_system: usize,
    pub subgroups_per_group: usize,
    pub leaves_per_subgroup: usize,
    pub extra_parent_rate: f64,
    pub synonym_rate: f64,
    pub obsolete_terms: usize,
    pub diseases: usize,
    pub genes: usize,
    pub omim_rate: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            systems: 10,
            groups_per_system: 4,
            subgroups_per_group: 4,
            leaves_per_subgroup: 5,
            extra_parent_rate: 0.05,
            synonym_rate: 0.3,
            obsolete_terms: 5,
            diseases: 300,
            genes: 150,
            omim_rate: 0.6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub terms: Vec<TermRecord>,
    pub disease_rows: Vec<(TermId, String, Source)>,
    pub gene_rows: Vec<(TermId, String)>,
}

impl SyntheticWorld {
    pub fn ontology(&self) -> Result<Ontology> {
        Ontology::from_records(self.terms.clone())
    }

    pub fn kb(&self, o: &Ontology) -> Result<AnnotationKB> {
        AnnotationKB::from_rows(
            self.disease_rows.iter().map(|(t, d, s)| (t, d.as_str(), *s)),
            self.gene_rows.iter().map(|(t, g)| (t, g.as_str())),
            o,
        )
    }

    pub fn to_obo(&self) -> String {
        let names: std::collections::HashMap<&TermId, &str> =
            self.terms.iter().map(|t| (&t.id, t.name.as_str())).collect();
        let mut out = String::from("format-version: 1.2\nontology: synthetic-hp\n");
        for t in &self.terms {
            let _ = write!(out, "\n[Term]\nid: {}\nname: {}\n", t.id, t.name);
            if !t.definition.is_empty() {
                let _ = writeln!(out, "def: \"{}\" []", escape_quoted(&t.definition));
            }
            for s in &t.synonyms {
                let _ = writeln!(out, "synonym: \"{}\" EXACT []", escape_quoted(s));
            }
            for p in &t.parents {
                let _ = writeln!(out, "is_a: {p} ! {}", names.get(p).copied().unwrap_or(""));
            }
            if t.obsolete {
                out.push_str("is_obsolete: true\n");
            }
        }
        out
    }

    pub fn disease_tsv(&self) -> String {
        let mut out = String::from("# term_id\tdisease_id\tsource\n");
        for (t, d, s) in &self.disease_rows {
            let _ = writeln!(out, "{t}\t{d}\t{s}");
        }
        out
    }

    pub fn gene_tsv(&self) -> String {
        let mut out = String::from("# term_id\tgene_symbol\n");
        for (t, g) in &self.gene_rows {
            let _ = writeln!(out, "{t}\t{g}");
        }
        out
    }
}

fn escape_quoted(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

struct NounGen {
    used: BTreeSet<String>,
}

impl NounGen {
    fn next<R: Rng>(&mut self, rng: &mut R) -> String {
        loop {
            let syllables = rng.gen_range(1..=2);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
            }
            w.push_str(ONSETS.choose(rng).unwrap());
            w.push_str(SUFFIXES.choose(rng).unwrap());
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

/// Generates a synthetic ontology plus disease and gene annotations.
pub fn synth_world(seed: u64, cfg: &WorldConfig) -> SyntheticWorld {
    let mut rng = substream(seed, "world", 0);
    let mut nouns = NounGen {
        used: BTreeSet::new(),
    };
    let mut next_id = 1_000_000u32;
    let mut fresh_id = || {
        next_id += 1;
        TermId::parse(&format!("HP:{next_id:07}")).expect("valid id")
    };

    let root = TermId::parse("HP:0000001").expect("valid id");
    let mut terms = vec![TermRecord {
        id: root.clone(),
        name: "All".into(),
        synonyms: Vec::new(),
        definition: "Root of all terms.".into(),
        parents: Vec::new(),
        obsolete: false,
    }];

    let mut make = |parent: &TermId, name: String, noun: &str, rng: &mut rand_chacha::ChaCha8Rng, synonym_rate: f64| {
        let id = fresh_id();
        let mut synonyms = Vec::new();
        if rng.gen_bool(synonym_rate) {
            let first = name.split(' ').next().unwrap_or("");
            let alt = ADJECTIVES
                .iter()
                .filter(|a| **a != first)
                .collect::<Vec<_>>()
                .choose(rng)
                .map(|a| a.to_lowercase())
                .unwrap();
            synonyms.push(format!("{alt} {noun}"));
        }
        TermRecord {
            id,
            definition: format!("A phenotypic anomaly involving the {noun}."),
            name,
            synonyms,
            parents: vec![parent.clone()],
            obsolete: false,
        }
    };

    // per system: subgroup ids (for extra edges) and leaves
    let mut leaves: Vec<(usize, TermId)> = Vec::new();
    let mut subgroups: Vec<Vec<TermId>> = Vec::new();
    let mut system_ids = Vec::new();
    for s in 0..cfg.systems {
        let noun = nouns.next(&mut rng);
        let sys = make(&root, format!("Abnormality of {noun}"), &noun, &mut rng, cfg.synonym_rate);
        let sys_id = sys.id.clone();
        system_ids.push(sys_id.clone());
        terms.push(sys);
        subgroups.push(Vec::new());
        for _ in 0..cfg.groups_per_system {
            let noun = nouns.next(&mut rng);
            let adj = ADJECTIVES.choose(&mut rng).unwrap();
            let group = make(&sys_id, format!("{adj} {noun}"), &noun, &mut rng, cfg.synonym_rate);
            let group_id = group.id.clone();
            terms.push(group);
            for _ in 0..cfg.subgroups_per_group {
                let noun = nouns.next(&mut rng);
                let adj = ADJECTIVES.choose(&mut rng).unwrap();
                let sub = make(&group_id, format!("{adj} {noun}"), &noun, &mut rng, cfg.synonym_rate);
                let sub_id = sub.id.clone();
                subgroups[s].push(sub_id.clone());
                terms.push(sub);
                for _ in 0..cfg.leaves_per_subgroup {
                    let noun = nouns.next(&mut rng);
                    let adj = ADJECTIVES.choose(&mut rng).unwrap();
                    let leaf = make(&sub_id, format!("{adj} {noun}"), &noun, &mut rng, cfg.synonym_rate);
                    leaves.push((s, leaf.id.clone()));
                    terms.push(leaf);
                }
            }
        }
    }

    // extra is_a edges from leaves to another subgroup of the same system
    for t in terms.iter_mut() {
        let Some((s, _)) = leaves.iter().find(|(_, id)| *id == t.id) else {
            continue;
        };
        if subgroups[*s].len() > 1 && rng.gen_bool(cfg.extra_parent_rate) {
            let extra = subgroups[*s].choose(&mut rng).unwrap().clone();
            if !t.parents.contains(&extra) {
                t.parents.push(extra);
            }
        }
    }

    for _ in 0..cfg.obsolete_terms {
        let noun = nouns.next(&mut rng);
        terms.push(TermRecord {
            id: fresh_id(),
            name: format!("obsolete Former {noun}"),
            synonyms: Vec::new(),
            definition: String::new(),
            parents: Vec::new(),
            obsolete: true,
        });
    }

    // diseases: each picks a system and annotates a handful of its leaves,
    // occasionally a subgroup
    let mut by_system: Vec<Vec<TermId>> = vec![Vec::new(); cfg.systems];
    for (s, id) in &leaves {
        by_system[*s].push(id.clone());
    }
    let mut disease_rows = Vec::new();
    let mut gene_rows = Vec::new();
    for d in 0..cfg.diseases {
        let source = if rng.gen_bool(cfg.omim_rate) {
            Source::Omim
        } else {
            Source::Orphanet
        };
        let disease_id = match source {
            Source::Omim => format!("OMIM:{}", 600_000 + d),
            Source::Orphanet => format!("ORPHA:{}", 1000 + d),
        };
        let s = rng.gen_range(0..cfg.systems);
        let n_terms = rng.gen_range(3..=8);
        let mut annotated = BTreeSet::new();
        for _ in 0..n_terms {
            let t = if rng.gen_bool(0.8) || subgroups[s].is_empty() {
                by_system[s].choose(&mut rng).unwrap().clone()
            } else {
                subgroups[s].choose(&mut rng).unwrap().clone()
            };
            annotated.insert(t);
        }
        let n_genes = rng.gen_range(1..=2);
        let genes: Vec<String> = (0..n_genes)
            .map(|_| format!("GENE{}", rng.gen_range(1..=cfg.genes)))
            .collect();
        for t in annotated {
            disease_rows.push((t.clone(), disease_id.clone(), source));
            for g in &genes {
                gene_rows.push((t.clone(), g.clone()));
            }
        }
    }
    disease_rows.sort();
    disease_rows.dedup();
    gene_rows.sort();
    gene_rows.dedup();

    SyntheticWorld {
        terms,
        disease_rows,
        gene_rows,
    }
}
