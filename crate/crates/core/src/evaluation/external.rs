//! JSONL import and export of per-patient term rankings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Ontology, TermId};

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalRanking {
    pub patient_id: String,
    pub terms: Vec<String>,
    /// False when the list carries no rank order.
    #[serde(default = "yes")]
    pub ordered: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportIssue {
    pub line: usize,
    pub patient_id: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ImportedRankings {
    pub lists: BTreeMap<String, Vec<TermId>>,
    /// Patients whose lists are unordered and should be ranked before use.
    pub unordered: Vec<String>,
    /// Rejected rows; none of their terms are kept.
    pub issues: Vec<ImportIssue>,
}

/// Parses JSONL rankings and validates every id against the ontology.
/// Malformed rows, unknown or obsolete ids and repeated patients are
/// flagged per row rather than failing the import.
pub fn import_external_ranking(text: &str, o: &Ontology) -> ImportedRankings {
    let mut out = ImportedRankings::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut flag = |pid: Option<&str>, message: String| {
            out.issues.push(ImportIssue {
                line: i + 1,
                patient_id: pid.map(str::to_string),
                message,
            })
        };
        let row: ExternalRanking = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                flag(None, e.to_string());
                continue;
            }
        };
        let pid = Some(row.patient_id.as_str());
        let terms: Result<Vec<TermId>> = row
            .terms
            .iter()
            .map(|t| {
                let id = TermId::parse(t)?;
                o.term(&id)?;
                if !o.is_live(&id) {
                    return Err(Error::ObsoleteTerm(t.clone()));
                }
                Ok(id)
            })
            .collect();
        match terms {
            Err(e) => flag(pid, e.to_string()),
            Ok(_) if out.lists.contains_key(&row.patient_id) => flag(pid, "duplicate patient".into()),
            Ok(terms) => {
                if !row.ordered {
                    out.unordered.push(row.patient_id.clone());
                }
                out.lists.insert(row.patient_id, terms);
            }
        }
    }
    out
}

pub fn export_rankings(lists: &BTreeMap<String, Vec<TermId>>) -> Result<String> {
    let rows: Vec<ExternalRanking> = lists
        .iter()
        .map(|(p, l)| ExternalRanking {
            patient_id: p.clone(),
            terms: l.iter().map(|t| t.as_str().to_string()).collect(),
            ordered: true,
        })
        .collect();
    crate::io::to_jsonl(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::toy::*;

    #[test]
    fn empty_file_gives_empty_map() {
        let r = import_external_ranking("", &toy());
        assert!(r.lists.is_empty() && r.issues.is_empty());
    }

    #[test]
    fn bad_rows_are_flagged() {
        let text = format!(
            "{{\"patient_id\":\"P1\",\"terms\":[\"{A1}\",\"HP:9999999\"]}}\n\
             not json\n\
             {{\"patient_id\":\"P2\",\"terms\":[\"{B}\",\"{A}\"],\"ordered\":false}}\n\
             {{\"patient_id\":\"P2\",\"terms\":[]}}\n"
        );
        let r = import_external_ranking(&text, &toy());
        assert_eq!(r.lists.keys().collect::<Vec<_>>(), vec!["P2"]);
        assert_eq!(r.unordered, vec!["P2".to_string()]);
        let lines: Vec<usize> = r.issues.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![1, 2, 4]);
    }

    #[test]
    fn round_trip_is_identity() {
        let o = toy();
        let lists = BTreeMap::from([
            ("P1".to_string(), vec![id(A1), id(B), id(A2)]),
            ("P2".to_string(), vec![]),
        ]);
        let r = import_external_ranking(&export_rankings(&lists).unwrap(), &o);
        assert_eq!(r.lists, lists);
        assert!(r.issues.is_empty());
    }
}
