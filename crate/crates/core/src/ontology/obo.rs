use serde::Deserialize;

use super::{TermId, TermRecord};
use crate::error::{Error, Result};

/// Parses the `[Term]` stanzas of an OBO flat file. Other stanza types
/// (`[Typedef]`, ...) and unrecognized tags are skipped.
pub(super) fn parse_obo_records(text: &str) -> Result<Vec<TermRecord>> {
    let mut records = Vec::new();
    let mut current: Option<StanzaBuilder> = None;
    let mut term_stanzas = 0usize;

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('!') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            if let Some(b) = current.take() {
                records.push(b.finish()?);
            }
            if line == "[Term]" {
                term_stanzas += 1;
                current = Some(StanzaBuilder::new(term_stanzas));
            }
            continue;
        }
        let Some(b) = current.as_mut() else {
            continue;
        };
        let Some((tag, value)) = line.split_once(':') else {
            continue;
        };
        b.tag(tag.trim(), value.trim())?;
    }
    if let Some(b) = current.take() {
        records.push(b.finish()?);
    }
    if records.is_empty() {
        return Err(Error::Structure("no [Term] stanzas found".into()));
    }
    Ok(records)
}

struct StanzaBuilder {
    stanza: usize,
    id: Option<TermId>,
    name: Option<String>,
    synonyms: Vec<String>,
    definition: String,
    parents: Vec<TermId>,
    obsolete: bool,
}

impl StanzaBuilder {
    fn new(stanza: usize) -> Self {
        StanzaBuilder {
            stanza,
            id: None,
            name: None,
            synonyms: Vec::new(),
            definition: String::new(),
            parents: Vec::new(),
            obsolete: false,
        }
    }

    fn err(&self, message: String) -> Error {
        Error::Stanza {
            stanza: self.stanza,
            message,
        }
    }

    fn tag(&mut self, tag: &str, value: &str) -> Result<()> {
        match tag {
            "id" => {
                let id = TermId::parse(value).map_err(|_| self.err(format!("bad id {value:?}")))?;
                self.id = Some(id);
            }
            "name" => self.name = Some(value.to_string()),
            "synonym" => {
                let s = quoted(value).ok_or_else(|| self.err(format!("bad synonym {value:?}")))?;
                self.synonyms.push(s);
            }
            "def" => {
                self.definition =
                    quoted(value).ok_or_else(|| self.err(format!("bad def {value:?}")))?;
            }
            "is_a" => {
                let target = value
                    .split('!')
                    .next()
                    .and_then(|s| s.split_whitespace().next())
                    .unwrap_or("");
                let id =
                    TermId::parse(target).map_err(|_| self.err(format!("bad is_a {value:?}")))?;
                self.parents.push(id);
            }
            "is_obsolete" => self.obsolete = value.split_whitespace().next() == Some("true"),
            _ => {}
        }
        Ok(())
    }

    fn finish(self) -> Result<TermRecord> {
        let id = self
            .id
            .clone()
            .ok_or_else(|| self.err("missing id".into()))?;
        let name = match &self.name {
            Some(n) if !n.is_empty() => n.clone(),
            _ if self.obsolete => String::new(),
            _ => return Err(self.err(format!("missing name for {id}"))),
        };
        Ok(TermRecord {
            id,
            name,
            synonyms: self.synonyms,
            definition: self.definition,
            parents: self.parents,
            obsolete: self.obsolete,
        })
    }
}

/// Leading double-quoted string with `\"` and `\\` escapes.
fn quoted(value: &str) -> Option<String> {
    let rest = value.strip_prefix('"')?;
    let mut out = String::new();
    let mut chars = rest.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => out.push(chars.next()?),
            '"' => return Some(out),
            c => out.push(c),
        }
    }
    None
}

#[derive(Deserialize)]
struct JsonTerm {
    id: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    synonyms: Vec<String>,
    #[serde(default)]
    def: String,
    #[serde(default)]
    is_a: Vec<String>,
    #[serde(default)]
    is_obsolete: bool,
}

/// JSON array of `{id, name, synonyms, def, is_a, is_obsolete}` objects.
pub(super) fn parse_json_records(text: &str) -> Result<Vec<TermRecord>> {
    let raw: Vec<JsonTerm> = serde_json::from_str(text)?;
    if raw.is_empty() {
        return Err(Error::Structure("no terms found".into()));
    }
    raw.into_iter()
        .enumerate()
        .map(|(i, t)| {
            let err = |message: String| Error::Stanza {
                stanza: i + 1,
                message,
            };
            let id = TermId::parse(&t.id).map_err(|_| err(format!("bad id {:?}", t.id)))?;
            let name = t.name.unwrap_or_default();
            if name.is_empty() && !t.is_obsolete {
                return Err(err(format!("missing name for {id}")));
            }
            let parents = t
                .is_a
                .iter()
                .map(|p| TermId::parse(p).map_err(|_| err(format!("bad is_a {p:?}"))))
                .collect::<Result<_>>()?;
            Ok(TermRecord {
                id,
                name,
                synonyms: t.synonyms,
                definition: t.def,
                parents,
                obsolete: t.is_obsolete,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use crate::error::Error;
    use crate::ontology::{Ontology, TermId};

    #[test]
    fn minimal_stanza() {
        let o = Ontology::parse_obo("[Term]\nid: HP:0000001\nname: All\n").unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!(o.root().as_str(), "HP:0000001");
    }

    #[test]
    fn single_edge_with_comment() {
        let text = "format-version: 1.2\n\n[Term]\nid: HP:0000001\nname: All\n\n\
                    [Term]\nid: HP:0000118\nname: Phenotypic abnormality\n\
                    is_a: HP:0000001 ! All\n\n[Typedef]\nid: part_of\nname: part of\n";
        let o = Ontology::parse_obo(text).unwrap();
        let p = o.parents(&TermId::parse("HP:0000118").unwrap()).unwrap();
        assert_eq!(p, vec![&TermId::parse("HP:0000001").unwrap()]);
    }

    #[test]
    fn two_term_cycle() {
        let text = "[Term]\nid: HP:0000001\nname: All\n\n\
                    [Term]\nid: HP:0000002\nname: X\nis_a: HP:0000003\n\n\
                    [Term]\nid: HP:0000003\nname: Y\nis_a: HP:0000002\n";
        assert!(matches!(Ontology::parse_obo(text), Err(Error::Cycle(_))));
    }

    #[test]
    fn dangling_parent() {
        let text = "[Term]\nid: HP:0000001\nname: All\n\n\
                    [Term]\nid: HP:0000002\nname: X\nis_a: HP:0000009\n";
        assert!(matches!(Ontology::parse_obo(text), Err(Error::Structure(_))));
    }

    #[test]
    fn missing_name_reports_stanza() {
        let text = "[Term]\nid: HP:0000001\nname: All\n\n[Term]\nid: HP:0000002\n";
        match Ontology::parse_obo(text) {
            Err(Error::Stanza { stanza, .. }) => assert_eq!(stanza, 2),
            other => panic!("{other:?}"),
        }
        let text = "[Term]\nname: All\n";
        assert!(matches!(
            Ontology::parse_obo(text),
            Err(Error::Stanza { stanza: 1, .. })
        ));
    }

    #[test]
    fn synonyms_defs_obsolete() {
        let text = r#"[Term]
id: HP:0000001
name: All

[Term]
id: HP:0000545
name: Myopia
def: "Nearsightedness, also known as \"myopia\"." [HPO:probinson]
synonym: "Nearsightedness" EXACT []
synonym: "Near sightedness" EXACT layperson []
is_a: HP:0000001 {source="x"} ! All

[Term]
id: HP:0000002
name: obsolete Old
is_obsolete: true
"#;
        let o = Ontology::parse_obo(text).unwrap();
        let myopia = o.term(&TermId::parse("HP:0000545").unwrap()).unwrap();
        assert_eq!(myopia.synonyms, vec!["Nearsightedness", "Near sightedness"]);
        assert_eq!(myopia.definition, "Nearsightedness, also known as \"myopia\".");
        assert_eq!(o.live_count(), 2);
        let old = TermId::parse("HP:0000002").unwrap();
        assert!(o.contains(&old));
        assert!(!o.is_live(&old));
        assert!(matches!(o.ancestors(&old), Err(Error::ObsoleteTerm(_))));
    }

    #[test]
    fn json_matches_obo() {
        let json = r#"[
            {"id": "HP:0000001", "name": "All"},
            {"id": "HP:0000118", "name": "Phenotypic abnormality", "is_a": ["HP:0000001"],
             "synonyms": ["Abnormality"], "def": "d"},
            {"id": "HP:0000003", "is_obsolete": true}
        ]"#;
        let o = Ontology::parse_json(json).unwrap();
        assert_eq!(o.live_count(), 2);
        let bad = r#"[{"id": "HP:0000001", "name": "All"}, {"id": "HP:0000002", "name": "x", "is_a": ["HP:0000002"]}]"#;
        assert!(matches!(Ontology::parse_json(bad), Err(Error::Cycle(_))));
    }
}
