//! Few-shot prompt templates for span-markup extraction.

use serde::{Deserialize, Serialize};

use super::markup::escape_markup;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExample {
    pub input: String,
    /// Expected output with mentions wrapped in span tags.
    pub output: String,
}

/// Placeholders: `{{task}}`, `{{markup_guide}}`, `{{definition}}`,
/// `{{examples}}` and `{{input}}`. The layout must contain `{{input}}`
/// exactly once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplate {
    pub task_statement: String,
    pub markup_guide: String,
    pub phenotype_definition: String,
    #[serde(default)]
    pub examples: Vec<PromptExample>,
    #[serde(default = "default_layout")]
    pub layout: String,
}

fn default_layout() -> String {
    "{{task}}\n\n{{markup_guide}}\n\n{{definition}}\n\n{{examples}}Input:\n{{input}}\nOutput:\n".into()
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            task_statement: "Identify every rare disease phenotype mentioned in the clinical text below.".into(),
            markup_guide: "Return the input text unchanged except that each phenotype mention is wrapped in <span> and </span> tags. Do not add, remove or reword any other text.".into(),
            phenotype_definition: "A phenotype is an observable clinical abnormality such as a physical finding, symptom, laboratory abnormality or imaging finding. Do not tag diagnoses, medications, procedures or normal findings.".into(),
            examples: Vec::new(),
            layout: default_layout(),
        }
    }
}

fn render_examples(examples: &[PromptExample]) -> String {
    let mut out = String::new();
    for (i, ex) in examples.iter().enumerate() {
        out.push_str(&format!(
            "Example {}:\nInput:\n{}\nOutput:\n{}\n\n",
            i + 1,
            escape_markup(&ex.input),
            ex.output
        ));
    }
    out
}

/// Renders the prompt for `input`. The input is escaped so that literal
/// tags in a note cannot be confused with markup.
pub fn render_prompt(t: &PromptTemplate, input: &str) -> Result<String> {
    let mut out = String::new();
    let mut rest = t.layout.as_str();
    let mut inputs = 0;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| Error::Template("unterminated placeholder".into()))?;
        let name = after[..close].trim();
        match name {
            "task" => out.push_str(&t.task_statement),
            "markup_guide" => out.push_str(&t.markup_guide),
            "definition" => out.push_str(&t.phenotype_definition),
            "examples" => out.push_str(&render_examples(&t.examples)),
            "input" => {
                inputs += 1;
                out.push_str(&escape_markup(input));
            }
            other => return Err(Error::Template(format!("unresolved placeholder {{{{{other}}}}}"))),
        }
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    if inputs != 1 {
        return Err(Error::Template(format!(
            "layout must place the input exactly once, found {inputs}"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::markup::unescape_markup;

    #[test]
    fn renders_without_examples() {
        let t = PromptTemplate::default();
        let p = render_prompt(&t, "pt has myopia").unwrap();
        assert_eq!(p.matches("pt has myopia").count(), 1);
        assert_eq!(p, render_prompt(&t, "pt has myopia").unwrap());
    }

    #[test]
    fn examples_in_order() {
        let t = PromptTemplate {
            examples: vec![
                PromptExample { input: "first".into(), output: "<span>first</span>".into() },
                PromptExample { input: "second".into(), output: "second".into() },
            ],
            ..PromptTemplate::default()
        };
        let p = render_prompt(&t, "x").unwrap();
        assert!(p.find("Example 1:\nInput:\nfirst").unwrap() < p.find("Example 2:\nInput:\nsecond").unwrap());
    }

    #[test]
    fn literal_tags_in_input_are_escaped() {
        let input = "note says <span>x</span> & more";
        let p = render_prompt(&PromptTemplate::default(), input).unwrap();
        let escaped = escape_markup(input);
        assert!(p.contains(&escaped));
        assert!(!p.contains(input));
        assert_eq!(unescape_markup(&escaped), input);
    }

    #[test]
    fn placeholder_errors() {
        let bad = |layout: &str| PromptTemplate { layout: layout.into(), ..PromptTemplate::default() };
        assert!(matches!(render_prompt(&bad("{{task}} {{mystery}} {{input}}"), "x"), Err(Error::Template(_))));
        assert!(matches!(render_prompt(&bad("{{task}}"), "x"), Err(Error::Template(_))));
        assert!(matches!(render_prompt(&bad("{{input}} {{input}}"), "x"), Err(Error::Template(_))));
        assert!(matches!(render_prompt(&bad("{{input"), "x"), Err(Error::Template(_))));
        assert_eq!(render_prompt(&bad("<{{input}}>"), "{{task}}").unwrap(), "<{{task}}>");
    }
}
