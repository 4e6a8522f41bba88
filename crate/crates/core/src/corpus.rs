//! Premise/hypothesis examples and their JSONL form.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{detokenize, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment = 0,
    Contradiction = 1,
    Neutral = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Contradiction, Label::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Contradiction => "contradiction",
            Label::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entailment" => Ok(Label::Entailment),
            "contradiction" => Ok(Label::Contradiction),
            "neutral" => Ok(Label::Neutral),
            other => Err(Error::Input(format!("unknown label {other:?}"))),
        }
    }
}

/// Provenance tags written to the `source` field.
pub mod source {
    pub const NER_NAME: &str = "ner_name";
    pub const NER_LOCATION: &str = "ner_location";
    pub const NER_NUMBER: &str = "ner_number";
    pub const NER_DATE: &str = "ner_date";
    pub const ROLE_VN: &str = "role_vn";
    pub const ROLE_QASRL: &str = "role_qasrl";
    /// Pairs with no entity manipulation: identical copies and unrelated sentences.
    pub const CONTROL: &str = "control";
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NliExample {
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub label: Label,
    pub source: String,
}

#[derive(Serialize, Deserialize)]
struct Record {
    premise: String,
    hypothesis: String,
    label: Label,
    source: String,
}

impl NliExample {
    pub fn new(premise: Vec<String>, hypothesis: Vec<String>, label: Label, source: impl Into<String>) -> Result<Self> {
        let ex = NliExample {
            premise,
            hypothesis,
            label,
            source: source.into(),
        };
        ex.validate()?;
        Ok(ex)
    }

    pub fn from_text(premise: &str, hypothesis: &str, label: Label, source: impl Into<String>) -> Result<Self> {
        Self::new(tokenize(premise), tokenize(hypothesis), label, source)
    }

    pub fn validate(&self) -> Result<()> {
        if self.premise.is_empty() || self.hypothesis.is_empty() {
            return Err(Error::Input("premise and hypothesis must be nonempty".into()));
        }
        if self.premise.iter().chain(&self.hypothesis).any(|t| t.is_empty()) {
            return Err(Error::Input("tokens must be nonempty strings".into()));
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        let rec = Record {
            premise: detokenize(&self.premise),
            hypothesis: detokenize(&self.hypothesis),
            label: self.label,
            source: self.source.clone(),
        };
        serde_json::to_string(&rec).expect("record serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let rec: Record = serde_json::from_str(line)?;
        Self::from_text(&rec.premise, &rec.hypothesis, rec.label, rec.source)
    }
}

pub fn write_jsonl<W: Write>(mut w: W, examples: &[NliExample]) -> std::io::Result<()> {
    for ex in examples {
        writeln!(w, "{}", ex.to_json_line())?;
    }
    Ok(())
}

pub fn to_jsonl_string(examples: &[NliExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&ex.to_json_line());
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str, origin: &Path) -> Result<Vec<NliExample>> {
    parse_lines(text.lines().map(|l| Ok(l.to_string())), origin)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<NliExample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    parse_lines(reader.lines(), path)
}

fn parse_lines<I>(lines: I, origin: &Path) -> Result<Vec<NliExample>>
where
    I: Iterator<Item = std::io::Result<String>>,
{
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ex = NliExample::from_json_line(&line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: n + 1,
            msg: e.to_string(),
        })?;
        out.push(ex);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_strings_are_fixed() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{}\"", l.as_str()));
        }
        assert!("Entailment".parse::<Label>().is_err());
    }

    #[test]
    fn json_line_roundtrip() {
        let ex = NliExample::from_text(
            "The Tajik State pays 35 dirams (a few cents) per day.",
            "The Tajik State pays 62 dirams (a few cents) per day.",
            Label::Contradiction,
            source::NER_NUMBER,
        )
        .unwrap();
        let line = ex.to_json_line();
        assert_eq!(
            line,
            r#"{"premise":"The Tajik State pays 35 dirams (a few cents) per day.","hypothesis":"The Tajik State pays 62 dirams (a few cents) per day.","label":"contradiction","source":"ner_number"}"#
        );
        assert_eq!(NliExample::from_json_line(&line).unwrap(), ex);
    }

    #[test]
    fn rejects_empty_sentences() {
        assert!(NliExample::from_text("", "x", Label::Neutral, "t").is_err());
        let err = parse_jsonl("{\"premise\":\"a\",\"hypothesis\":\"  \",\"label\":\"neutral\",\"source\":\"x\"}", Path::new("c.jsonl"))
            .unwrap_err();
        assert!(err.to_string().contains("c.jsonl:1"));
    }
}
