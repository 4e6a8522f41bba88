use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ner::{casefold, Gazetteer};
use crate::text::{detokenize, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SlotType {
    PersonX,
    PersonY,
    City,
    Num,
    Date,
}

impl SlotType {
    pub fn placeholder(self) -> &'static str {
        match self {
            SlotType::PersonX => "PERSONX",
            SlotType::PersonY => "PERSONY",
            SlotType::City => "CITY",
            SlotType::Num => "NUM",
            SlotType::Date => "DATE",
        }
    }

    fn from_placeholder(s: &str) -> Option<Self> {
        Some(match s {
            "PERSONX" => SlotType::PersonX,
            "PERSONY" => SlotType::PersonY,
            "CITY" => SlotType::City,
            "NUM" => SlotType::Num,
            "DATE" => SlotType::Date,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    NerSingle,
    NerDouble,
    NerLocation,
    NerNumber,
    NerDate,
    RoleSwap,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 6] = [
        TemplateKind::NerSingle,
        TemplateKind::NerDouble,
        TemplateKind::NerLocation,
        TemplateKind::NerNumber,
        TemplateKind::NerDate,
        TemplateKind::RoleSwap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateKind::NerSingle => "ner_single",
            TemplateKind::NerDouble => "ner_double",
            TemplateKind::NerLocation => "ner_location",
            TemplateKind::NerNumber => "ner_number",
            TemplateKind::NerDate => "ner_date",
            TemplateKind::RoleSwap => "role_swap",
        }
    }

    /// Exact slot multiset a template of this kind must carry.
    pub fn required_slots(self) -> &'static [SlotType] {
        match self {
            TemplateKind::NerSingle => &[SlotType::PersonX],
            TemplateKind::NerDouble | TemplateKind::RoleSwap => &[SlotType::PersonX, SlotType::PersonY],
            TemplateKind::NerLocation => &[SlotType::City],
            TemplateKind::NerNumber => &[SlotType::Num],
            TemplateKind::NerDate => &[SlotType::Date],
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown template kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Piece {
    Word(String),
    Slot(SlotType),
}

/// A tokenized sentence with typed slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Template {
    pub kind: TemplateKind,
    pub pieces: Vec<Piece>,
}

/// Result of filling a template: tokens plus the span each slot occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filled {
    pub tokens: Vec<String>,
    pub spans: Vec<(SlotType, std::ops::Range<usize>)>,
}

impl Template {
    pub fn new(kind: TemplateKind, pieces: Vec<Piece>) -> Result<Self> {
        let t = Template { kind, pieces };
        t.validate()?;
        Ok(t)
    }

    /// Parses template text with `{PERSONX}`-style placeholders.
    pub fn parse(kind: TemplateKind, text: &str) -> Result<Self> {
        let mut pieces = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('{') {
            let close = rest[open..]
                .find('}')
                .map(|c| open + c)
                .ok_or_else(|| Error::Input(format!("unclosed placeholder in {text:?}")))?;
            pieces.extend(tokenize(&rest[..open]).into_iter().map(Piece::Word));
            let name = &rest[open + 1..close];
            let slot =
                SlotType::from_placeholder(name).ok_or_else(|| Error::Input(format!("unknown placeholder {{{name}}}")))?;
            pieces.push(Piece::Slot(slot));
            rest = &rest[close + 1..];
        }
        pieces.extend(tokenize(rest).into_iter().map(Piece::Word));
        Template::new(kind, pieces)
    }

    pub fn validate(&self) -> Result<()> {
        let mut slots: Vec<SlotType> = self.slots().collect();
        slots.sort();
        if slots != self.kind.required_slots() {
            return Err(Error::Input(format!(
                "{} template needs slots {:?}, found {:?} in {:?}",
                self.kind,
                self.kind.required_slots(),
                slots,
                self.text()
            )));
        }
        if !self.pieces.iter().any(|p| matches!(p, Piece::Word(_))) && self.pieces.len() < 2 {
            return Err(Error::Input("template has no words".into()));
        }
        Ok(())
    }

    pub fn slots(&self) -> impl Iterator<Item = SlotType> + '_ {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot(s) => Some(*s),
            Piece::Word(_) => None,
        })
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Word(w) => Some(w.as_str()),
            Piece::Slot(_) => None,
        })
    }

    /// Canonical text with placeholders, e.g. `{PERSONX} moved to the hallway.`
    pub fn text(&self) -> String {
        let toks: Vec<String> = self
            .pieces
            .iter()
            .map(|p| match p {
                Piece::Word(w) => w.clone(),
                Piece::Slot(s) => format!("{{{}}}", s.placeholder()),
            })
            .collect();
        detokenize(&toks)
    }

    /// Substitutes each slot with the tokens `value(slot)` returns.
    ///
    /// A slot filling the first position is capitalized.
    pub fn fill(&self, mut value: impl FnMut(SlotType) -> Vec<String>) -> Filled {
        let mut tokens = Vec::new();
        let mut spans = Vec::new();
        for piece in &self.pieces {
            match piece {
                Piece::Word(w) => tokens.push(w.clone()),
                Piece::Slot(s) => {
                    let start = tokens.len();
                    let mut v = value(*s);
                    if start == 0 {
                        if let Some(first) = v.first_mut() {
                            *first = crate::text::capitalize(first);
                        }
                    }
                    tokens.extend(v);
                    spans.push((*s, start..tokens.len()));
                }
            }
        }
        Filled { tokens, spans }
    }
}

/// Reads `kind<TAB>template` lines; blank lines and `#` comments are skipped.
/// Duplicates keep their first occurrence.
pub fn parse_template_file(text: &str, origin: &Path) -> Result<Vec<Template>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: n + 1,
            msg,
        };
        let (kind, body) = line.split_once('\t').ok_or_else(|| parse_err("expected kind<TAB>template".into()))?;
        let kind: TemplateKind = kind.trim().parse().map_err(|e: Error| parse_err(e.to_string()))?;
        let t = Template::parse(kind, body.trim()).map_err(|e| parse_err(e.to_string()))?;
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    Ok(out)
}

/// What [`make_templates`] did with each input sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateReport {
    pub sentences: usize,
    pub templates: usize,
    pub duplicates: usize,
    pub skipped_no_entity: usize,
    pub skipped_ambiguous: usize,
}

/// Turns annotated sentences into slot templates.
///
/// Person names (per the gazetteer's name list) become `PERSONX` and, for a
/// second distinct name, `PERSONY`. A sentence without names but with exactly
/// one city or country becomes a location template. Sentences with no such
/// entity, with more than two names, or with a repeated name are skipped and
/// counted.
pub fn make_templates<S: AsRef<str>>(sentences: &[Vec<S>], names: &Gazetteer) -> (Vec<Template>, TemplateReport) {
    let mut report = TemplateReport {
        sentences: sentences.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for sentence in sentences {
        let folded: Vec<String> = sentence.iter().map(|t| casefold(t.as_ref())).collect();
        let person_at: Vec<usize> = (0..folded.len()).filter(|&i| names.names.contains(&folded[i])).collect();
        let city_at: Vec<usize> = (0..folded.len()).filter(|&i| names.cities_countries.contains(&folded[i])).collect();

        let mut distinct: Vec<&str> = Vec::new();
        for &i in &person_at {
            if !distinct.contains(&folded[i].as_str()) {
                distinct.push(&folded[i]);
            }
        }
        let (kind, slot_of): (TemplateKind, Box<dyn Fn(usize) -> Option<SlotType>>) =
            match (person_at.len(), distinct.len(), city_at.len()) {
                (0, _, 0) => {
                    report.skipped_no_entity += 1;
                    continue;
                }
                (0, _, 1) => {
                    let c = city_at[0];
                    (TemplateKind::NerLocation, Box::new(move |i| (i == c).then_some(SlotType::City)))
                }
                (1, 1, _) => {
                    let p = person_at[0];
                    (TemplateKind::NerSingle, Box::new(move |i| (i == p).then_some(SlotType::PersonX)))
                }
                (2, 2, _) => {
                    let (p, q) = (person_at[0], person_at[1]);
                    (
                        TemplateKind::NerDouble,
                        Box::new(move |i| {
                            if i == p {
                                Some(SlotType::PersonX)
                            } else if i == q {
                                Some(SlotType::PersonY)
                            } else {
                                None
                            }
                        }),
                    )
                }
                _ => {
                    report.skipped_ambiguous += 1;
                    continue;
                }
            };
        let pieces = sentence
            .iter()
            .enumerate()
            .map(|(i, t)| match slot_of(i) {
                Some(s) => Piece::Slot(s),
                None => Piece::Word(t.as_ref().to_string()),
            })
            .collect();
        let template = Template { kind, pieces };
        if seen.insert(template.clone()) {
            out.push(template);
        } else {
            report.duplicates += 1;
        }
    }
    report.templates = out.len();
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz() -> Gazetteer {
        Gazetteer::from_lists("mary\njohn\nsandra\n", "dublin\n", "may\n", "one\n").unwrap()
    }

    #[test]
    fn story_sentence_becomes_single_slot_template() {
        let (ts, report) = make_templates(&[tokenize("Mary moved to the hallway.")], &gaz());
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].kind, TemplateKind::NerSingle);
        assert_eq!(ts[0].text(), "{PERSONX} moved to the hallway.");
        assert_eq!(report.templates, 1);
    }

    #[test]
    fn two_names_give_two_slots() {
        let (ts, _) = make_templates(&[tokenize("Sandra handed the apple to John.")], &gaz());
        assert_eq!(ts[0].kind, TemplateKind::NerDouble);
        assert_eq!(ts[0].text(), "{PERSONX} handed the apple to {PERSONY}.");
    }

    #[test]
    fn duplicates_and_entity_free_sentences() {
        let input = vec![
            tokenize("Mary moved to the hallway."),
            tokenize("John moved to the hallway."),
            tokenize("The kitchen is east of the bedroom."),
            tokenize("Mary told Mary a story."),
            tokenize("Dublin rejected the plan."),
        ];
        let (ts, report) = make_templates(&input, &gaz());
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[1].kind, TemplateKind::NerLocation);
        assert_eq!(
            report,
            TemplateReport {
                sentences: 5,
                templates: 2,
                duplicates: 1,
                skipped_no_entity: 1,
                skipped_ambiguous: 1,
            }
        );
    }

    #[test]
    fn parse_checks_slot_counts() {
        assert!(Template::parse(TemplateKind::NerSingle, "{PERSONX} went home.").is_ok());
        assert!(Template::parse(TemplateKind::NerSingle, "{PERSONX} met {PERSONY}.").is_err());
        assert!(Template::parse(TemplateKind::RoleSwap, "{PERSONX} left.").is_err());
        assert!(Template::parse(TemplateKind::NerNumber, "It costs {NUM} and {NUM}.").is_err());
        assert!(Template::parse(TemplateKind::NerDate, "On {WHEN}.").is_err());
        assert!(Template::parse(TemplateKind::NerDate, "On {DATE.").is_err());
    }

    #[test]
    fn file_parse_reports_line() {
        let text = "# header\nner_single\t{PERSONX} left.\nner_single\t{PERSONX} left.\nbogus\tx\n";
        let err = parse_template_file(text, Path::new("t.tsv")).unwrap_err();
        assert!(err.to_string().starts_with("t.tsv:4"), "{err}");
        let ok = parse_template_file(&text[..text.len() - 8], Path::new("t.tsv")).unwrap();
        assert_eq!(ok.len(), 1);
    }

    #[test]
    fn fill_records_spans_and_capitalizes() {
        let t = Template::parse(TemplateKind::RoleSwap, "{PERSONX} lent {PERSONY} a bicycle.").unwrap();
        let f = t.fill(|s| match s {
            SlotType::PersonX => vec!["kendall".into()],
            _ => vec!["Peyton".into()],
        });
        assert_eq!(detokenize(&f.tokens), "Kendall lent Peyton a bicycle.");
        assert_eq!(f.spans, vec![(SlotType::PersonX, 0..1), (SlotType::PersonY, 2..3)]);
    }

    #[test]
    fn bundled_template_files_parse() {
        let d = crate::resources::builtin();
        let ner = parse_template_file(d.ner_templates, Path::new("ner.tsv")).unwrap();
        let role = parse_template_file(d.role_templates, Path::new("role.tsv")).unwrap();
        assert!(ner.len() >= 100, "{}", ner.len());
        assert!(role.len() >= 40, "{}", role.len());
        assert!(role.iter().all(|t| t.kind == TemplateKind::RoleSwap));
    }
}
