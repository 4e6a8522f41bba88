//! Synthetic corpora: entity-changed pairs, role-switched pairs and a
//! control set, each with disjoint train/dev/test name and template pools.

mod generate;
mod lexicon;
mod numwords;
mod template;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use generate::{gen_control, gen_ner_changed, gen_role_switched};
pub use lexicon::{Lexicons, Pool, Split};
pub use numwords::{number_to_words, LIMIT as NUMBER_WORDS_LIMIT};
pub use template::{make_templates, parse_template_file, Filled, Piece, SlotType, Template, TemplateKind, TemplateReport};

use crate::corpus::{to_jsonl_string, NliExample};
use crate::error::{Error, Result};
use crate::ner::{casefold, Gazetteer, NerCategory};
use crate::text::{capitalize, decapitalize, tokenize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }
}

/// Relative weights of the entity-change template kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NerMix {
    pub single: f64,
    pub double: f64,
    pub location: f64,
    pub number: f64,
    pub date: f64,
}

/// Optional replacements for the bundled word lists and templates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourcePaths {
    /// Directory holding `names.txt`, `cities.txt`, `months.txt` and `numeric_words.txt`.
    pub gazetteer: Option<PathBuf>,
    pub names: Option<PathBuf>,
    pub cities: Option<PathBuf>,
    pub numbers: Option<PathBuf>,
    pub dates: Option<PathBuf>,
    pub ner_templates: Option<PathBuf>,
    pub role_templates: Option<PathBuf>,
    pub swap_pairs: Option<PathBuf>,
    pub story_sentences: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    /// Probability that a pair is an untouched copy labeled entailment.
    pub entailment_fraction: f64,
    /// Train/dev/test ratios used to partition templates of each kind.
    pub template_split: [f64; 3],
    pub ner_changed: SplitCounts,
    pub role_switched: SplitCounts,
    pub control: SplitCounts,
    pub ner_mix: NerMix,
    /// Share of changed quantities written out in words.
    pub number_word_fraction: f64,
    /// Share of role-switched pairs built from annotated span swaps.
    pub qasrl_fraction: f64,
    pub resources: ResourcePaths,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 7,
            entailment_fraction: 0.5,
            template_split: [0.8, 0.1, 0.1],
            ner_changed: SplitCounts {
                train: 6150,
                dev: 300,
                test: 300,
            },
            role_switched: SplitCounts {
                train: 2080,
                dev: 240,
                test: 240,
            },
            control: SplitCounts {
                train: 2000,
                dev: 200,
                test: 300,
            },
            ner_mix: NerMix {
                single: 0.55,
                double: 0.15,
                location: 0.12,
                number: 0.12,
                date: 0.06,
            },
            number_word_fraction: 0.2,
            qasrl_fraction: 0.2,
            resources: ResourcePaths::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("entailment_fraction", self.entailment_fraction)?;
        unit("number_word_fraction", self.number_word_fraction)?;
        unit("qasrl_fraction", self.qasrl_fraction)?;
        if self.template_split.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::Input(format!("template_split ratios must be positive, got {:?}", self.template_split)));
        }
        let m = self.ner_mix;
        let weights = [m.single, m.double, m.location, m.number, m.date];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Input(format!("ner_mix weights must be nonnegative and not all zero, got {weights:?}")));
        }
        Ok(())
    }
}

/// A sentence with two annotated argument spans that can trade places.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapPair {
    pub tokens: Vec<String>,
    /// Half-open token range `[start, end)`.
    pub span_a: [usize; 2],
    pub span_b: [usize; 2],
}

impl SwapPair {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.ordered();
        let n = self.tokens.len();
        if a[0] >= a[1] || b[0] >= b[1] || b[1] > n {
            return Err(Error::Input(format!("span out of bounds or empty: {:?} {:?} over {n} tokens", self.span_a, self.span_b)));
        }
        if a[1] > b[0] {
            return Err(Error::Input(format!("spans overlap: {:?} {:?}", self.span_a, self.span_b)));
        }
        if self.tokens[a[0]..a[1]] == self.tokens[b[0]..b[1]] {
            return Err(Error::Input("spans are identical, swapping changes nothing".into()));
        }
        Ok(())
    }

    fn ordered(&self) -> [[usize; 2]; 2] {
        if self.span_a[0] <= self.span_b[0] {
            [self.span_a, self.span_b]
        } else {
            [self.span_b, self.span_a]
        }
    }

    /// The sentence with the two spans exchanged.
    ///
    /// When a span starts the sentence, its first token is lowercased on the
    /// way out (unless the gazetteer knows it as a name) and the incoming
    /// first token is capitalized.
    pub fn swapped(&self, gaz: &Gazetteer) -> Vec<String> {
        let [a, b] = self.ordered();
        let t = &self.tokens;
        let mut first: Vec<String> = t[b[0]..b[1]].to_vec();
        let mut second: Vec<String> = t[a[0]..a[1]].to_vec();
        if a[0] == 0 {
            if gaz.tag(&second[0]) != NerCategory::Name {
                second[0] = decapitalize(&second[0]);
            }
            first[0] = capitalize(&first[0]);
        }
        let mut out = t[..a[0]].to_vec();
        out.extend(first);
        out.extend_from_slice(&t[a[1]..b[0]]);
        out.extend(second);
        out.extend_from_slice(&t[b[1]..]);
        out
    }
}

pub fn parse_swap_pairs(text: &str, origin: &Path) -> Result<Vec<SwapPair>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: n + 1,
            msg,
        };
        let sp: SwapPair = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        sp.validate().map_err(|e| err(e.to_string()))?;
        out.push(sp);
    }
    Ok(out)
}

/// Everything generation draws from.
#[derive(Debug, Clone)]
pub struct GenInputs {
    pub gazetteer: Gazetteer,
    pub lexicons: Lexicons,
    /// Entity-change templates: the template file plus story-derived ones.
    pub ner_templates: Vec<Template>,
    pub role_templates: Vec<Template>,
    pub swap_pairs: Vec<SwapPair>,
    pub story_report: TemplateReport,
}

impl GenInputs {
    pub fn builtin() -> Self {
        Self::load(&ResourcePaths::default()).expect("bundled resources load")
    }

    pub fn load(paths: &ResourcePaths) -> Result<Self> {
        let d = crate::resources::builtin();
        let read = |p: &Option<PathBuf>, fallback: &'static str, name: &str| -> Result<(String, PathBuf)> {
            match p {
                Some(p) => Ok((std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?, p.clone())),
                None => Ok((fallback.to_string(), PathBuf::from(format!("<builtin {name}>")))),
            }
        };
        let gazetteer = match &paths.gazetteer {
            Some(dir) => Gazetteer::load(
                &dir.join("names.txt"),
                &dir.join("cities.txt"),
                &dir.join("months.txt"),
                &dir.join("numeric_words.txt"),
            )?,
            None => Gazetteer::builtin(),
        };
        let pool = |p: &Option<PathBuf>, fallback, name| -> Result<Pool> {
            let (text, origin) = read(p, fallback, name)?;
            Pool::parse(&text, &origin)
        };
        let lexicons = Lexicons::from_pools(
            pool(&paths.names, d.lex_names, "names")?,
            pool(&paths.cities, d.lex_cities, "cities")?,
            pool(&paths.numbers, d.lex_numbers, "numbers")?,
            pool(&paths.dates, d.lex_dates, "dates")?,
        )?;

        let (text, origin) = read(&paths.ner_templates, d.ner_templates, "ner templates")?;
        let mut ner_templates = parse_template_file(&text, &origin)?;
        if let Some(t) = ner_templates.iter().find(|t| t.kind == TemplateKind::RoleSwap) {
            return Err(Error::Input(format!("{}: role template {:?} in the entity-change file", origin.display(), t.text())));
        }
        let (text, origin) = read(&paths.role_templates, d.role_templates, "role templates")?;
        let role_templates = parse_template_file(&text, &origin)?;
        if let Some(t) = role_templates.iter().find(|t| t.kind != TemplateKind::RoleSwap) {
            return Err(Error::Input(format!("{}: {} template {:?} in the role file", origin.display(), t.kind, t.text())));
        }
        let (text, origin) = read(&paths.swap_pairs, d.swap_pairs, "swap pairs")?;
        let swap_pairs = parse_swap_pairs(&text, &origin)?;

        let (text, _) = read(&paths.story_sentences, d.story_sentences, "story sentences")?;
        let sentences: Vec<Vec<String>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(tokenize)
            .collect();
        let (story, story_report) = make_templates(&sentences, &gazetteer);
        let known: HashSet<Template> = ner_templates.iter().cloned().collect();
        ner_templates.extend(story.into_iter().filter(|t| !known.contains(t)));

        Ok(GenInputs {
            gazetteer,
            lexicons,
            ner_templates,
            role_templates,
            swap_pairs,
            story_report,
        })
    }
}

/// Shuffles `items` and cuts them into train/dev/test by largest remainder.
/// Fails if any split would be empty.
pub fn partition<T: Clone>(items: &[T], ratios: [f64; 3], rng: &mut ChaCha8Rng, what: &str) -> Result<[Vec<T>; 3]> {
    let mut shuffled = items.to_vec();
    shuffled.shuffle(rng);
    let counts = generate::allocate(items.len(), &ratios);
    if counts.contains(&0) {
        return Err(Error::Input(format!(
            "{} {what} item(s) cannot fill three nonempty splits at ratios {ratios:?}",
            items.len()
        )));
    }
    let test = shuffled.split_off(counts[0] + counts[1]);
    let dev = shuffled.split_off(counts[0]);
    Ok([shuffled, dev, test])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    NerChanged,
    RoleSwitched,
    Control,
}

impl Dataset {
    pub const ALL: [Dataset; 3] = [Dataset::NerChanged, Dataset::RoleSwitched, Dataset::Control];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::NerChanged => "ner_changed",
            Dataset::RoleSwitched => "role_switched",
            Dataset::Control => "control",
        }
    }
}

/// Derives an independent stream per (purpose, split) from the user seed.
fn stream(seed: u64, purpose: u64, split: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose * 4 + split as u64 + 1);
    rng
}

/// source -> label -> count
pub type SourceCounts = BTreeMap<String, BTreeMap<String, usize>>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub format_version: u32,
    pub seed: u64,
    /// dataset -> split -> source -> label -> count
    pub counts: BTreeMap<String, BTreeMap<String, SourceCounts>>,
    /// split -> template kind -> count
    pub templates: BTreeMap<String, BTreeMap<String, usize>>,
    pub swap_pairs: BTreeMap<String, usize>,
    pub story_templates: TemplateReport,
}

#[derive(Debug, Clone)]
pub struct Generated {
    /// Indexed by [`Dataset`] then [`Split`].
    pub corpora: [[Vec<NliExample>; 3]; 3],
    /// Templates (entity-change and role) assigned to each split.
    pub templates: [Vec<Template>; 3],
    pub swap_pairs: [Vec<SwapPair>; 3],
    pub report: GenReport,
}

impl Generated {
    pub fn get(&self, dataset: Dataset, split: Split) -> &[NliExample] {
        &self.corpora[dataset as usize][split.index()]
    }

    /// Writes `<dir>/<dataset>/<split>.jsonl` for every corpus and
    /// `<dir>/report.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for d in Dataset::ALL {
            let sub = dir.join(d.as_str());
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            for s in Split::ALL {
                let path = sub.join(format!("{}.jsonl", s.as_str()));
                std::fs::write(&path, to_jsonl_string(self.get(d, s))).map_err(|e| Error::io(&path, e))?;
            }
        }
        let path = dir.join("report.json");
        let json = serde_json::to_string_pretty(&self.report)? + "\n";
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}

/// Partitions templates and swap pairs, then generates all three corpora.
pub fn generate(inputs: &GenInputs, cfg: &GenConfig) -> Result<Generated> {
    cfg.validate()?;
    let mut part_rng = stream(cfg.seed, 0, 0);

    let mut templates: [Vec<Template>; 3] = Default::default();
    let mut kinds_present: Vec<TemplateKind> = Vec::new();
    for kind in TemplateKind::ALL {
        let source = if kind == TemplateKind::RoleSwap { &inputs.role_templates } else { &inputs.ner_templates };
        let of_kind: Vec<Template> = source.iter().filter(|t| t.kind == kind).cloned().collect();
        if of_kind.is_empty() {
            continue;
        }
        kinds_present.push(kind);
        let parts = partition(&of_kind, cfg.template_split, &mut part_rng, &format!("{kind} template"))?;
        for (dst, part) in templates.iter_mut().zip(parts) {
            dst.extend(part);
        }
    }
    let swap_pairs: [Vec<SwapPair>; 3] = if inputs.swap_pairs.is_empty() {
        Default::default()
    } else {
        partition(&inputs.swap_pairs, cfg.template_split, &mut part_rng, "swap pair")?
    };

    let mut corpora: [[Vec<NliExample>; 3]; 3] = Default::default();
    for split in Split::ALL {
        let s = split.index();
        let ts = &templates[s];
        let lex = &inputs.lexicons;
        corpora[0][s] = gen_ner_changed(ts, lex, split, cfg.ner_changed.get(split), cfg, &mut stream(cfg.seed, 1, s))?;
        corpora[1][s] = gen_role_switched(
            ts,
            &swap_pairs[s],
            lex,
            &inputs.gazetteer,
            split,
            cfg.role_switched.get(split),
            cfg,
            &mut stream(cfg.seed, 2, s),
        )?;
        corpora[2][s] = gen_control(ts, lex, split, cfg.control.get(split), cfg, &mut stream(cfg.seed, 3, s))?;
    }

    let mut report = GenReport {
        format_version: FORMAT_VERSION,
        seed: cfg.seed,
        story_templates: inputs.story_report.clone(),
        ..Default::default()
    };
    for d in Dataset::ALL {
        let by_split = report.counts.entry(d.as_str().to_string()).or_default();
        for split in Split::ALL {
            let entry = by_split.entry(split.as_str().to_string()).or_default();
            for ex in &corpora[d as usize][split.index()] {
                *entry.entry(ex.source.clone()).or_default().entry(ex.label.as_str().to_string()).or_default() += 1;
            }
        }
    }
    for split in Split::ALL {
        let entry = report.templates.entry(split.as_str().to_string()).or_default();
        for kind in &kinds_present {
            entry.insert(kind.as_str().to_string(), templates[split.index()].iter().filter(|t| t.kind == *kind).count());
        }
        report.swap_pairs.insert(split.as_str().to_string(), swap_pairs[split.index()].len());
    }

    Ok(Generated {
        corpora,
        templates,
        swap_pairs,
        report,
    })
}

/// Casefolded tokens of a filled sentence, for multiset comparisons.
pub fn folded_multiset(tokens: &[String]) -> Vec<String> {
    let mut v: Vec<String> = tokens.iter().map(|t| casefold(t)).collect();
    v.sort();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn swap_recases_sentence_start() {
        let sp = SwapPair {
            tokens: toks("Many kinds of power plant have been used to drive propellers."),
            span_a: [0, 5],
            span_b: [10, 11],
        };
        let g = Gazetteer::builtin();
        assert_eq!(
            crate::text::detokenize(&sp.swapped(&g)),
            "Propellers have been used to drive many kinds of power plant."
        );
        assert_eq!(folded_multiset(&sp.swapped(&g)), folded_multiset(&sp.tokens));
    }

    #[test]
    fn swap_keeps_name_capitalized() {
        let sp = SwapPair {
            tokens: toks("Kendall thanked the driver."),
            span_a: [0, 1],
            span_b: [2, 4],
        };
        assert_eq!(crate::text::detokenize(&sp.swapped(&Gazetteer::builtin())), "The driver thanked Kendall.");
    }

    #[test]
    fn swap_pair_validation() {
        let bad = |a: [usize; 2], b: [usize; 2]| SwapPair {
            tokens: toks("the cat saw the cat ."),
            span_a: a,
            span_b: b,
        };
        assert!(bad([0, 2], [1, 3]).validate().is_err());
        assert!(bad([0, 2], [3, 5]).validate().is_err());
        assert!(bad([0, 0], [3, 4]).validate().is_err());
        assert!(bad([0, 2], [5, 9]).validate().is_err());
        assert!(bad([0, 2], [2, 3]).validate().is_ok());
    }

    #[test]
    fn bundled_swap_pairs_parse() {
        let d = crate::resources::builtin();
        let pairs = parse_swap_pairs(d.swap_pairs, Path::new("swap_pairs.jsonl")).unwrap();
        assert!(pairs.len() >= 30);
    }

    #[test]
    fn partition_sizes_follow_ratios() {
        let items: Vec<u32> = (0..15).collect();
        let [a, b, c] = partition(&items, [0.8, 0.1, 0.1], &mut stream(1, 0, 0), "x").unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (12, 2, 1));
        let mut all: Vec<u32> = a.into_iter().chain(b).chain(c).collect();
        all.sort();
        assert_eq!(all, items);
        assert!(partition(&items[..4], [0.8, 0.1, 0.1], &mut stream(1, 0, 0), "x").is_err());
    }

    #[test]
    fn config_toml_defaults_fill_in() {
        let cfg: GenConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.template_split, [0.8, 0.1, 0.1]);
        assert!(serde_json::from_str::<GenConfig>(r#"{"sede": 3}"#).is_err());
    }

    #[test]
    fn invalid_fractions_rejected() {
        let cfg = GenConfig {
            entailment_fraction: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
