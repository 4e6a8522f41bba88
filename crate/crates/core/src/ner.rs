//! Gazetteer-and-pattern entity tagger and the 16-way pair feature that
//! feeds the lambda gate.
//!
//! Every token gets exactly one of four coarse categories. The category of a
//! premise token and a hypothesis token together select one of 16 cells,
//! encoded as a one-hot [`PairFeature`] at index `k1 * 4 + k2`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NerCategory {
    Name = 0,
    Numeric = 1,
    Date = 2,
    Other = 3,
}

impl NerCategory {
    pub const ALL: [NerCategory; 4] = [NerCategory::Name, NerCategory::Numeric, NerCategory::Date, NerCategory::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> NerOneHot {
        let mut v = [0u8; 4];
        v[self.index()] = 1;
        NerOneHot(v)
    }
}

impl fmt::Display for NerCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NerCategory::Name => "Name",
            NerCategory::Numeric => "Numeric",
            NerCategory::Date => "Date",
            NerCategory::Other => "Other",
        };
        f.write_str(s)
    }
}

/// One-hot encoding of a [`NerCategory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NerOneHot(pub [u8; 4]);

/// 16-dim one-hot feature for a token pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairFeature {
    hot: usize,
}

impl PairFeature {
    pub const DIM: usize = 16;

    pub fn hot_index(self) -> usize {
        self.hot
    }

    /// Dense form, `x[k1*4+k2] = v_i[k1] * v_j[k2]`.
    pub fn to_dense(self) -> [f64; Self::DIM] {
        let mut x = [0.0; Self::DIM];
        x[self.hot] = 1.0;
        x
    }

    pub fn categories(self) -> (NerCategory, NerCategory) {
        (
            NerCategory::from_index(self.hot / 4).expect("hot < 16"),
            NerCategory::from_index(self.hot % 4).expect("hot < 16"),
        )
    }
}

/// Outer product of two one-hot category vectors, flattened row-major.
///
/// ```
/// use lambda_nli::ner::{pair_feature, NerCategory};
/// assert_eq!(pair_feature(NerCategory::Numeric, NerCategory::Date).hot_index(), 6);
/// ```
pub fn pair_feature(ci: NerCategory, cj: NerCategory) -> PairFeature {
    let (vi, vj) = (ci.one_hot().0, cj.one_hot().0);
    let mut hot = None;
    for (k1, a) in vi.iter().enumerate() {
        for (k2, b) in vj.iter().enumerate() {
            if a * b == 1 {
                hot = Some(k1 * 4 + k2);
            }
        }
    }
    PairFeature {
        hot: hot.expect("one-hot inputs"),
    }
}

static NUMERIC_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[0-9]+([.,][0-9]+)*$").unwrap());
static YEAR_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[0-9]{4}$").unwrap());
static DMY_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[0-9]{1,2}/[0-9]{1,2}/[0-9]{2,4}$").unwrap());

/// Word lists behind [`tag_token`]. Entries are stored case-folded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    pub names: HashSet<String>,
    pub cities_countries: HashSet<String>,
    pub month_words: HashSet<String>,
    pub numeric_words: HashSet<String>,
}

/// Parses a one-entry-per-line list; `#` starts a comment.
pub fn parse_word_list(text: &str, origin: &Path) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.chars().any(char::is_whitespace) {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: n + 1,
                msg: format!("entry {line:?} contains whitespace"),
            });
        }
        out.insert(casefold(line));
    }
    Ok(out)
}

impl Gazetteer {
    pub fn from_lists(names: &str, cities_countries: &str, month_words: &str, numeric_words: &str) -> Result<Self> {
        Ok(Gazetteer {
            names: parse_word_list(names, Path::new("<names>"))?,
            cities_countries: parse_word_list(cities_countries, Path::new("<cities>"))?,
            month_words: parse_word_list(month_words, Path::new("<months>"))?,
            numeric_words: parse_word_list(numeric_words, Path::new("<numeric>"))?,
        })
    }

    pub fn load(names: &Path, cities_countries: &Path, month_words: &Path, numeric_words: &Path) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Ok(Gazetteer {
            names: parse_word_list(&read(names)?, names)?,
            cities_countries: parse_word_list(&read(cities_countries)?, cities_countries)?,
            month_words: parse_word_list(&read(month_words)?, month_words)?,
            numeric_words: parse_word_list(&read(numeric_words)?, numeric_words)?,
        })
    }

    /// The lists shipped with the crate.
    pub fn builtin() -> Self {
        let d = crate::resources::builtin();
        Self::from_lists(d.gaz_names, d.gaz_cities, d.gaz_months, d.gaz_numeric).expect("bundled gazetteer parses")
    }

    pub fn tag(&self, token: &str) -> NerCategory {
        tag_token(token, self)
    }

    pub fn tag_all<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<NerCategory> {
        tokens.iter().map(|t| tag_token(t.as_ref(), self)).collect()
    }
}

pub fn casefold(s: &str) -> String {
    s.to_lowercase()
}

fn is_year(token: &str) -> bool {
    YEAR_RE.is_match(token) && token.parse::<u32>().is_ok_and(|y| (1900..=2099).contains(&y))
}

fn is_numeric_word(folded: &str, g: &Gazetteer) -> bool {
    g.numeric_words.contains(folded)
        || (folded.contains('-') && folded.split('-').all(|part| g.numeric_words.contains(part)))
}

/// Category of a single token.
///
/// Lookups are case-folded. A four-digit year in 1900–2099 is a date even
/// though it also looks numeric; otherwise Name beats Numeric beats Date.
pub fn tag_token(token: &str, g: &Gazetteer) -> NerCategory {
    let folded = casefold(token);
    if g.names.contains(&folded) || g.cities_countries.contains(&folded) {
        NerCategory::Name
    } else if is_year(token) {
        NerCategory::Date
    } else if NUMERIC_RE.is_match(token) || is_numeric_word(&folded, g) {
        NerCategory::Numeric
    } else if g.month_words.contains(&folded) || DMY_RE.is_match(token) {
        NerCategory::Date
    } else {
        NerCategory::Other
    }
}
