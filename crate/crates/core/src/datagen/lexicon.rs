use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ner::casefold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A word pool that is either shared by all splits or partitioned per split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    by_split: [Vec<String>; 3],
    partitioned: bool,
}

impl Pool {
    pub fn shared(entries: Vec<String>) -> Self {
        Pool {
            by_split: [entries.clone(), entries.clone(), entries],
            partitioned: false,
        }
    }

    pub fn partitioned(train: Vec<String>, dev: Vec<String>, test: Vec<String>) -> Result<Self> {
        let pool = Pool {
            by_split: [train, dev, test],
            partitioned: true,
        };
        pool.check_disjoint()?;
        Ok(pool)
    }

    pub fn get(&self, split: Split) -> &[String] {
        &self.by_split[split.index()]
    }

    pub fn is_partitioned(&self) -> bool {
        self.partitioned
    }

    fn check_disjoint(&self) -> Result<()> {
        let folded: Vec<HashSet<String>> =
            self.by_split.iter().map(|v| v.iter().map(|s| casefold(s)).collect()).collect();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            if let Some(shared) = folded[a].intersection(&folded[b]).next() {
                return Err(Error::Input(format!(
                    "{shared:?} appears in both {} and {} sections",
                    Split::ALL[a].as_str(),
                    Split::ALL[b].as_str()
                )));
            }
        }
        Ok(())
    }

    /// Parses one entry per line. `[train]`, `[dev]` and `[test]` headers
    /// partition the pool; a file without headers is shared.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut sections: [Vec<String>; 3] = Default::default();
        let mut shared = Vec::new();
        let mut current: Option<Split> = None;
        let mut saw_header = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(Split::ALL.into_iter().find(|s| s.as_str() == name).ok_or_else(|| Error::Parse {
                    path: origin.to_path_buf(),
                    line: n + 1,
                    msg: format!("unknown section [{name}]"),
                })?);
                saw_header = true;
                continue;
            }
            match current {
                Some(s) => sections[s.index()].push(line.to_string()),
                None => shared.push(line.to_string()),
            }
        }
        if !saw_header {
            return Ok(Pool::shared(shared));
        }
        if !shared.is_empty() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: 1,
                msg: "entries before the first section header".into(),
            });
        }
        let [train, dev, test] = sections;
        Pool::partitioned(train, dev, test).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })
    }
}

/// Everything that fills template slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub gender_neutral_names: Pool,
    pub cities_countries: Pool,
    pub numbers: Pool,
    pub dates: Pool,
}

impl Lexicons {
    pub fn from_pools(names: Pool, cities: Pool, numbers: Pool, dates: Pool) -> Result<Self> {
        let lex = Lexicons {
            gender_neutral_names: names,
            cities_countries: cities,
            numbers,
            dates,
        };
        lex.validate()?;
        Ok(lex)
    }

    pub fn from_texts(names: &str, cities: &str, numbers: &str, dates: &str) -> Result<Self> {
        Self::from_pools(
            Pool::parse(names, Path::new("<names>"))?,
            Pool::parse(cities, Path::new("<cities>"))?,
            Pool::parse(numbers, Path::new("<numbers>"))?,
            Pool::parse(dates, Path::new("<dates>"))?,
        )
    }

    pub fn load(names: &Path, cities: &Path, numbers: &Path, dates: &Path) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Self::from_pools(
            Pool::parse(&read(names)?, names)?,
            Pool::parse(&read(cities)?, cities)?,
            Pool::parse(&read(numbers)?, numbers)?,
            Pool::parse(&read(dates)?, dates)?,
        )
    }

    pub fn builtin() -> Self {
        let d = crate::resources::builtin();
        Self::from_texts(d.lex_names, d.lex_cities, d.lex_numbers, d.lex_dates).expect("bundled lexicons parse")
    }

    fn validate(&self) -> Result<()> {
        if !self.gender_neutral_names.is_partitioned() {
            return Err(Error::Input("the name lexicon must have [train]/[dev]/[test] sections".into()));
        }
        for split in Split::ALL {
            for n in self.numbers.get(split) {
                n.parse::<u64>()
                    .map_err(|_| Error::Input(format!("number lexicon entry {n:?} is not a nonnegative integer")))?;
            }
        }
        Ok(())
    }

    pub fn numbers(&self, split: Split) -> Vec<u64> {
        self.numbers.get(split).iter().map(|n| n.parse().expect("validated on load")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_partition() {
        let p = Pool::parse("[train]\na\nb\n[dev]\nc\n[test]\nd # trailing\n", Path::new("x")).unwrap();
        assert!(p.is_partitioned());
        assert_eq!(p.get(Split::Train), ["a", "b"]);
        assert_eq!(p.get(Split::Test), ["d"]);
    }

    #[test]
    fn headerless_file_is_shared() {
        let p = Pool::parse("1\n2\n", Path::new("x")).unwrap();
        assert!(!p.is_partitioned());
        assert_eq!(p.get(Split::Dev), ["1", "2"]);
    }

    #[test]
    fn overlapping_sections_are_rejected() {
        let err = Pool::parse("[train]\nKendall\n[test]\nkendall\n", Path::new("names.txt")).unwrap_err();
        assert!(err.to_string().contains("kendall"), "{err}");
    }

    #[test]
    fn bundled_lexicons() {
        let lex = Lexicons::builtin();
        for split in Split::ALL {
            assert_eq!(lex.gender_neutral_names.get(split).len(), 15);
        }
        let cities: usize = Split::ALL.iter().map(|&s| lex.cities_countries.get(s).len()).sum();
        assert_eq!(cities, 30);
        assert!(lex.numbers(Split::Train).len() > 10);
    }

    #[test]
    fn bundled_gazetteer_covers_lexicon_entities() {
        let g = crate::ner::Gazetteer::builtin();
        let lex = Lexicons::builtin();
        for split in Split::ALL {
            for n in lex.gender_neutral_names.get(split) {
                assert_eq!(g.tag(n), crate::ner::NerCategory::Name, "{n}");
            }
            for c in lex.cities_countries.get(split) {
                assert_eq!(g.tag(c), crate::ner::NerCategory::Name, "{c}");
            }
            for d in lex.dates.get(split) {
                assert_eq!(g.tag(d), crate::ner::NerCategory::Date, "{d}");
            }
            for n in lex.numbers.get(split) {
                assert_eq!(g.tag(n), crate::ner::NerCategory::Numeric, "{n}");
            }
        }
    }
}
