use std::path::{Path, PathBuf};

use lambda_nli::model::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "NLI_SEED";

/// Model and training settings for one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_table(table: Table) -> CliResult<Self> {
        let cfg: RunConfig = table.try_into().map_err(CliError::usage)?;
        cfg.model.validate().map_err(CliError::usage)?;
        cfg.train.validate().map_err(CliError::usage)?;
        Ok(cfg)
    }
}

/// Seed from the environment, if set.
pub fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::usage(format!("{SEED_ENV}: {e}"))),
    }
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    text.parse::<Table>().map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Recursively overlays `over` onto `base`; leaves of `over` win.
pub fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sets `section.key` in a nested table.
pub fn set(table: &mut Table, section: &str, key: &str, value: impl Into<Value>) {
    let entry = table.entry(section).or_insert_with(|| Value::Table(Table::new()));
    if let Value::Table(t) = entry {
        t.insert(key.to_string(), value.into());
    }
}

pub fn has(table: &Table, section: &str, key: &str) -> bool {
    table.get(section).and_then(Value::as_table).is_some_and(|t| t.contains_key(key))
}

/// Joins `p` onto `base` unless it is already absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn u64_value(v: u64) -> CliResult<Value> {
    i64::try_from(v)
        .map(Value::Integer)
        .map_err(|_| CliError::usage(format!("{v} does not fit a config integer")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_overrides_leaves_and_keeps_siblings() {
        let mut base: Table = "[model]\nsym_weight = 2.0\nmode = \"lambda\"\n[train]\nepochs = 3\n".parse().unwrap();
        let over: Table = "[model]\nmode = \"baseline\"\n".parse().unwrap();
        merge(&mut base, over);
        let cfg = RunConfig::from_table(base).unwrap();
        assert_eq!(cfg.model.mode, lambda_nli::model::Mode::Baseline);
        assert_eq!(cfg.model.sym_weight, 2.0);
        assert_eq!(cfg.train.epochs, 3);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        let t: Table = "[train]\nepoch = 3\n".parse().unwrap();
        assert!(matches!(RunConfig::from_table(t), Err(CliError::Usage(_))));
        let t: Table = "[train]\nlr = -1.0\n".parse().unwrap();
        assert!(matches!(RunConfig::from_table(t), Err(CliError::Usage(_))));
    }

    #[test]
    fn set_and_has() {
        let mut t = Table::new();
        assert!(!has(&t, "train", "seed"));
        set(&mut t, "train", "seed", 4);
        assert!(has(&t, "train", "seed"));
        assert_eq!(RunConfig::from_table(t).unwrap().train.seed, 4);
    }

    #[test]
    fn resolve_keeps_absolute_paths() {
        assert_eq!(resolve(Path::new("/a"), Path::new("b")), PathBuf::from("/a/b"));
        assert_eq!(resolve(Path::new("/a"), Path::new("/b")), PathBuf::from("/b"));
    }
}
