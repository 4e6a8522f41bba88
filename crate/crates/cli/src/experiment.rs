//! Experiment specs: a list of train/test rows rendered as one accuracy
//! table. Trained checkpoints are cached by the hash of the training data
//! and the full run config, so rows sharing both train once.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lambda_nli::corpus::NliExample;
use lambda_nli::model::{evaluate, EpochMetrics, EvalReport, Mode, Model};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Table;

use crate::commands::{metrics_csv, read_corpora};
use crate::config::{self, RunConfig};
use crate::error::{CliError, CliResult};
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Output directory, relative to the spec file.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Run config layer shared by every row.
    #[serde(default)]
    pub defaults: Table,
    #[serde(rename = "row")]
    pub rows: Vec<RowSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub name: String,
    pub train: Vec<PathBuf>,
    #[serde(default)]
    pub dev: Option<PathBuf>,
    pub test: Vec<PathBuf>,
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Run config layer applied over the defaults.
    #[serde(default)]
    pub config: Table,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> CliResult<Self> {
        let table = config::read_table(path)?;
        let spec: ExperimentSpec = table.try_into().map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        if spec.rows.is_empty() {
            return Err(CliError::usage(format!("{}: no [[row]] entries", path.display())));
        }
        if let Some(r) = spec.rows.iter().find(|r| r.train.is_empty() || r.test.is_empty()) {
            return Err(CliError::usage(format!("row {:?} needs at least one train and one test corpus", r.name)));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: PathBuf,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub name: String,
    pub mode: Option<Mode>,
    pub train: Vec<PathBuf>,
    pub dev: Option<PathBuf>,
    pub seed: Option<u64>,
    pub config: Option<RunConfig>,
    /// Cache key of the trained checkpoint.
    pub key: Option<String>,
    pub cached: bool,
    pub best_epoch: Option<usize>,
    pub train_seconds: f64,
    pub train_accuracy: Option<f64>,
    pub results: Vec<TestResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub rows: Vec<RowReport>,
}

/// Sidecar stored next to each cached checkpoint.
#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    format_version: u32,
    best_epoch: usize,
    train_seconds: f64,
    metrics: Vec<EpochMetrics>,
}

/// Hex SHA-256 over the training and dev file contents and the run config.
pub fn cache_key(train: &[Vec<u8>], dev: Option<&[u8]>, cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(b"lambda-nli run v1\n");
    for bytes in train {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    match dev {
        Some(bytes) => {
            h.update(b"dev");
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        None => h.update(b"nodev"),
    }
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    hex::encode(h.finalize())
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn row_config(spec: &ExperimentSpec, row: &RowSpec) -> CliResult<RunConfig> {
    let mut table = spec.defaults.clone();
    config::merge(&mut table, row.config.clone());
    if let Some(m) = row.mode {
        config::set(&mut table, "model", "mode", m.as_str());
    }
    if !config::has(&table, "train", "seed") {
        if let Some(s) = config::env_seed()? {
            config::set(&mut table, "train", "seed", config::u64_value(s)?);
        }
    }
    RunConfig::from_table(table)
}

fn run_row(spec: &ExperimentSpec, row: &RowSpec, base: &Path, cache: &Path, report: &mut RowReport) -> CliResult<()> {
    let cfg = row_config(spec, row)?;
    report.mode = Some(cfg.model.mode);
    report.seed = Some(cfg.train.seed);
    report.config = Some(cfg.clone());

    let train_paths: Vec<PathBuf> = row.train.iter().map(|p| config::resolve(base, p)).collect();
    let dev_path = row.dev.as_ref().map(|p| config::resolve(base, p));
    let test_paths: Vec<PathBuf> = row.test.iter().map(|p| config::resolve(base, p)).collect();
    for p in train_paths.iter().chain(&dev_path).chain(&test_paths) {
        if !p.is_file() {
            return Err(CliError::data(format!("{} does not exist", p.display())));
        }
    }
    let train_bytes: Vec<Vec<u8>> = train_paths.iter().map(|p| read_bytes(p)).collect::<CliResult<_>>()?;
    let dev_bytes = dev_path.as_deref().map(read_bytes).transpose()?;
    let key = cache_key(&train_bytes, dev_bytes.as_deref(), &cfg);
    report.key = Some(key.clone());

    let train_set = read_corpora(&train_paths)?;
    let ckpt = cache.join(format!("{key}.json"));
    let sidecar = cache.join(format!("{key}.run.json"));
    let cached = match (Model::load(&ckpt), std::fs::read_to_string(&sidecar)) {
        (Ok(m), Ok(text)) => serde_json::from_str::<CacheEntry>(&text).ok().map(|e| (m, e)),
        _ => None,
    };
    let (model, entry) = match cached {
        Some(hit) => {
            report.cached = true;
            hit
        }
        None => {
            let dev: Vec<NliExample> = match &dev_path {
                Some(p) => read_corpora(std::slice::from_ref(p))?,
                None => Vec::new(),
            };
            let start = Instant::now();
            let outcome = lambda_nli::model::train(cfg.model.clone(), &train_set, &dev, &cfg.train)?;
            let entry = CacheEntry {
                format_version: FORMAT_VERSION,
                best_epoch: outcome.best_epoch,
                train_seconds: start.elapsed().as_secs_f64(),
                metrics: outcome.metrics,
            };
            std::fs::create_dir_all(cache).map_err(|e| CliError::data(format!("{}: {e}", cache.display())))?;
            outcome.model.save(&ckpt)?;
            let json = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
            std::fs::write(&sidecar, json).map_err(|e| CliError::data(format!("{}: {e}", sidecar.display())))?;
            let csv = cache.join(format!("{key}.metrics.csv"));
            std::fs::write(&csv, metrics_csv(&entry.metrics)).map_err(|e| CliError::data(format!("{}: {e}", csv.display())))?;
            (outcome.model, entry)
        }
    };
    report.best_epoch = Some(entry.best_epoch);
    report.train_seconds = entry.train_seconds;
    report.train_accuracy = Some(evaluate(&model, &train_set)?.accuracy);
    for (shown, path) in row.test.iter().zip(&test_paths) {
        let data = read_corpora(std::slice::from_ref(path))?;
        report.results.push(TestResult {
            test: shown.clone(),
            report: evaluate(&model, &data)?,
        });
    }
    Ok(())
}

fn short(p: &Path) -> String {
    let parts: Vec<_> = p.components().rev().take(2).collect();
    parts.into_iter().rev().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// The human table: one line per (row, test corpus).
pub fn render_table(report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {:<9} {:>9}  {:<28} {:>8}", "Experiment", "Model", "Train", "Test set", "Test");
    for r in &report.rows {
        let mode = r.mode.map(Mode::as_str).unwrap_or("-");
        let train = r.train_accuracy.map(|a| format!("{:.2}%", 100.0 * a)).unwrap_or_else(|| "-".into());
        if let Some(err) = &r.error {
            let _ = writeln!(s, "{:<28} {:<9} {:>9}  failed: {err}", r.name, mode, train);
            continue;
        }
        for (i, t) in r.results.iter().enumerate() {
            let (name, mode, train) = if i == 0 { (r.name.as_str(), mode, train.as_str()) } else { ("", "", "") };
            let _ = writeln!(s, "{:<28} {:<9} {:>9}  {:<28} {:>7.2}%", name, mode, train, short(&t.test), 100.0 * t.report.accuracy);
        }
    }
    s
}

/// Runs every row in order. A failing row is recorded and the rest still
/// run; the command then fails with the first row error.
pub fn run(spec_path: &Path, out_dir: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let spec = ExperimentSpec::load(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let dir = match (out_dir, &spec.out) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => config::resolve(&base, d),
        (None, None) => base.join("experiment"),
    };
    let cache = dir.join("cache");

    let mut rows = Vec::with_capacity(spec.rows.len());
    let mut first_error = None;
    for row in &spec.rows {
        let mut report = RowReport {
            name: row.name.clone(),
            mode: row.mode,
            train: row.train.clone(),
            dev: row.dev.clone(),
            seed: None,
            config: None,
            key: None,
            cached: false,
            best_epoch: None,
            train_seconds: 0.0,
            train_accuracy: None,
            results: Vec::new(),
            error: None,
        };
        if let Err(e) = run_row(&spec, row, &base, &cache, &mut report) {
            report.error = Some(e.to_string());
            report.results.clear();
            first_error.get_or_insert(e);
        }
        rows.push(report);
    }

    let report = RunReport {
        format_version: FORMAT_VERSION,
        rows,
    };
    let table = render_table(&report);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    for (name, text) in [("report.json", json.as_str()), ("table.txt", table.as_str())] {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
    }
    write!(out, "{table}")?;
    writeln!(out, "report {}", dir.join("report.json").display())?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_key_tracks_data_and_config() {
        let cfg = RunConfig::default();
        let a = cache_key(&[b"x".to_vec()], None, &cfg);
        assert_eq!(a, cache_key(&[b"x".to_vec()], None, &cfg));
        assert_eq!(a.len(), 64);
        assert_ne!(a, cache_key(&[b"y".to_vec()], None, &cfg));
        assert_ne!(a, cache_key(&[b"x".to_vec()], Some(b""), &cfg));
        // file boundaries matter
        assert_ne!(cache_key(&[b"ab".to_vec()], None, &cfg), cache_key(&[b"a".to_vec(), b"b".to_vec()], None, &cfg));
        let mut other = cfg.clone();
        other.train.seed = 1;
        assert_ne!(a, cache_key(&[b"x".to_vec()], None, &other));
    }

    #[test]
    fn spec_parses_layers() {
        let text = r#"
            [defaults.train]
            epochs = 2
            [[row]]
            name = "a"
            train = ["t.jsonl"]
            test = ["x.jsonl"]
            mode = "baseline"
            [row.config.train]
            lr = 0.1
        "#;
        let spec: ExperimentSpec = text.parse::<Table>().unwrap().try_into().unwrap();
        let cfg = row_config(&spec, &spec.rows[0]).unwrap();
        assert_eq!(cfg.train.epochs, 2);
        assert_eq!(cfg.train.lr, 0.1);
        assert_eq!(cfg.model.mode, Mode::Baseline);
    }

    #[test]
    fn short_keeps_two_components() {
        assert_eq!(short(Path::new("/a/b/ner_changed/test.jsonl")), "ner_changed/test.jsonl");
        assert_eq!(short(Path::new("x.jsonl")), "x.jsonl");
    }
}
