use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use lambda_nli::corpus::{read_jsonl, Label, NliExample};
use lambda_nli::datagen::{generate as gen_corpora, Dataset, GenConfig, GenInputs, Split};
use lambda_nli::model::{evaluate, gradcheck_model, EpochMetrics, EvalReport, GradcheckReport, Mode, Model};
use lambda_nli::tensor::Tensor;
use serde::{Deserialize, Serialize};
use toml::Table;

use crate::config::{self, RunConfig};
use crate::error::{CliError, CliResult};
use crate::{TrainArgs, FORMAT_VERSION};

pub fn read_corpora(paths: &[PathBuf]) -> CliResult<Vec<NliExample>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_jsonl(p)?);
    }
    Ok(all)
}

pub fn generate(config_path: Option<&Path>, seed: Option<u64>, dir: &Path, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = match config_path {
        Some(p) => {
            let table = config::read_table(p)?;
            let seeded = table.contains_key("seed");
            let mut cfg: GenConfig = table.try_into().map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            let base = p.parent().unwrap_or(Path::new("."));
            let r = &mut cfg.resources;
            for slot in [
                &mut r.gazetteer,
                &mut r.names,
                &mut r.cities,
                &mut r.numbers,
                &mut r.dates,
                &mut r.ner_templates,
                &mut r.role_templates,
                &mut r.swap_pairs,
                &mut r.story_sentences,
            ] {
                if let Some(path) = slot.as_mut() {
                    *path = config::resolve(base, path);
                }
            }
            if seed.is_none() && !seeded {
                if let Some(s) = config::env_seed()? {
                    cfg.seed = s;
                }
            }
            cfg
        }
        None => GenConfig {
            seed: config::env_seed()?.unwrap_or(GenConfig::default().seed),
            ..GenConfig::default()
        },
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(CliError::usage)?;
    let inputs = GenInputs::load(&cfg.resources)?;
    let generated = gen_corpora(&inputs, &cfg)?;
    generated.write(dir)?;

    writeln!(out, "seed {}", cfg.seed)?;
    for d in Dataset::ALL {
        let sizes: Vec<String> = Split::ALL
            .iter()
            .map(|&s| format!("{} {}", s.as_str(), generated.get(d, s).len()))
            .collect();
        writeln!(out, "{:<14} {}", d.as_str(), sizes.join(", "))?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

/// Builds the run config for `train`: file, then flags, with NLI_SEED as
/// the last seed fallback.
pub fn train_config(args: &TrainArgs) -> CliResult<RunConfig> {
    let mut table = match &args.config {
        Some(p) => config::read_table(p)?,
        None => Table::new(),
    };
    if let Some(m) = args.mode {
        config::set(&mut table, "model", "mode", m.as_str());
    }
    let floats = [
        ("model", "sym_weight", args.w),
        ("model", "slope", args.slope),
        ("model", "lambda_init", args.lambda_init),
        ("train", "lr", args.lr),
        ("train", "unk_dropout", args.unk_dropout),
        ("train", "name_dropout", args.name_dropout),
        ("train", "clip_norm", args.clip),
    ];
    for (section, key, v) in floats {
        if let Some(v) = v {
            config::set(&mut table, section, key, v);
        }
    }
    for (key, v) in [("epochs", args.epochs), ("batch_size", args.batch)] {
        if let Some(v) = v {
            config::set(&mut table, "train", key, config::u64_value(v as u64)?);
        }
    }
    let seed = match args.seed {
        Some(s) => Some(s),
        None if config::has(&table, "train", "seed") => None,
        None => config::env_seed()?,
    };
    if let Some(s) = seed {
        config::set(&mut table, "train", "seed", config::u64_value(s)?);
    }
    RunConfig::from_table(table)
}

pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,train_loss,train_accuracy,dev_accuracy\n");
    for m in metrics {
        let dev = m.dev_accuracy.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", m.epoch, m.train_loss, m.train_accuracy, dev);
    }
    s
}

pub fn default_metrics_path(checkpoint: &Path) -> PathBuf {
    let stem = checkpoint.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    checkpoint.with_file_name(format!("{stem}.metrics.csv"))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = train_config(args)?;
    let train_set = read_corpora(&args.train)?;
    let dev = match &args.dev {
        Some(p) => read_jsonl(p)?,
        None => Vec::new(),
    };
    let outcome = lambda_nli::model::train(cfg.model, &train_set, &dev, &cfg.train)?;
    write_file(&args.out, &outcome.model.to_json())?;
    let metrics_path = args.metrics.clone().unwrap_or_else(|| default_metrics_path(&args.out));
    write_file(&metrics_path, &metrics_csv(&outcome.metrics))?;

    let mode = outcome.model.config.mode;
    write!(out, "trained {mode} model, seed {}, kept epoch {} of {}", cfg.train.seed, outcome.best_epoch, cfg.train.epochs)?;
    match outcome.metrics.iter().find(|m| m.epoch == outcome.best_epoch).and_then(|m| m.dev_accuracy) {
        Some(d) => writeln!(out, ", dev accuracy {d:.4}")?,
        None => writeln!(out)?,
    }
    writeln!(out, "checkpoint {}", args.out.display())?;
    writeln!(out, "metrics {}", metrics_path.display())?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalOutput {
    pub format_version: u32,
    pub model: PathBuf,
    pub data: Vec<PathBuf>,
    pub mode: Mode,
    #[serde(flatten)]
    pub report: EvalReport,
}

pub fn render_report(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "accuracy {:.4} ({}/{})", report.accuracy, report.correct, report.total);
    let _ = writeln!(s, "confusion (rows gold, columns predicted)");
    let _ = writeln!(s, "{:<15}{:>15}{:>15}{:>15}", "", "entailment", "contradiction", "neutral");
    for (gold, row) in Label::ALL.iter().zip(&report.confusion) {
        let _ = writeln!(s, "{:<15}{:>15}{:>15}{:>15}", gold.as_str(), row[0], row[1], row[2]);
    }
    let _ = writeln!(s, "per source");
    for (src, st) in &report.per_source {
        let _ = writeln!(s, "  {src:<13}{:.4} ({}/{})", st.accuracy, st.correct, st.total);
    }
    s
}

pub fn eval(model_path: &Path, data: &[PathBuf], json: bool, out: &mut dyn Write) -> CliResult<()> {
    let model = Model::load(model_path)?;
    let examples = read_corpora(data)?;
    let report = evaluate(&model, &examples)?;
    if json {
        let doc = EvalOutput {
            format_version: FORMAT_VERSION,
            model: model_path.to_path_buf(),
            data: data.to_vec(),
            mode: model.config.mode,
            report,
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("report serializes"))?;
    } else {
        write!(out, "{}", render_report(&report))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GradcheckOutput {
    pub format_version: u32,
    pub passed: bool,
    pub max_error: f64,
    pub runs: Vec<GradcheckReport>,
}

pub fn gradcheck(seed: Option<u64>, seeds: u64, json: bool, out: &mut dyn Write) -> CliResult<()> {
    if seeds == 0 {
        return Err(CliError::usage("--seeds must be positive"));
    }
    let first = match seed {
        Some(s) => s,
        None => config::env_seed()?.unwrap_or(0),
    };
    let mut runs = Vec::new();
    for s in first..first.saturating_add(seeds) {
        for mode in [Mode::Baseline, Mode::Lambda] {
            runs.push(gradcheck_model(mode, s).map_err(|e| CliError::Numeric(e.to_string()))?);
        }
    }
    let max_error = runs.iter().fold(0.0f64, |m, r| m.max(r.max_error));
    let passed = runs.iter().all(|r| r.passed);
    if json {
        let doc = GradcheckOutput {
            format_version: FORMAT_VERSION,
            passed,
            max_error,
            runs: runs.clone(),
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("report serializes"))?;
    } else {
        for r in &runs {
            let groups: Vec<String> = r.errors.iter().map(|(k, v)| format!("{k} {v:.2e}")).collect();
            writeln!(out, "{:<8} seed {:<4} max {:.2e}  {}", r.mode.as_str(), r.seed, r.max_error, groups.join("  "))?;
        }
        writeln!(out, "max relative error {max_error:.3e}: {}", if passed { "ok" } else { "FAILED" })?;
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("gradient check failed, max relative error {max_error:e}")))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Matrices {
    pub e: Vec<Vec<f64>>,
    pub sym: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub e_prime: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictOutput {
    pub format_version: u32,
    pub mode: Mode,
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub label: Label,
    pub probs: BTreeMap<Label, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attention: Option<Matrices>,
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    let cols = t.shape()[1];
    if cols == 0 {
        return vec![Vec::new(); t.shape()[0]];
    }
    t.data().chunks(cols).map(<[f64]>::to_vec).collect()
}

pub fn predict(model_path: &Path, premise: &str, hypothesis: &str, explain: bool, json: bool, out: &mut dyn Write) -> CliResult<()> {
    let model = Model::load(model_path)?;
    let ex = NliExample::from_text(premise, hypothesis, Label::Entailment, "cli").map_err(CliError::usage)?;
    let (pred, attention) = if explain {
        let (p, m) = model.explain(&ex)?;
        let m = Matrices {
            e: rows(&m.e),
            sym: rows(&m.sym),
            lambda: rows(&m.lambda),
            e_prime: rows(&m.e_prime),
        };
        (p, Some(m))
    } else {
        (model.predict(&ex)?, None)
    };
    if json || explain {
        let doc = PredictOutput {
            format_version: FORMAT_VERSION,
            mode: model.config.mode,
            premise: ex.premise,
            hypothesis: ex.hypothesis,
            label: pred.label,
            probs: Label::ALL.iter().map(|&l| (l, pred.probs[l.index()])).collect(),
            attention,
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("prediction serializes"))?;
    } else {
        let probs: Vec<String> = Label::ALL.iter().map(|l| format!("{} {:.4}", l.as_str(), pred.probs[l.index()])).collect();
        writeln!(out, "{}\t{}", pred.label, probs.join("  "))?;
    }
    Ok(())
}
