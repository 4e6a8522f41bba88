//! Decomposable-attention classifier: transform, attend, compare, aggregate,
//! classify.
//!
//! Each token's embedding plus a learned position vector goes through one
//! LeakyReLU layer to give `ā` and `b̄`. Attention scores `e = ā b̄ᵀ` (or their
//! lambda blend `e'`) are normalized per row to align the hypothesis to every
//! premise token and per column for the reverse direction. A shared compare
//! layer looks at each token next to its aligned vector, the results are
//! summed per sentence, and a two-layer classifier produces three logits.

mod check;
mod checkpoint;
mod eval;
mod train;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use check::{gradcheck_model, GradcheckReport};
pub use checkpoint::CHECKPOINT_FORMAT_VERSION;
pub use eval::{evaluate, EvalReport, SourceStats};
pub use train::{train, EpochMetrics, TrainConfig, TrainOutcome};

use crate::attention::{self, AttentionMatrices, SymConfig};
use crate::corpus::{Label, NliExample};
use crate::error::{Error, Result};
use crate::ner::{casefold, pair_feature, Gazetteer, PairFeature};
use crate::tape::{GradTape, Var};
use crate::tensor::{self, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Lambda,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Lambda => "lambda",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "lambda" => Ok(Mode::Lambda),
            other => Err(Error::Input(format!("unknown mode {other:?}, expected baseline or lambda"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub mode: Mode,
    /// Embedding size `d`.
    pub embed_dim: usize,
    /// Transformed size `d′`.
    pub hidden_dim: usize,
    pub compare_dim: usize,
    pub classifier_dim: usize,
    /// Positions past this share the last position vector.
    pub max_len: usize,
    pub slope: f64,
    /// Symbolic match score `w`.
    pub sym_weight: f64,
    /// Initial value of every lambda weight.
    pub lambda_init: f64,
    pub freeze_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mode: Mode::Lambda,
            embed_dim: 32,
            hidden_dim: 32,
            compare_dim: 32,
            classifier_dim: 32,
            max_len: 64,
            slope: tensor::DEFAULT_SLOPE,
            sym_weight: 1.0,
            lambda_init: 1.0,
            freeze_embeddings: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        SymConfig::new(self.sym_weight)?;
        if !self.lambda_init.is_finite() {
            return Err(Error::Input(format!("lambda_init must be finite, got {}", self.lambda_init)));
        }
        let dims = [self.embed_dim, self.hidden_dim, self.compare_dim, self.classifier_dim, self.max_len];
        if dims.contains(&0) {
            return Err(Error::Input(format!("model sizes must be positive, got {dims:?}")));
        }
        if !(self.slope >= 0.0 && self.slope < 1.0) {
            return Err(Error::Input(format!("slope must lie in [0, 1), got {}", self.slope)));
        }
        Ok(())
    }
}

pub const UNK: usize = 0;
const UNK_TOKEN: &str = "<unk>";

/// Case-folded token list; index 0 is the shared unknown-word slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Every case-folded token of both sentences, sorted.
    pub fn build(examples: &[NliExample]) -> Self {
        let set: BTreeSet<String> = examples
            .iter()
            .flat_map(|ex| ex.premise.iter().chain(&ex.hypothesis))
            .map(|t| casefold(t))
            .collect();
        let tokens = std::iter::once(UNK_TOKEN.to_string()).chain(set.into_iter().filter(|t| t != UNK_TOKEN)).collect();
        Self::from_tokens(tokens).expect("built vocabulary is well formed")
    }

    /// From tokens in index order; the first must be the unknown marker.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::Input(format!("vocabulary must start with {UNK_TOKEN}")));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(&casefold(token)).copied().unwrap_or(UNK)
    }
}

/// Every trainable array. [`Params::NAMES`] fixes their order everywhere
/// (gradients, checkpoints, gradient checks).
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embed: Tensor,
    pub position: Tensor,
    pub transform_w: Tensor,
    pub transform_b: Tensor,
    pub compare_w: Tensor,
    pub compare_b: Tensor,
    pub hidden_w: Tensor,
    pub hidden_b: Tensor,
    pub output_w: Tensor,
    pub output_b: Tensor,
    /// Lambda layer weights `W_λ`, `1×16`. Unused in baseline mode.
    pub lambda_w: Tensor,
}

impl Params {
    pub const NAMES: [&'static str; 11] = [
        "embed",
        "position",
        "transform_w",
        "transform_b",
        "compare_w",
        "compare_b",
        "hidden_w",
        "hidden_b",
        "output_w",
        "output_b",
        "lambda_w",
    ];

    pub fn shapes(cfg: &ModelConfig, vocab_len: usize) -> [[usize; 2]; 11] {
        let (d, h, c, k) = (cfg.embed_dim, cfg.hidden_dim, cfg.compare_dim, cfg.classifier_dim);
        [
            [vocab_len, d],
            [cfg.max_len, d],
            [d, h],
            [1, h],
            [2 * h, c],
            [1, c],
            [2 * c, k],
            [1, k],
            [k, Label::ALL.len()],
            [1, Label::ALL.len()],
            [1, PairFeature::DIM],
        ]
    }

    /// Embeddings uniform in ±0.1, layers Glorot-uniform, biases zero,
    /// `W_λ` filled with `cfg.lambda_init`.
    pub fn init<R: Rng>(cfg: &ModelConfig, vocab_len: usize, rng: &mut R) -> Self {
        let shapes = Self::shapes(cfg, vocab_len);
        let mut uniform = |shape: [usize; 2], limit: f64| {
            let dist = Uniform::new_inclusive(-limit, limit);
            let data = (0..shape[0] * shape[1]).map(|_| dist.sample(rng)).collect();
            Tensor::new(shape.to_vec(), data).expect("shape matches data")
        };
        let glorot = |shape: [usize; 2]| (6.0 / (shape[0] + shape[1]) as f64).sqrt();
        Params {
            embed: uniform(shapes[0], 0.1),
            position: uniform(shapes[1], 0.1),
            transform_w: uniform(shapes[2], glorot(shapes[2])),
            transform_b: Tensor::zeros(&shapes[3]),
            compare_w: uniform(shapes[4], glorot(shapes[4])),
            compare_b: Tensor::zeros(&shapes[5]),
            hidden_w: uniform(shapes[6], glorot(shapes[6])),
            hidden_b: Tensor::zeros(&shapes[7]),
            output_w: uniform(shapes[8], glorot(shapes[8])),
            output_b: Tensor::zeros(&shapes[9]),
            lambda_w: Tensor::filled(&shapes[10], cfg.lambda_init),
        }
    }

    pub fn tensors(&self) -> [&Tensor; 11] {
        [
            &self.embed,
            &self.position,
            &self.transform_w,
            &self.transform_b,
            &self.compare_w,
            &self.compare_b,
            &self.hidden_w,
            &self.hidden_b,
            &self.output_w,
            &self.output_b,
            &self.lambda_w,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 11] {
        [
            &mut self.embed,
            &mut self.position,
            &mut self.transform_w,
            &mut self.transform_b,
            &mut self.compare_w,
            &mut self.compare_b,
            &mut self.hidden_w,
            &mut self.hidden_b,
            &mut self.output_w,
            &mut self.output_b,
            &mut self.lambda_w,
        ]
    }

    pub(crate) fn from_tensors(t: [Tensor; 11]) -> Self {
        let [embed, position, transform_w, transform_b, compare_w, compare_b, hidden_w, hidden_b, output_w, output_b, lambda_w] =
            t;
        Params {
            embed,
            position,
            transform_w,
            transform_b,
            compare_w,
            compare_b,
            hidden_w,
            hidden_b,
            output_w,
            output_b,
            lambda_w,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::from_tensors(self.tensors().map(|t| Tensor::zeros(t.shape())))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// An example mapped to ids, with the parts of attention that do not depend
/// on parameters precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub premise: Vec<usize>,
    pub hypothesis: Vec<usize>,
    /// Row-major `l_a × l_b` indices of each token pair's category feature.
    pub pair_index: Vec<usize>,
    pub sym: Tensor,
    pub gold: Label,
}

struct Vars {
    embed: Var,
    position: Var,
    transform_w: Var,
    transform_b: Var,
    compare_w: Var,
    compare_b: Var,
    hidden_w: Var,
    hidden_b: Var,
    output_w: Var,
    output_b: Var,
    lambda_w: Var,
    all: [Var; 11],
}

impl Vars {
    fn register<'a>(tape: &mut GradTape<'a>, p: &'a Params) -> Self {
        let all = p.tensors().map(|t| tape.param(t));
        let [embed, position, transform_w, transform_b, compare_w, compare_b, hidden_w, hidden_b, output_w, output_b, lambda_w] =
            all;
        Vars {
            embed,
            position,
            transform_w,
            transform_b,
            compare_w,
            compare_b,
            hidden_w,
            hidden_b,
            output_w,
            output_b,
            lambda_w,
            all,
        }
    }
}

struct Graph {
    probs: Var,
    e: Var,
    lambda: Option<Var>,
    e_prime: Var,
}

/// Class probabilities and the label they pick.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: [f64; 3],
    pub label: Label,
}

/// Highest-probability label; ties go to the lowest label index.
pub fn argmax_label(probs: &[f64; 3]) -> Label {
    let mut best = 0;
    for i in 1..probs.len() {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    Label::from_index(best).expect("three labels")
}

/// `−ln max(p[gold], 1e-12)`.
pub fn loss(probs: &[f64; 3], gold: Label) -> f64 {
    -probs[gold.index()].max(crate::tape::PROB_FLOOR).ln()
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: Params,
    pub gazetteer: Gazetteer,
}

impl Model {
    /// Fresh parameters for `vocab`, drawn from `rng`.
    pub fn init<R: Rng>(config: ModelConfig, vocab: Vocabulary, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, vocab.len(), rng);
        Ok(Model {
            config,
            vocab,
            params,
            gazetteer: Gazetteer::builtin(),
        })
    }

    pub fn from_parts(config: ModelConfig, vocab: Vocabulary, params: Params) -> Result<Self> {
        config.validate()?;
        let shapes = Params::shapes(&config, vocab.len());
        for ((name, t), shape) in Params::NAMES.iter().zip(params.tensors()).zip(shapes) {
            if t.shape() != shape {
                return Err(Error::Input(format!("{name} has shape {:?}, expected {shape:?}", t.shape())));
            }
        }
        if !params.is_finite() {
            return Err(Error::Input("parameters contain non-finite values".into()));
        }
        Ok(Model {
            config,
            vocab,
            params,
            gazetteer: Gazetteer::builtin(),
        })
    }

    pub fn encode(&self, ex: &NliExample) -> Result<Encoded> {
        ex.validate()?;
        let ids = |s: &[String]| s.iter().map(|t| self.vocab.id(t)).collect::<Vec<_>>();
        let fa: Vec<String> = ex.premise.iter().map(|t| casefold(t)).collect();
        let fb: Vec<String> = ex.hypothesis.iter().map(|t| casefold(t)).collect();
        let ca = self.gazetteer.tag_all(&ex.premise);
        let cb = self.gazetteer.tag_all(&ex.hypothesis);
        let pair_index = ca.iter().flat_map(|&a| cb.iter().map(move |&b| pair_feature(a, b).hot_index())).collect();
        Ok(Encoded {
            premise: ids(&ex.premise),
            hypothesis: ids(&ex.hypothesis),
            pair_index,
            sym: attention::symbolic_similarity_folded(&fa, &fb, SymConfig { w: self.config.sym_weight }),
            gold: ex.label,
        })
    }

    fn sentence(&self, tape: &mut GradTape<'_>, v: &Vars, ids: &[usize]) -> Result<Var> {
        let last = self.config.max_len - 1;
        let positions: Vec<usize> = (0..ids.len()).map(|i| i.min(last)).collect();
        let emb = tape.gather(v.embed, ids)?;
        let pos = tape.gather(v.position, &positions)?;
        let x = tape.add(emb, pos)?;
        let h = tape.matmul(x, v.transform_w)?;
        let h = tape.add_row(h, v.transform_b)?;
        Ok(tape.leaky_relu(h, self.config.slope))
    }

    fn compare(&self, tape: &mut GradTape<'_>, v: &Vars, own: Var, aligned: Var) -> Result<Var> {
        let cat = tape.concat_cols(own, aligned)?;
        let g = tape.matmul(cat, v.compare_w)?;
        let g = tape.add_row(g, v.compare_b)?;
        let g = tape.leaky_relu(g, self.config.slope);
        Ok(tape.sum_rows(g))
    }

    fn graph(&self, tape: &mut GradTape<'_>, v: &Vars, enc: &Encoded) -> Result<Graph> {
        let (la, lb) = (enc.premise.len(), enc.hypothesis.len());
        if la == 0 || lb == 0 {
            return Err(Error::Input("premise and hypothesis must be nonempty".into()));
        }
        let a = self.sentence(tape, v, &enc.premise)?;
        let b = self.sentence(tape, v, &enc.hypothesis)?;
        let e = tape.matmul_bt(a, b)?;
        let (lambda, e_prime) = match self.config.mode {
            Mode::Baseline => (None, e),
            Mode::Lambda => {
                let z = tape.gather_elements(v.lambda_w, &enc.pair_index, &[la, lb])?;
                let lam = tape.lambda_gate(z, self.config.slope);
                (Some(lam), tape.blend(lam, e, enc.sym.clone())?)
            }
        };
        let to_b = tape.softmax_rows(e_prime);
        let to_a = tape.softmax_cols(e_prime);
        let beta = tape.matmul(to_b, b)?;
        let alpha = tape.matmul_at(to_a, a)?;
        let v1 = self.compare(tape, v, a, beta)?;
        let v2 = self.compare(tape, v, b, alpha)?;
        let joint = tape.concat_cols(v1, v2)?;
        let h = tape.matmul(joint, v.hidden_w)?;
        let h = tape.add_row(h, v.hidden_b)?;
        let h = tape.leaky_relu(h, self.config.slope);
        let logits = tape.matmul(h, v.output_w)?;
        let logits = tape.add_row(logits, v.output_b)?;
        let probs = tape.softmax_rows(logits);
        Ok(Graph {
            probs,
            e,
            lambda,
            e_prime,
        })
    }

    fn probs_of(tape: &GradTape<'_>, g: &Graph) -> [f64; 3] {
        let p = tape.value(g.probs).data();
        [p[0], p[1], p[2]]
    }

    pub fn predict_encoded(&self, enc: &Encoded) -> Result<Prediction> {
        let mut tape = GradTape::new();
        let v = Vars::register(&mut tape, &self.params);
        let g = self.graph(&mut tape, &v, enc)?;
        let probs = Self::probs_of(&tape, &g);
        Ok(Prediction {
            probs,
            label: argmax_label(&probs),
        })
    }

    pub fn predict(&self, ex: &NliExample) -> Result<Prediction> {
        self.predict_encoded(&self.encode(ex)?)
    }

    /// Prediction plus the four attention matrices.
    ///
    /// In baseline mode the gate is reported as all ones, so the stored
    /// `e_prime` is `e` passed through the same blend.
    pub fn explain(&self, ex: &NliExample) -> Result<(Prediction, AttentionMatrices)> {
        let enc = self.encode(ex)?;
        let mut tape = GradTape::new();
        let v = Vars::register(&mut tape, &self.params);
        let g = self.graph(&mut tape, &v, &enc)?;
        let probs = Self::probs_of(&tape, &g);
        let e = tape.value(g.e).clone();
        let (lambda, e_prime) = match g.lambda {
            Some(lam) => (tape.value(lam).clone(), tape.value(g.e_prime).clone()),
            None => {
                let ones = Tensor::filled(e.shape(), 1.0);
                let ep = attention::blend(&e, &enc.sym, &ones)?;
                (ones, ep)
            }
        };
        let m = AttentionMatrices {
            e,
            sym: enc.sym,
            lambda,
            e_prime,
        };
        Ok((
            Prediction {
                probs,
                label: argmax_label(&probs),
            },
            m,
        ))
    }

    /// Loss and gradients (in [`Params::NAMES`] order) for one example.
    /// Returns the tape's kink margin as well, for finite-difference checks.
    pub fn loss_and_grad(&self, enc: &Encoded) -> Result<(f64, Params, f64)> {
        self.loss_and_grad_with(&self.params, enc)
    }

    pub(crate) fn loss_and_grad_with(&self, params: &Params, enc: &Encoded) -> Result<(f64, Params, f64)> {
        let mut tape = GradTape::new();
        let v = Vars::register(&mut tape, params);
        let g = self.graph(&mut tape, &v, enc)?;
        let l = tape.nll(g.probs, enc.gold.index())?;
        let value = tape.value(l).data()[0];
        let mut grads = tape.backward(l);
        let margin = tape.kink_margin();
        let tensors = v.all.map(|var| grads.take(var));
        let zeros = params.zeros_like();
        let out: [Tensor; 11] = std::array::from_fn(|i| match &tensors[i] {
            Some(t) => t.clone(),
            None => zeros.tensors()[i].clone(),
        });
        Ok((value, Params::from_tensors(out), margin))
    }

    /// Mean loss over `examples`.
    pub fn mean_loss(&self, examples: &[NliExample]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::EmptyDataset("loss"));
        }
        let mut total = 0.0;
        for ex in examples {
            total += loss(&self.predict(ex)?.probs, ex.label);
        }
        Ok(total / examples.len() as f64)
    }
}

/// `ā` for one sentence: embedding plus position vector through the
/// transform layer.
pub fn embed_and_transform<S: AsRef<str>>(tokens: &[S], model: &Model) -> Result<Tensor> {
    if tokens.is_empty() {
        return Err(Error::Input("empty sentence".into()));
    }
    let ids: Vec<usize> = tokens.iter().map(|t| model.vocab.id(t.as_ref())).collect();
    let mut tape = GradTape::new();
    let v = Vars::register(&mut tape, &model.params);
    let out = model.sentence(&mut tape, &v, &ids)?;
    Ok(tape.value(out).clone())
}
