use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Encoded, Mode, Model, ModelConfig, Params, Vocabulary};
use crate::corpus::{Label, NliExample};
use crate::error::{Error, Result};
use crate::gradcheck::{grad_check, DEFAULT_EPS, TOLERANCE};
use crate::tensor::Tensor;

/// Mixed-category words so every lambda weight a pair can reach gets used.
const WORDS: [&str; 14] = [
    "Kendall", "Peyton", "Dublin", "35", "62", "1998", "March", "five", "the", "moved", "to", "park", "saw", "a",
];

/// Activations closer than this to a kink trigger a fresh draw.
const MIN_KINK_MARGIN: f64 = 100.0 * DEFAULT_EPS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub mode: Mode,
    pub seed: u64,
    /// Maximum relative error per parameter array.
    pub errors: BTreeMap<String, f64>,
    pub max_error: f64,
    pub passed: bool,
}

fn random_example<R: Rng>(rng: &mut R) -> Result<NliExample> {
    let la = rng.gen_range(3..=6);
    let premise: Vec<String> = (0..la).map(|_| WORDS.choose(rng).expect("nonempty").to_string()).collect();
    // hypothesis: premise words with some replaced, then a partial shuffle,
    // so there are both exact matches and mismatches
    let mut hypothesis = premise.clone();
    for t in hypothesis.iter_mut() {
        if rng.gen_bool(0.4) {
            *t = WORDS.choose(rng).expect("nonempty").to_string();
        }
    }
    if rng.gen_bool(0.5) {
        hypothesis.push(WORDS.choose(rng).expect("nonempty").to_string());
    }
    let i = rng.gen_range(0..hypothesis.len());
    let j = rng.gen_range(0..hypothesis.len());
    hypothesis.swap(i, j);
    let label = Label::ALL[rng.gen_range(0..3)];
    NliExample::new(premise, hypothesis, label, "gradcheck")
}

/// Small random model and example with every activation comfortably away
/// from a kink.
fn draw(mode: Mode, rng: &mut ChaCha8Rng) -> Result<(Model, Encoded)> {
    for _ in 0..1000 {
        let ex = random_example(rng)?;
        // leave one word out of the vocabulary so the unknown row is exercised
        let mut vocab_src = ex.clone();
        vocab_src.premise.truncate(vocab_src.premise.len() - 1);
        let vocab = Vocabulary::build(&[vocab_src]);
        let config = ModelConfig {
            mode,
            embed_dim: 5,
            hidden_dim: 4,
            compare_dim: 4,
            classifier_dim: 4,
            max_len: 8,
            sym_weight: rng.gen_range(0.5..2.0),
            ..ModelConfig::default()
        };
        let mut model = Model::init(config, vocab, rng)?;
        let scale = |t: &mut Tensor, k: f64| t.data_mut().iter_mut().for_each(|v| *v *= k);
        scale(&mut model.params.embed, 5.0);
        scale(&mut model.params.position, 5.0);
        for b in [
            &mut model.params.transform_b,
            &mut model.params.compare_b,
            &mut model.params.hidden_b,
            &mut model.params.output_b,
        ] {
            b.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
        }
        model.params.lambda_w.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..2.0));
        let enc = model.encode(&ex)?;
        let (_, _, margin) = model.loss_and_grad(&enc)?;
        if margin > MIN_KINK_MARGIN {
            return Ok((model, enc));
        }
    }
    Err(Error::Input("could not draw a gradient-check point away from activation kinks".into()))
}

/// Central-difference check of every parameter array the mode uses.
pub fn gradcheck_model(mode: Mode, seed: u64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (model, enc) = draw(mode, &mut rng)?;
    let mut errors = BTreeMap::new();
    for (k, name) in Params::NAMES.iter().enumerate() {
        if mode == Mode::Baseline && *name == "lambda_w" {
            continue;
        }
        let mut failed = None;
        let err = grad_check(
            |t| {
                let mut params = model.params.clone();
                *params.tensors_mut()[k] = t.clone();
                match model.loss_and_grad_with(&params, &enc) {
                    Ok((v, g, _)) => (v, g.tensors()[k].clone()),
                    Err(e) => {
                        failed = Some(e);
                        (f64::NAN, Tensor::zeros(t.shape()))
                    }
                }
            },
            model.params.tensors()[k],
            DEFAULT_EPS,
        );
        if let Some(e) = failed {
            return Err(e);
        }
        errors.insert(name.to_string(), err);
    }
    let max_error = errors.values().fold(0.0f64, |m, &e| m.max(e));
    Ok(GradcheckReport {
        mode,
        seed,
        errors,
        max_error,
        passed: max_error < TOLERANCE,
    })
}
