//! Word-to-word attention scores, plain and lambda-gated.
//!
//! The plain score between premise position `i` and hypothesis position `j`
//! is the dot product of their transformed vectors. The lambda variant mixes
//! that score with a symbolic score that is `w` when the two surface strings
//! are equal (after case folding) and `0` otherwise:
//!
//! ```text
//! e'[i][j] = λ[i][j] · e[i][j] + (1 − λ[i][j]) · sym[i][j]
//! λ[i][j]  = 1 − LReLU(1 − LReLU(W_λ · x[i][j]))
//! ```
//!
//! where `x[i][j]` is the one-hot [`PairFeature`] of the two tokens' entity
//! categories. Since `x` is one-hot, a model has at most 16 distinct gate
//! values, one per category pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ner::{casefold, PairFeature};
use crate::tensor::{self, leaky_relu_scalar, Tensor};

/// All four score matrices for one sentence pair, each `l_a × l_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMatrices {
    pub e: Tensor,
    pub sym: Tensor,
    pub lambda: Tensor,
    pub e_prime: Tensor,
}

impl AttentionMatrices {
    /// Recomputes `e'` from the stored parts and compares bitwise.
    pub fn blend_is_exact(&self) -> bool {
        match blend(&self.e, &self.sym, &self.lambda) {
            Ok(recomputed) => recomputed
                .data()
                .iter()
                .zip(self.e_prime.data())
                .all(|(a, b)| a.to_bits() == b.to_bits()),
            Err(_) => false,
        }
    }
}

/// Weights of the lambda layer: a `1×16` row, no bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaLayerParams {
    pub w: Tensor,
}

impl LambdaLayerParams {
    /// All-ones weights, which put every gate at exactly 1.
    pub fn ones() -> Self {
        LambdaLayerParams {
            w: Tensor::filled(&[1, PairFeature::DIM], 1.0),
        }
    }

    pub fn from_weights(w: [f64; PairFeature::DIM]) -> Self {
        LambdaLayerParams {
            w: Tensor::row_vector(w.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymConfig {
    /// Score assigned to a string match; must be positive.
    pub w: f64,
}

impl Default for SymConfig {
    fn default() -> Self {
        SymConfig { w: 1.0 }
    }
}

impl SymConfig {
    pub fn new(w: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Input(format!("symbolic match weight must be positive, got {w}")));
        }
        Ok(SymConfig { w })
    }
}

/// `e[i][j] = ā_i · b̄_j`.
pub fn dot_attention(a_bar: &Tensor, b_bar: &Tensor) -> Result<Tensor> {
    tensor::matmul_bt(a_bar, b_bar).map_err(|_| Error::shape("dot_attention", a_bar.shape(), b_bar.shape()))
}

/// `w` where the case-folded strings are equal, `0` elsewhere.
///
/// ```
/// use lambda_nli::attention::{symbolic_similarity, SymConfig};
/// let sym = symbolic_similarity(&["Kendall", "left"], &["kendall", "peyton"], SymConfig::default()).unwrap();
/// assert_eq!(sym.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
/// ```
pub fn symbolic_similarity<S: AsRef<str>>(tokens_a: &[S], tokens_b: &[S], cfg: SymConfig) -> Result<Tensor> {
    if tokens_a.is_empty() || tokens_b.is_empty() {
        return Err(Error::Input("symbolic similarity needs nonempty token lists".into()));
    }
    let fa: Vec<String> = tokens_a.iter().map(|t| casefold(t.as_ref())).collect();
    let fb: Vec<String> = tokens_b.iter().map(|t| casefold(t.as_ref())).collect();
    Ok(symbolic_similarity_folded(&fa, &fb, cfg))
}

pub(crate) fn symbolic_similarity_folded(fa: &[String], fb: &[String], cfg: SymConfig) -> Tensor {
    Tensor::from_fn(fa.len(), fb.len(), |i, j| if fa[i] == fb[j] { cfg.w } else { 0.0 })
}

/// Gate value for a pre-activation `z = W_λ · x`.
#[inline]
pub fn lambda_gate_scalar(z: f64, slope: f64) -> f64 {
    1.0 - leaky_relu_scalar(1.0 - leaky_relu_scalar(z, slope), slope)
}

/// `dλ/dz`, taking the right-hand derivative at the kinks.
#[inline]
pub fn lambda_gate_derivative(z: f64, slope: f64) -> f64 {
    let inner = leaky_relu_scalar(z, slope);
    let d_inner = if z >= 0.0 { 1.0 } else { slope };
    let d_outer = if 1.0 - inner >= 0.0 { 1.0 } else { slope };
    d_outer * d_inner
}

/// Runs the lambda layer on one pair feature. No clamping to `[0, 1]`.
///
/// ```
/// use lambda_nli::attention::{lambda_gate, LambdaLayerParams};
/// use lambda_nli::ner::{pair_feature, NerCategory};
///
/// let mut w = [1.0; 16];
/// w[0] = 2.0;
/// let x = pair_feature(NerCategory::Name, NerCategory::Name);
/// let lam = lambda_gate(x, &LambdaLayerParams::from_weights(w), 0.01);
/// assert!((lam - 1.01).abs() < 1e-15);
/// ```
pub fn lambda_gate(x: PairFeature, p: &LambdaLayerParams, slope: f64) -> f64 {
    let z = tensor::dot(p.w.data(), &x.to_dense());
    lambda_gate_scalar(z, slope)
}

/// Elementwise `λ·e + (1−λ)·sym`.
pub fn blend(e: &Tensor, sym: &Tensor, lambda: &Tensor) -> Result<Tensor> {
    if e.shape() != sym.shape() || e.shape() != lambda.shape() {
        let other = if e.shape() != sym.shape() { sym } else { lambda };
        return Err(Error::shape("blend", e.shape(), other.shape()));
    }
    let data = e
        .data()
        .iter()
        .zip(sym.data())
        .zip(lambda.data())
        .map(|((&ev, &sv), &l)| blend_scalar(ev, sv, l))
        .collect();
    Tensor::new(e.shape().to_vec(), data)
}

#[inline]
pub fn blend_scalar(e: f64, sym: f64, lambda: f64) -> f64 {
    lambda * e + (1.0 - lambda) * sym
}

/// Full lambda attention for one pair, outside any tape.
#[allow(clippy::too_many_arguments)]
pub fn lambda_attention<S: AsRef<str>>(
    a_bar: &Tensor,
    b_bar: &Tensor,
    tokens_a: &[S],
    tokens_b: &[S],
    features: &[Vec<PairFeature>],
    params: &LambdaLayerParams,
    cfg: SymConfig,
    slope: f64,
) -> Result<AttentionMatrices> {
    let e = dot_attention(a_bar, b_bar)?;
    let sym = symbolic_similarity(tokens_a, tokens_b, cfg)?;
    if features.len() != e.rows() || features.iter().any(|r| r.len() != e.cols()) {
        return Err(Error::shape("lambda_attention", e.shape(), &[features.len()]));
    }
    let lambda = Tensor::from_fn(e.rows(), e.cols(), |i, j| lambda_gate(features[i][j], params, slope));
    let e_prime = blend(&e, &sym, &lambda)?;
    Ok(AttentionMatrices { e, sym, lambda, e_prime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ner::{pair_feature, NerCategory};
    use proptest::prelude::*;

    const SLOPE: f64 = 0.01;

    #[test]
    fn dot_attention_cases() {
        let unit = Tensor::row_vector(vec![0.6, 0.8]);
        let e = dot_attention(&unit, &unit).unwrap();
        assert!((e.get(0, 0) - 1.0).abs() < 1e-15);
        let a = Tensor::row_vector(vec![1.0, 0.0]);
        let b = Tensor::row_vector(vec![0.0, 3.0]);
        assert_eq!(dot_attention(&a, &b).unwrap().get(0, 0), 0.0);
        let a = Tensor::row_vector(vec![1.0, 2.0]);
        let b = Tensor::row_vector(vec![3.0, 4.0]);
        assert_eq!(dot_attention(&a, &b).unwrap().get(0, 0), 11.0);
        assert!(dot_attention(&a, &Tensor::zeros(&[2, 3])).is_err());
    }

    #[test]
    fn symbolic_similarity_cases() {
        let cfg = SymConfig::default();
        assert_eq!(symbolic_similarity(&["kendall"], &["kendall"], cfg).unwrap().get(0, 0), 1.0);
        assert_eq!(symbolic_similarity(&["kendall"], &["peyton"], cfg).unwrap().get(0, 0), 0.0);
        assert_eq!(symbolic_similarity(&["Kendall"], &["kendall"], cfg).unwrap().get(0, 0), 1.0);
        let empty: [&str; 0] = [];
        assert!(symbolic_similarity(&empty, &["x"], cfg).is_err());
    }

    #[test]
    fn sym_config_rejects_nonpositive() {
        assert!(SymConfig::new(0.0).is_err());
        assert!(SymConfig::new(-1.0).is_err());
        assert!(SymConfig::new(f64::NAN).is_err());
        assert_eq!(SymConfig::new(2.5).unwrap().w, 2.5);
    }

    #[test]
    fn gate_on_unit_interval_is_identity() {
        assert_eq!(lambda_gate_scalar(0.0, SLOPE), 0.0);
        assert_eq!(lambda_gate_scalar(0.5, SLOPE), 0.5);
        assert_eq!(lambda_gate_scalar(1.0, SLOPE), 1.0);
    }

    #[test]
    fn gate_is_not_clamped() {
        // 1 − LReLU(1 − 2) = 1 − 0.01·(−1)
        assert_eq!(lambda_gate_scalar(2.0, SLOPE), 1.01);
        // 1 − LReLU(1 − 0.01·(−1)) = 1 − 1.01
        assert!((lambda_gate_scalar(-1.0, SLOPE) + 0.01).abs() < 1e-15);
    }

    #[test]
    fn gate_through_dense_feature_matches_weight_lookup() {
        let w: [f64; 16] = std::array::from_fn(|k| -1.5 + 0.23 * k as f64);
        let p = LambdaLayerParams::from_weights(w);
        for a in NerCategory::ALL {
            for b in NerCategory::ALL {
                let x = pair_feature(a, b);
                let via_dense = lambda_gate(x, &p, SLOPE);
                let via_lookup = lambda_gate_scalar(w[x.hot_index()], SLOPE);
                assert_eq!(via_dense.to_bits(), via_lookup.to_bits());
            }
        }
    }

    #[test]
    fn gate_derivative_matches_difference_quotient() {
        for z in [-2.0, -0.3, 0.2, 0.7, 1.4, 3.0] {
            let h = 1e-6;
            let numeric = (lambda_gate_scalar(z + h, SLOPE) - lambda_gate_scalar(z - h, SLOPE)) / (2.0 * h);
            assert!((numeric - lambda_gate_derivative(z, SLOPE)).abs() < 1e-8, "z={z}");
        }
    }

    #[test]
    fn blend_cases() {
        let e = Tensor::row_vector(vec![2.0, -3.0]);
        let sym = Tensor::row_vector(vec![1.0, 0.0]);
        assert_eq!(blend(&e, &sym, &Tensor::filled(&[1, 2], 1.0)).unwrap(), e);
        assert_eq!(blend(&e, &sym, &Tensor::zeros(&[1, 2])).unwrap(), sym);
        let half = blend(&Tensor::row_vector(vec![2.0]), &Tensor::row_vector(vec![1.0]), &Tensor::row_vector(vec![0.5]));
        assert_eq!(half.unwrap().data(), &[1.5]);
        assert!(blend(&e, &Tensor::zeros(&[2, 1]), &e).is_err());
    }

    #[test]
    fn identical_sentences_have_uniform_sym_diagonal() {
        let toks = ["Kendall", "moved", "to", "the", "hallway", "."];
        let sym = symbolic_similarity(&toks, &toks, SymConfig::new(1.0).unwrap()).unwrap();
        for i in 0..toks.len() {
            assert_eq!(sym.get(i, i), 1.0);
        }
    }

    #[test]
    fn lambda_attention_is_consistent() {
        let a_bar = Tensor::from_rows(&[vec![0.2, -0.4], vec![1.0, 0.3]]).unwrap();
        let b_bar = Tensor::from_rows(&[vec![0.5, 0.5], vec![-0.1, 0.9], vec![0.0, 1.0]]).unwrap();
        let ta = ["Kendall", "left"];
        let tb = ["Peyton", "left", "early"];
        let cats_a = [NerCategory::Name, NerCategory::Other];
        let cats_b = [NerCategory::Name, NerCategory::Other, NerCategory::Other];
        let feats: Vec<Vec<PairFeature>> =
            cats_a.iter().map(|&ca| cats_b.iter().map(|&cb| pair_feature(ca, cb)).collect()).collect();
        let mut w = [1.0; 16];
        w[0] = 0.0;
        let m = lambda_attention(&a_bar, &b_bar, &ta, &tb, &feats, &LambdaLayerParams::from_weights(w), SymConfig::default(), SLOPE)
            .unwrap();
        assert!(m.blend_is_exact());
        assert_eq!(m.lambda.get(0, 0), 0.0);
        assert_eq!(m.e_prime.get(0, 0), 0.0);
        assert_eq!(m.e_prime.get(1, 1), m.e.get(1, 1));
        assert_eq!(m.sym.get(1, 1), 1.0);
    }

    proptest! {
        #[test]
        fn gate_equals_preactivation_on_unit_interval(z in 0.0f64..=1.0) {
            // 1 - (1 - z) can round in the last place
            prop_assert!((lambda_gate_scalar(z, SLOPE) - z).abs() <= f64::EPSILON);
        }

        #[test]
        fn blend_recomputes_bitwise(
            vals in proptest::collection::vec((-50.0f64..50.0, 0.0f64..3.0, -0.5f64..1.5), 1..20)
        ) {
            let n = vals.len();
            let e = Tensor::row_vector(vals.iter().map(|v| v.0).collect());
            let sym = Tensor::row_vector(vals.iter().map(|v| v.1).collect());
            let lambda = Tensor::row_vector(vals.iter().map(|v| v.2).collect());
            let e_prime = blend(&e, &sym, &lambda).unwrap();
            prop_assert_eq!(e_prime.shape(), &[1, n]);
            let m = AttentionMatrices { e, sym, lambda, e_prime };
            prop_assert!(m.blend_is_exact());
        }
    }
}
