//! Sequence likelihood, perplexity and the three connective-training losses.

use serde::{Deserialize, Serialize};

use super::oracle::ProbabilityOracle;
use super::MathError;

/// Negative log-likelihood (nats) of `target` given `context`, scored token by
/// token with teacher forcing.
pub fn sequence_nll(
    oracle: &dyn ProbabilityOracle,
    context: &[String],
    target: &[String],
) -> Result<f64, MathError> {
    if target.is_empty() {
        return Err(MathError::EmptyTarget);
    }
    let mut history: Vec<String> = Vec::with_capacity(context.len() + target.len());
    history.extend_from_slice(context);
    let mut nll = 0.0;
    for tok in target {
        if oracle.vocab().index_of(tok).is_none() {
            return Err(MathError::UnknownToken(tok.clone()));
        }
        let p = oracle.next(&history)?.prob_of(tok)?;
        if p <= 0.0 {
            return Err(MathError::ZeroProbability(tok.clone()));
        }
        nll -= p.ln();
        history.push(tok.clone());
    }
    Ok(nll.max(0.0))
}

/// `exp(mean NLL)` of `response` given `user ⊕ connective`.
pub fn perplexity(
    oracle: &dyn ProbabilityOracle,
    user: &[String],
    connective: &[String],
    response: &[String],
) -> Result<f64, MathError> {
    let context = concat(user, connective);
    let nll = sequence_nll(oracle, &context, response)?;
    Ok((nll / response.len() as f64).exp())
}

/// Which tokens the coherence perplexity is averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScoring {
    /// Score `connective ⊕ response` given the user input.
    #[default]
    ConnectiveAndResponse,
    /// Score only the response given `user ⊕ connective`.
    ResponseOnly,
}

/// Perplexity of a connective–response pair given the user input.
pub fn pair_perplexity(
    oracle: &dyn ProbabilityOracle,
    user: &[String],
    connective: &[String],
    response: &[String],
    scoring: PairScoring,
) -> Result<f64, MathError> {
    match scoring {
        PairScoring::ConnectiveAndResponse => {
            perplexity(oracle, user, &[], &concat(connective, response))
        }
        PairScoring::ResponseOnly => perplexity(oracle, user, connective, response),
    }
}

/// NLL of the large-model continuation under the small model.
pub fn style_consistency_loss(
    small: &dyn ProbabilityOracle,
    user: &[String],
    connective: &[String],
    large_response: &[String],
) -> Result<f64, MathError> {
    sequence_nll(small, &concat(user, connective), large_response)
}

/// Squared gap between the two pair perplexities.
pub fn coherence_loss_from_ppl(ppl_trained: f64, ppl_base: f64) -> f64 {
    let d = ppl_trained - ppl_base;
    d * d
}

#[allow(clippy::too_many_arguments)]
pub fn coherence_loss(
    small: &dyn ProbabilityOracle,
    small_base: &dyn ProbabilityOracle,
    user: &[String],
    connective: &[String],
    large_response: &[String],
    small_response: &[String],
    scoring: PairScoring,
) -> Result<f64, MathError> {
    let a = pair_perplexity(small, user, connective, large_response, scoring)?;
    let b = pair_perplexity(small_base, user, connective, small_response, scoring)?;
    Ok(coherence_loss_from_ppl(a, b))
}

/// KL divergence `D(p || q)` in nats over a shared finite support.
pub fn prior_regularization_loss(p: &[f64], q: &[f64]) -> Result<f64, MathError> {
    if p.len() != q.len() {
        return Err(MathError::LengthMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    super::dist::validate_probs(p, None)?;
    super::dist::validate_probs(q, None)?;
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(MathError::SupportViolation(i));
        }
        kl += pi * (pi / qi).ln();
    }
    Ok(kl.max(0.0))
}

/// Probability of each candidate connective given `user`, as the product of
/// its per-token probabilities, renormalized over the candidate set.
pub fn connective_prior(
    oracle: &dyn ProbabilityOracle,
    user: &[String],
    candidates: &[Vec<String>],
) -> Result<Vec<f64>, MathError> {
    if candidates.is_empty() {
        return Err(MathError::NoCandidates);
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mut history = user.to_vec();
        let mut p = 1.0;
        for tok in c {
            if oracle.vocab().index_of(tok).is_none() {
                return Err(MathError::UnknownToken(tok.clone()));
            }
            p *= oracle.next(&history)?.prob_of(tok)?;
            history.push(tok.clone());
        }
        scores.push(p);
    }
    let z: f64 = scores.iter().sum();
    if z <= 0.0 {
        return Err(MathError::ZeroProbability("candidate set".into()));
    }
    Ok(scores.into_iter().map(|s| s / z).collect())
}

/// Weights of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_con: f64,
    pub lambda_coh: f64,
    pub lambda_prior: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_con: 1.0,
            lambda_coh: 0.5,
            lambda_prior: 0.1,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_con: f64, lambda_coh: f64, lambda_prior: f64) -> Result<Self, MathError> {
        for w in [lambda_con, lambda_coh, lambda_prior] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(MathError::InvalidWeight(w));
            }
        }
        Ok(Self {
            lambda_con,
            lambda_coh,
            lambda_prior,
        })
    }
}

pub fn total_loss(l_con: f64, l_coh: f64, l_prior: f64, w: &LossWeights) -> Result<f64, MathError> {
    for l in [l_con, l_coh, l_prior] {
        if !l.is_finite() {
            return Err(MathError::NonFinite(l));
        }
    }
    Ok(w.lambda_con * l_con + w.lambda_coh * l_coh + w.lambda_prior * l_prior)
}

fn concat(a: &[String], b: &[String]) -> Vec<String> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::math::oracle::{ConstantOracle, ModelRole, TabularOracle};
    use crate::math::Vocabulary;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn vocab() -> Arc<Vocabulary> {
        Arc::new(Vocabulary::new(["a", "b", "c", "d", "e", "well", ","]).unwrap())
    }

    fn constant(ctx: usize, target: &[String], p: f64) -> ConstantOracle {
        ConstantOracle::new(ModelRole::Small, vocab(), ctx, target.to_vec(), p).unwrap()
    }

    #[test]
    fn nll_closed_forms() {
        let t = toks("a b c");
        assert_eq!(
            sequence_nll(&constant(1, &t, 1.0), &toks("d"), &t).unwrap(),
            0.0
        );
        let nll = sequence_nll(&constant(1, &t, 0.5), &toks("d"), &t).unwrap();
        assert!((nll - 2.079_441_541_679_835_7).abs() < 1e-12);
        let t = toks("a b c d");
        let nll = sequence_nll(&constant(0, &t, (-1f64).exp()), &[], &t).unwrap();
        assert!((nll - 4.0).abs() < 1e-12);
    }

    #[test]
    fn nll_rejects_unknown_and_empty() {
        let o = constant(0, &toks("a"), 0.5);
        assert!(matches!(
            sequence_nll(&o, &[], &toks("zzz")),
            Err(MathError::UnknownToken(t)) if t == "zzz"
        ));
        assert!(matches!(
            sequence_nll(&o, &[], &[]),
            Err(MathError::EmptyTarget)
        ));
    }

    #[test]
    fn perplexity_closed_forms() {
        let r = toks("a b");
        assert_eq!(
            perplexity(&constant(2, &r, 1.0), &toks("c"), &toks("d"), &r).unwrap(),
            1.0
        );
        let ppl = perplexity(&constant(2, &r, 0.5), &toks("c"), &toks("d"), &r).unwrap();
        assert!((ppl - 2.0).abs() < 1e-12);
        let r = toks("a b c d e a b");
        let ppl = perplexity(&constant(2, &r, 0.1), &toks("c"), &toks("d"), &r).unwrap();
        assert!((ppl - 10.0).abs() < 1e-9);
    }

    #[test]
    fn style_loss_is_sequence_nll() {
        let u = toks("a b");
        let c = toks("well ,");
        let r = toks("c d e");
        let o = constant(4, &r, 0.3);
        let direct = sequence_nll(&o, &toks("a b well ,"), &r).unwrap();
        assert_eq!(style_consistency_loss(&o, &u, &c, &r).unwrap(), direct);
        let r = toks("a b c d");
        let o = constant(4, &r, (-1f64).exp());
        assert!((style_consistency_loss(&o, &u, &c, &r).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(coherence_loss_from_ppl(1.7, 1.7), 0.0);
        assert_eq!(coherence_loss_from_ppl(2.0, 1.0), 1.0);
        assert_eq!(coherence_loss_from_ppl(3.0, 5.0), 4.0);
    }

    #[test]
    fn coherence_zero_for_matching_oracles() {
        let u = toks("a");
        let c = toks("well ,");
        let r = toks("b c");
        let pair = toks("well , b c");
        let o = ConstantOracle::new(ModelRole::Small, vocab(), 1, pair.clone(), 0.4).unwrap();
        let base = ConstantOracle::new(ModelRole::SmallBase, vocab(), 1, pair, 0.4).unwrap();
        let l = coherence_loss(
            &o,
            &base,
            &u,
            &c,
            &r,
            &r,
            PairScoring::ConnectiveAndResponse,
        )
        .unwrap();
        assert!(l.abs() < 1e-18);
    }

    #[test]
    fn pair_scoring_variants_differ_in_span() {
        // bigram-ish table where the connective tokens are certain but the
        // response tokens have probability one half
        let mut rows = BTreeMap::new();
        let row = |pairs: &[(&str, f64)]| {
            pairs
                .iter()
                .map(|(t, p)| (t.to_string(), *p))
                .collect::<BTreeMap<_, _>>()
        };
        rows.insert("a".to_string(), row(&[("well", 1.0)]));
        rows.insert("well".to_string(), row(&[("b", 0.5), ("c", 0.5)]));
        rows.insert("b".to_string(), row(&[("b", 0.5), ("c", 0.5)]));
        let o = TabularOracle::from_rows(ModelRole::Small, rows).unwrap();
        let u = toks("a");
        let c = toks("well");
        let r = toks("b b");
        let only = pair_perplexity(&o, &u, &c, &r, PairScoring::ResponseOnly).unwrap();
        let both = pair_perplexity(&o, &u, &c, &r, PairScoring::ConnectiveAndResponse).unwrap();
        assert!((only - 2.0).abs() < 1e-12);
        // exp(2 ln 2 / 3)
        assert!((both - (2.0 * 2f64.ln() / 3.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(
            prior_regularization_loss(&[0.3, 0.7], &[0.3, 0.7]).unwrap(),
            0.0
        );
        let kl = prior_regularization_loss(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        let oracle = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl - oracle).abs() < 1e-15);
        assert!((kl - 0.143_841).abs() < 1e-6);
        assert!(matches!(
            prior_regularization_loss(&[0.5, 0.5], &[1.0, 0.0]),
            Err(MathError::SupportViolation(1))
        ));
        // zero mass in p where q is zero is fine
        assert!(prior_regularization_loss(&[1.0, 0.0], &[1.0, 0.0]).is_ok());
    }

    #[test]
    fn connective_prior_renormalizes() {
        let mut rows = BTreeMap::new();
        let mut r = BTreeMap::new();
        r.insert("well".to_string(), 0.6);
        r.insert("a".to_string(), 0.2);
        r.insert(",".to_string(), 0.2);
        rows.insert(String::new(), r);
        let o = TabularOracle::from_rows(ModelRole::Small, rows).unwrap();
        let p = connective_prior(&o, &toks("x"), &[toks("well"), toks("a ,")]).unwrap();
        // 0.6 vs 0.04
        assert!((p[0] - 0.6 / 0.64).abs() < 1e-12);
        assert!((p[1] - 0.04 / 0.64).abs() < 1e-12);
    }

    #[test]
    fn total_loss_examples() {
        let w = LossWeights::default();
        assert_eq!(total_loss(0.0, 0.0, 0.0, &w).unwrap(), 0.0);
        assert!((total_loss(2.0, 1.0, 0.5, &w).unwrap() - 2.55).abs() < 1e-12);
        let proj = LossWeights::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(total_loss(3.25, 9.0, 7.0, &proj).unwrap(), 3.25);
        assert!(matches!(
            total_loss(f64::NAN, 0.0, 0.0, &w),
            Err(MathError::NonFinite(_))
        ));
        assert!(LossWeights::new(-1.0, 0.0, 0.0).is_err());
    }

    fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn kl_non_negative((p, q) in (2usize..12).prop_flat_map(|n| (distribution(n), distribution(n)))) {
            prop_assert!(prior_regularization_loss(&p, &q).unwrap() >= 0.0);
            prop_assert!(prior_regularization_loss(&p, &p).unwrap().abs() < 1e-9);
        }

        #[test]
        fn total_loss_is_linear(
            a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0,
            k in 0.0f64..5.0,
            wc in 0.0f64..2.0, wh in 0.0f64..2.0, wp in 0.0f64..2.0,
        ) {
            let w = LossWeights::new(wc, wh, wp).unwrap();
            let base = total_loss(a, b, c, &w).unwrap();
            let scaled = total_loss(k * a, b, c, &w).unwrap();
            prop_assert!((scaled - base - (k - 1.0) * wc * a).abs() < 1e-9);
        }

        #[test]
        fn coherence_symmetric(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            prop_assert_eq!(coherence_loss_from_ppl(a, b), coherence_loss_from_ppl(b, a));
        }
    }
}
