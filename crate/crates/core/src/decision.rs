//! Decision rules over precise and imprecise reports.
//!
//! All rules pick the lowest index among candidates within `1e-9` of the
//! optimum and report whether that tie-break was needed.

use serde::{Deserialize, Serialize};

use crate::types::{build_pmf, fold_answer, CandidateSet, CredalSet, PrecisePmf, ProbabilityIntervalSet, PROB_TOL};
use crate::{Error, Result};

const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    PreciseArgmax,
    Maximin,
    Maximax,
    BayesEu,
    UtilitarianArgmax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub chosen_index: usize,
    pub chosen_answer: String,
    pub rule: DecisionRule,
    pub tie_broken: bool,
}

fn argmax(values: &[f64], candidates: &CandidateSet, rule: DecisionRule) -> DecisionOutcome {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut near = values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v >= best - TIE_TOL)
        .map(|(i, _)| i);
    let chosen_index = near.next().expect("non-empty candidate set");
    let tie_broken = near.next().is_some();
    DecisionOutcome {
        chosen_index,
        chosen_answer: candidates.answers()[chosen_index].clone(),
        rule,
        tie_broken,
    }
}

pub fn precise_argmax(p: &PrecisePmf) -> DecisionOutcome {
    argmax(p.probs(), p.candidates(), DecisionRule::PreciseArgmax)
}

/// Argmax of the lower probabilities.
pub fn maximin(iv: &ProbabilityIntervalSet) -> DecisionOutcome {
    argmax(iv.lower(), iv.candidates(), DecisionRule::Maximin)
}

/// Argmax of the upper probabilities.
pub fn maximax(iv: &ProbabilityIntervalSet) -> DecisionOutcome {
    argmax(iv.upper(), iv.candidates(), DecisionRule::Maximax)
}

/// Argmax of `Σ_i w_i p_i(y)`, the expected correctness over clarification
/// contexts weighted by `w_i`.
pub fn bayes_expected_utility(conditionals: &[(f64, PrecisePmf)]) -> Result<DecisionOutcome> {
    let (_, first) = conditionals.first().ok_or(Error::EmptyInput)?;
    let candidates = first.candidates();
    let mut total = 0.0;
    for (index, (w, pmf)) in conditionals.iter().enumerate() {
        if !w.is_finite() || *w < 0.0 {
            return Err(Error::NegativeWeight { index, value: *w });
        }
        if pmf.candidates() != candidates {
            return Err(Error::CandidateSetMismatch);
        }
        total += w;
    }
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::WeightSumViolation { sum: total });
    }
    let mut utility = vec![0.0; candidates.len()];
    for (w, pmf) in conditionals {
        for (u, p) in utility.iter_mut().zip(pmf.probs()) {
            *u += w * p;
        }
    }
    Ok(argmax(&utility, candidates, DecisionRule::BayesEu))
}

/// Ensemble mean of the member PMFs.
pub fn utilitarian_aggregate(c: &CredalSet) -> PrecisePmf {
    let mean =
        utilitarian_mean_scores(c.members().iter().map(|m| m.probs())).expect("credal sets are non-empty and aligned");
    build_pmf(c.candidates(), &mean, true).expect("mean of PMFs is a PMF")
}

/// Column means of per-answer score rows that need not sum to one
/// (e.g. per-answer correctness probabilities). Unnormalized; use for ranking.
pub fn utilitarian_mean_scores<'a, I>(rows: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for row in rows {
        if count == 0 {
            sum = vec![0.0; row.len()];
        } else if row.len() != sum.len() {
            return Err(Error::LengthMismatch {
                expected: sum.len(),
                got: row.len(),
            });
        }
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyCredal);
    }
    Ok(sum.into_iter().map(|s| s / count as f64).collect())
}

/// Argmax of the ensemble mean.
pub fn utilitarian_argmax(c: &CredalSet) -> DecisionOutcome {
    let mean = utilitarian_aggregate(c);
    argmax(mean.probs(), c.candidates(), DecisionRule::UtilitarianArgmax)
}

/// Fraction of positions where the model's own answer equals the rule's
/// choice, compared after trimming and case folding.
pub fn alignment_rate(llm_choices: &[String], rule_choices: &[DecisionOutcome]) -> Result<f64> {
    if llm_choices.len() != rule_choices.len() {
        return Err(Error::LengthMismatch {
            expected: rule_choices.len(),
            got: llm_choices.len(),
        });
    }
    if llm_choices.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = llm_choices
        .iter()
        .zip(rule_choices)
        .filter(|(llm, rule)| fold_answer(llm) == fold_answer(&rule.chosen_answer))
        .count();
    Ok(hits as f64 / llm_choices.len() as f64)
}
