//! Scores and decisions for one verified report.
//!
//! Answer-level scores describe one answer `ŷ`, set-level scores the whole
//! candidate set. The mapping per method:
//!
//! | method      | first order (answer / set)          | second order (answer / set)        |
//! |-------------|-------------------------------------|------------------------------------|
//! | definetti   | `H(Bern(p(ŷ)))` / `H(p)`            | —                                  |
//! | probint     | —                                   | `ū(ŷ) − l(ŷ)` / `1 − Σ l`          |
//! | credal      | entropy of the member mean          | hull width at `ŷ` / exact MMI      |
//! | possibility | —                                   | `π̂(¬ŷ)/π̂(ŷ)` / `π̂(2)/π̂(1)`        |
//! | vanilla     | `1 − conf`                          | —                                  |
//!
//! Credal sets above the enumeration cap fall back to the interval-hull bound.

use ipelicit_core::decision::{
    maximax, maximin, precise_argmax, utilitarian_aggregate, utilitarian_argmax, DecisionOutcome,
};
use ipelicit_core::mmi::{
    exact_mmi_credal_with, interval_width_mmi, mmi_upper_bound, possibility_answer_mmi, possibility_mmi, MmiMode,
    MmiScore, EXACT_ENUM_CAP,
};
use ipelicit_core::scores::{bernoulli_entropy, combined_score, entropy};
use ipelicit_core::{interval_from_credal, CredalSet, ExecPolicy};
use ipelicit_elicit::{Payload, PromptKind};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Answer,
    Set,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_order_mode: Option<MmiMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined: Option<f64>,
}

impl Scores {
    /// Largest absolute difference between two score sets; infinite when
    /// their shapes differ.
    pub fn max_abs_diff(&self, other: &Scores) -> f64 {
        if self.level != other.level || self.second_order_mode != other.second_order_mode {
            return f64::INFINITY;
        }
        [
            (self.first_order, other.first_order),
            (self.second_order, other.second_order),
            (self.combined, other.combined),
        ]
        .into_iter()
        .map(|pair| match pair {
            (Some(a), Some(b)) => (a - b).abs(),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
    }
}

/// What a method elicited, ready for scoring.
pub enum Report<'a> {
    Single(&'a Payload),
    Credal(&'a CredalSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    pub scores: Scores,
    pub decisions: Vec<DecisionOutcome>,
}

/// Set-level MMI of a credal set: exact up to the cap, hull bound beyond.
pub fn credal_set_mmi(c: &CredalSet) -> ipelicit_core::Result<MmiScore> {
    if c.candidates().len() <= EXACT_ENUM_CAP {
        exact_mmi_credal_with(c, EXACT_ENUM_CAP, ExecPolicy::default())
    } else {
        mmi_upper_bound(interval_from_credal(c).lower())
    }
}

/// Scores `report` at answer level when `answer_index` is given, else at set level.
pub fn score_report(
    method: PromptKind,
    report: &Report<'_>,
    answer_index: Option<usize>,
) -> ipelicit_core::Result<Scored> {
    let mut first = None;
    let mut second: Option<MmiScore> = None;
    let mut decisions = Vec::new();
    let mut level = if answer_index.is_some() {
        Level::Answer
    } else {
        Level::Set
    };

    match (method, report) {
        (PromptKind::Credal, Report::Credal(c)) => {
            let agg = utilitarian_aggregate(c);
            let hull = interval_from_credal(c);
            match answer_index {
                Some(i) => {
                    first = Some(bernoulli_entropy(agg.probs()[i])?);
                    second = Some(interval_width_mmi(hull.lower()[i], hull.upper()[i])?);
                }
                None => {
                    first = Some(entropy(&agg));
                    second = Some(credal_set_mmi(c)?);
                }
            }
            decisions.extend([utilitarian_argmax(c), maximin(&hull), maximax(&hull)]);
        }
        (PromptKind::Definetti, Report::Single(Payload::Pmf { pmf })) => {
            first = Some(match answer_index {
                Some(i) => bernoulli_entropy(pmf.probs()[i])?,
                None => entropy(pmf),
            });
            decisions.push(precise_argmax(pmf));
        }
        (PromptKind::Probint, Report::Single(Payload::Intervals { intervals })) => {
            second = Some(match answer_index {
                Some(i) => interval_width_mmi(intervals.lower()[i], intervals.upper()[i])?,
                None => mmi_upper_bound(intervals.lower())?,
            });
            decisions.extend([maximin(intervals), maximax(intervals)]);
        }
        (PromptKind::Possibility, Report::Single(Payload::Possibility { assignment })) => {
            second = Some(match answer_index {
                Some(i) => possibility_answer_mmi(assignment, i)?,
                None => possibility_mmi(assignment)?,
            });
        }
        (PromptKind::Vanilla, Report::Single(Payload::Confidence { uncertainty, .. })) => {
            first = Some(*uncertainty);
            // the confidence always refers to one answer
            level = Level::Answer;
        }
        _ => {
            return Err(ipelicit_core::Error::InvalidParameter(format!(
                "report does not match method {method}"
            )))
        }
    }

    let combined = match (first, second) {
        (Some(f), Some(s)) => Some(combined_score(f, s.value)?),
        _ => None,
    };
    Ok(Scored {
        scores: Scores {
            level,
            answer_index,
            first_order: first,
            second_order: second.map(|s| s.value),
            second_order_mode: second.map(|s| s.mode),
            combined,
        },
        decisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ipelicit_core::{build_pmf, CandidateSet, ProbabilityIntervalSet};
    use std::f64::consts::LN_2;

    fn ab() -> CandidateSet {
        CandidateSet::new(["A", "B"], false).unwrap()
    }

    #[test]
    fn definetti_levels() {
        let pmf = build_pmf(&ab(), &[0.5, 0.5], false).unwrap();
        let p = Payload::Pmf { pmf };
        let set = score_report(PromptKind::Definetti, &Report::Single(&p), None).unwrap();
        assert!((set.scores.first_order.unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(set.scores.level, Level::Set);
        assert_eq!(set.decisions[0].chosen_index, 0);
        let ans = score_report(PromptKind::Definetti, &Report::Single(&p), Some(1)).unwrap();
        assert!((ans.scores.first_order.unwrap() - LN_2).abs() < 1e-15);
        assert!(ans.scores.combined.is_none());
    }

    #[test]
    fn probint_worked_figures() {
        let iv = ProbabilityIntervalSet::new(ab(), vec![0.2, 0.2], vec![0.5, 0.6]).unwrap();
        let p = Payload::Intervals { intervals: iv };
        let set = score_report(PromptKind::Probint, &Report::Single(&p), None).unwrap();
        assert!((set.scores.second_order.unwrap() - 0.6).abs() < 1e-15);
        let ans = score_report(PromptKind::Probint, &Report::Single(&p), Some(0)).unwrap();
        assert!((ans.scores.second_order.unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(ans.scores.second_order_mode, Some(MmiMode::IntervalWidth));
    }

    #[test]
    fn credal_combined() {
        let m1 = build_pmf(&ab(), &[0.7, 0.3], false).unwrap();
        let m2 = build_pmf(&ab(), &[0.4, 0.6], false).unwrap();
        let c = CredalSet::untagged(vec![m1, m2]).unwrap();
        let s = score_report(PromptKind::Credal, &Report::Credal(&c), None).unwrap();
        assert!((s.scores.second_order.unwrap() - 0.3).abs() < 1e-12);
        let f = s.scores.first_order.unwrap();
        assert!((s.scores.combined.unwrap() - f * 0.3).abs() < 1e-12);
        assert_eq!(s.decisions.len(), 3);
    }

    #[test]
    fn mismatched_report_rejected() {
        let pmf = build_pmf(&ab(), &[0.5, 0.5], false).unwrap();
        let p = Payload::Pmf { pmf };
        assert!(score_report(PromptKind::Probint, &Report::Single(&p), None).is_err());
    }

    #[test]
    fn diff_detects_shape_changes() {
        let a = Scores {
            level: Level::Set,
            answer_index: None,
            first_order: Some(1.0),
            second_order: None,
            second_order_mode: None,
            combined: None,
        };
        let mut b = a.clone();
        assert_eq!(a.max_abs_diff(&b), 0.0);
        b.second_order = Some(0.1);
        assert!(a.max_abs_diff(&b).is_infinite());
    }
}
