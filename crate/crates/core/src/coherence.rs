//! Verifiers that gate elicited reports before they are scored.
//!
//! Betting prices must be non-negative and sum to one. Interval reports must
//! keep their lower mass at or below one; the upper-mass check is optional
//! because the set-level score depends on the lower bounds only.

use serde::{Deserialize, Serialize};

use crate::types::{PossibilityAssignment, ProbabilityIntervalSet, PROB_TOL};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    Negative,
    ValueRange,
    NonFinite,
    Sum,
    LowerSum,
    UpperSum,
    AllZero,
}

impl std::fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ViolationCode::Negative => "NEGATIVE",
            ViolationCode::ValueRange => "VALUE_RANGE",
            ViolationCode::NonFinite => "NON_FINITE",
            ViolationCode::Sum => "SUM",
            ViolationCode::LowerSum => "LOWER_SUM",
            ViolationCode::UpperSum => "UPPER_SUM",
            ViolationCode::AllZero => "ALL_ZERO",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Candidate index, `None` for a global constraint.
    pub index: Option<usize>,
    pub observed: f64,
    pub required: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let requirement = match self.code {
            ViolationCode::Negative => format!(">= {}", self.required),
            ViolationCode::ValueRange => format!("<= {}", self.required),
            ViolationCode::NonFinite => "a finite number".to_string(),
            ViolationCode::Sum => format!("exactly {}", self.required),
            ViolationCode::LowerSum => format!("at most {}", self.required),
            ViolationCode::UpperSum => format!("at least {}", self.required),
            ViolationCode::AllZero => format!("some score above {}", self.required),
        };
        match self.index {
            Some(i) => write!(
                f,
                "{} at answer {}: got {}, required {}",
                self.code,
                i + 1,
                self.observed,
                requirement
            ),
            None => write!(f, "{}: got {}, required {}", self.code, self.observed, requirement),
        }
    }
}

/// Outcome of one verifier run. `passed` holds iff there are no violations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl VerdictReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        VerdictReport {
            passed: violations.is_empty(),
            violations,
        }
    }

    pub fn pass() -> Self {
        Self::from_violations(Vec::new())
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

fn range_violations(values: &[f64], out: &mut Vec<Violation>) {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation {
                code: ViolationCode::NonFinite,
                index: Some(i),
                observed: v,
                required: 0.0,
            });
        } else if v < 0.0 {
            out.push(Violation {
                code: ViolationCode::Negative,
                index: Some(i),
                observed: v,
                required: 0.0,
            });
        } else if v > 1.0 {
            out.push(Violation {
                code: ViolationCode::ValueRange,
                index: Some(i),
                observed: v,
                required: 1.0,
            });
        }
    }
}

/// Probability-axiom check for betting prices over exclusive, exhaustive answers.
pub fn verify_axioms(prices: &[f64]) -> Result<VerdictReport> {
    if prices.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut violations = Vec::new();
    range_violations(prices, &mut violations);
    let sum: f64 = prices.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > PROB_TOL {
        violations.push(Violation {
            code: ViolationCode::Sum,
            index: None,
            observed: sum,
            required: 1.0,
        });
    }
    Ok(VerdictReport::from_violations(violations))
}

/// Interval coherence: `Σ lower ≤ 1`, plus `Σ upper ≥ 1` when `enforce_upper`.
pub fn verify_interval_coherence(intervals: &ProbabilityIntervalSet, enforce_upper: bool) -> VerdictReport {
    verify_interval_bounds(intervals.lower(), intervals.upper(), enforce_upper)
}

/// Same as [`verify_interval_coherence`] over raw bound vectors, which may not
/// yet satisfy the interval type's invariants.
pub fn verify_interval_bounds(lower: &[f64], upper: &[f64], enforce_upper: bool) -> VerdictReport {
    let mut violations = Vec::new();
    range_violations(lower, &mut violations);
    range_violations(upper, &mut violations);
    for (i, (&l, &u)) in lower.iter().zip(upper).enumerate() {
        if l > u {
            violations.push(Violation {
                code: ViolationCode::ValueRange,
                index: Some(i),
                observed: l,
                required: u,
            });
        }
    }
    let lower_sum: f64 = lower.iter().sum();
    if lower_sum > 1.0 + PROB_TOL {
        violations.push(Violation {
            code: ViolationCode::LowerSum,
            index: None,
            observed: lower_sum,
            required: 1.0,
        });
    }
    if enforce_upper {
        let upper_sum: f64 = upper.iter().sum();
        if upper_sum < 1.0 - PROB_TOL {
            violations.push(Violation {
                code: ViolationCode::UpperSum,
                index: None,
                observed: upper_sum,
                required: 1.0,
            });
        }
    }
    VerdictReport::from_violations(violations)
}

/// Feasibility of raw possibility scores: all in `[0, 1]` and not all zero.
pub fn verify_possibility(raw_scores: &[f64], none_of_above: f64) -> VerdictReport {
    let mut all: Vec<f64> = raw_scores.to_vec();
    all.push(none_of_above);
    let mut violations = Vec::new();
    range_violations(&all, &mut violations);
    let max = all.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        violations.push(Violation {
            code: ViolationCode::AllZero,
            index: None,
            observed: max,
            required: 0.0,
        });
    }
    VerdictReport::from_violations(violations)
}

/// Divides every score, including "none of the above", by the overall maximum.
pub fn normalize_possibility(a: &PossibilityAssignment) -> Result<PossibilityAssignment> {
    let max = a.all_scores().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::AllZero);
    }
    let scores = a.raw_scores().iter().map(|s| s / max).collect();
    Ok(PossibilityAssignment::from_parts_unchecked(
        a.candidates().clone(),
        scores,
        a.none_of_above() / max,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CandidateSet;
    use proptest::prelude::*;

    fn ab() -> CandidateSet {
        CandidateSet::new(["A", "B"], false).unwrap()
    }

    #[test]
    fn axiom_examples() {
        assert!(verify_axioms(&[0.5, 0.5]).unwrap().passed);

        let v = verify_axioms(&[0.6, 0.6]).unwrap();
        assert!(!v.passed);
        assert_eq!(v.violations.len(), 1);
        assert_eq!(v.violations[0].code, ViolationCode::Sum);
        assert!((v.violations[0].observed - 1.2).abs() < 1e-12);

        let v = verify_axioms(&[1.1, -0.1]).unwrap();
        assert!(!v.passed);
        assert!(v
            .violations
            .iter()
            .any(|x| x.code == ViolationCode::Negative && x.index == Some(1)));
        assert!(v
            .violations
            .iter()
            .any(|x| x.code == ViolationCode::ValueRange && x.index == Some(0)));
        assert!(!v.has(ViolationCode::Sum));

        assert_eq!(verify_axioms(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn nan_prices_fail() {
        let v = verify_axioms(&[f64::NAN, 0.5]).unwrap();
        assert!(v.has(ViolationCode::NonFinite));
        assert!(v.has(ViolationCode::Sum));
    }

    #[test]
    fn interval_examples() {
        let iv = ProbabilityIntervalSet::new(ab(), vec![0.3, 0.3], vec![0.6, 0.7]).unwrap();
        assert!(verify_interval_coherence(&iv, true).passed);

        let iv = ProbabilityIntervalSet::new(ab(), vec![0.7, 0.5], vec![0.8, 0.6]).unwrap();
        let v = verify_interval_coherence(&iv, false);
        assert!(!v.passed);
        assert_eq!(v.violations[0].code, ViolationCode::LowerSum);
        assert!((v.violations[0].observed - 1.2).abs() < 1e-12);

        let iv = ProbabilityIntervalSet::new(ab(), vec![0.2, 0.2], vec![0.3, 0.3]).unwrap();
        assert!(verify_interval_coherence(&iv, false).passed);
        let v = verify_interval_coherence(&iv, true);
        assert_eq!(v.violations.len(), 1);
        assert_eq!(v.violations[0].code, ViolationCode::UpperSum);
        assert!((v.violations[0].observed - 0.6).abs() < 1e-12);
    }

    #[test]
    fn possibility_examples() {
        let a = PossibilityAssignment::new(ab(), vec![0.8, 0.4], 0.2).unwrap();
        let n = normalize_possibility(&a).unwrap();
        assert_eq!(n.raw_scores(), &[1.0, 0.5]);
        assert!((n.none_of_above() - 0.25).abs() < 1e-15);

        let a = PossibilityAssignment::new(ab(), vec![1.0, 0.3], 0.0).unwrap();
        assert_eq!(normalize_possibility(&a).unwrap(), a);

        assert_eq!(
            PossibilityAssignment::new(ab(), vec![0.0, 0.0], 0.0),
            Err(Error::AllZero)
        );
        assert!(verify_possibility(&[0.0, 0.0], 0.0).has(ViolationCode::AllZero));
    }

    #[test]
    fn nota_can_lead_normalization() {
        let a = PossibilityAssignment::new(ab(), vec![0.2, 0.1], 0.4).unwrap();
        let n = normalize_possibility(&a).unwrap();
        assert_eq!(n.none_of_above(), 1.0);
        assert_eq!(n.raw_scores(), &[0.5, 0.25]);
    }

    proptest! {
        #[test]
        fn axioms_are_scale_sensitive(w in prop::collection::vec(0.01f64..1.0, 1..10), c in 0.1f64..5.0) {
            prop_assume!((c - 1.0).abs() > 1e-3);
            let sum: f64 = w.iter().sum();
            let prices: Vec<f64> = w.iter().map(|x| x / sum).collect();
            prop_assert!(verify_axioms(&prices).unwrap().passed);
            let scaled: Vec<f64> = prices.iter().map(|p| p * c).collect();
            prop_assert!(verify_axioms(&scaled).unwrap().has(ViolationCode::Sum));
        }

        #[test]
        fn normalization_idempotent_and_scale_invariant(
            w in prop::collection::vec(0.0f64..1.0, 1..8),
            nota in 0.0f64..1.0,
            c in 0.01f64..1.0,
        ) {
            let ys = CandidateSet::new((0..w.len()).map(|i| i.to_string()), false).unwrap();
            let mut w = w;
            w[0] = w[0].max(1e-3);
            let a = PossibilityAssignment::new(ys.clone(), w.clone(), nota).unwrap();
            let once = normalize_possibility(&a).unwrap();
            let twice = normalize_possibility(&once).unwrap();
            prop_assert_eq!(&once, &twice);
            let max = once.all_scores().fold(0.0f64, f64::max);
            prop_assert_eq!(max, 1.0);

            let scaled = PossibilityAssignment::new(
                ys, w.iter().map(|x| x * c).collect(), nota * c).unwrap();
            let ns = normalize_possibility(&scaled).unwrap();
            for (x, y) in ns.all_scores().zip(once.all_scores()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
