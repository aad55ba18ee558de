//! Domain types: candidate sets, precise PMFs, probability intervals, credal
//! sets, possibility assignments and question records.
//!
//! Every type validates on construction and is immutable afterwards, so values
//! can be shared freely across threads.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used for every "sums to one" style check.
pub const PROB_TOL: f64 = 1e-6;

/// Key used for answer identity: trimmed and lowercased.
pub fn fold_answer(answer: &str) -> String {
    answer.trim().to_lowercase()
}

fn check_unit(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { index, value });
        }
    }
    Ok(())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// Ordered, deduplicated list of candidate answers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CandidateSetRepr", into = "CandidateSetRepr")]
pub struct CandidateSet {
    answers: Vec<String>,
    open_ended: bool,
    case_sensitive: bool,
}

#[derive(Serialize, Deserialize)]
struct CandidateSetRepr {
    answers: Vec<String>,
    open_ended: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    case_sensitive: bool,
}

impl TryFrom<CandidateSetRepr> for CandidateSet {
    type Error = Error;

    fn try_from(repr: CandidateSetRepr) -> Result<Self> {
        if repr.case_sensitive {
            CandidateSet::case_sensitive(repr.answers, repr.open_ended)
        } else {
            CandidateSet::new(repr.answers, repr.open_ended)
        }
    }
}

impl From<CandidateSet> for CandidateSetRepr {
    fn from(set: CandidateSet) -> Self {
        CandidateSetRepr {
            answers: set.answers,
            open_ended: set.open_ended,
            case_sensitive: set.case_sensitive,
        }
    }
}

impl CandidateSet {
    /// Builds a set whose duplicates are detected after trimming and case folding.
    /// The first occurrence of each answer wins.
    pub fn new<I, S>(answers: I, open_ended: bool) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::build(answers, open_ended, false)
    }

    /// Like [`CandidateSet::new`] but answers differing only in case stay
    /// distinct. Used for case-variant answer sets of the synthetic tasks.
    pub fn case_sensitive<I, S>(answers: I, open_ended: bool) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::build(answers, open_ended, true)
    }

    fn build<I, S>(answers: I, open_ended: bool, case_sensitive: bool) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::new();
        for (position, answer) in answers.into_iter().enumerate() {
            let answer: String = answer.into();
            let trimmed = answer.trim();
            if trimmed.is_empty() {
                return Err(Error::EmptyAnswer(position));
            }
            let key = if case_sensitive {
                trimmed.to_string()
            } else {
                fold_answer(trimmed)
            };
            if seen.insert(key) {
                kept.push(trimmed.to_string());
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyCandidateSet);
        }
        Ok(CandidateSet {
            answers: kept,
            open_ended,
            case_sensitive,
        })
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&str> {
        self.answers.get(index).map(String::as_str)
    }

    pub fn is_open_ended(&self) -> bool {
        self.open_ended
    }

    pub fn is_case_sensitive(&self) -> bool {
        self.case_sensitive
    }

    /// Identity key of an answer under this set's folding policy.
    pub fn key(&self, answer: &str) -> String {
        if self.case_sensitive {
            answer.trim().to_string()
        } else {
            fold_answer(answer)
        }
    }

    pub fn index_of(&self, answer: &str) -> Option<usize> {
        let key = self.key(answer);
        self.answers.iter().position(|a| self.key(a) == key)
    }

    pub fn contains(&self, answer: &str) -> bool {
        self.index_of(answer).is_some()
    }
}

/// Precise first-order distribution over a candidate set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct PrecisePmf {
    candidates: CandidateSet,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PmfRepr {
    candidates: CandidateSet,
    probs: Vec<f64>,
}

impl TryFrom<PmfRepr> for PrecisePmf {
    type Error = Error;

    fn try_from(repr: PmfRepr) -> Result<Self> {
        PrecisePmf::new(repr.candidates, repr.probs)
    }
}

impl From<PrecisePmf> for PmfRepr {
    fn from(pmf: PrecisePmf) -> Self {
        PmfRepr {
            candidates: pmf.candidates,
            probs: pmf.probs,
        }
    }
}

impl PrecisePmf {
    /// Validates `probs` as-is (no renormalization).
    pub fn new(candidates: CandidateSet, probs: Vec<f64>) -> Result<Self> {
        check_len(candidates.len(), probs.len())?;
        check_unit(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::SumViolation { sum });
        }
        Ok(PrecisePmf { candidates, probs })
    }

    pub fn uniform(candidates: CandidateSet) -> Self {
        let n = candidates.len();
        PrecisePmf {
            probs: vec![1.0 / n as f64; n],
            candidates,
        }
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of `answer`, zero when it is not a candidate.
    pub fn prob_of(&self, answer: &str) -> f64 {
        self.candidates.index_of(answer).map_or(0.0, |i| self.probs[i])
    }
}

/// Builds a [`PrecisePmf`] from raw weights.
///
/// With `renormalize` each probability is `weight / Σ weights`; without it the
/// weights must already sum to one within [`PROB_TOL`].
pub fn build_pmf(candidates: &CandidateSet, weights: &[f64], renormalize: bool) -> Result<PrecisePmf> {
    check_len(candidates.len(), weights.len())?;
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if value < 0.0 {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroMass);
    }
    if renormalize {
        let probs = weights.iter().map(|w| w / total).collect();
        PrecisePmf::new(candidates.clone(), probs)
    } else {
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::SumViolation { sum: total });
        }
        PrecisePmf::new(candidates.clone(), weights.to_vec())
    }
}

/// Per-candidate lower and upper probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalRepr", into = "IntervalRepr")]
pub struct ProbabilityIntervalSet {
    candidates: CandidateSet,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    candidates: CandidateSet,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<IntervalRepr> for ProbabilityIntervalSet {
    type Error = Error;

    fn try_from(repr: IntervalRepr) -> Result<Self> {
        ProbabilityIntervalSet::new(repr.candidates, repr.lower, repr.upper)
    }
}

impl From<ProbabilityIntervalSet> for IntervalRepr {
    fn from(iv: ProbabilityIntervalSet) -> Self {
        IntervalRepr {
            candidates: iv.candidates,
            lower: iv.lower,
            upper: iv.upper,
        }
    }
}

impl ProbabilityIntervalSet {
    pub fn new(candidates: CandidateSet, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len(candidates.len(), lower.len())?;
        check_len(candidates.len(), upper.len())?;
        check_unit(&lower)?;
        check_unit(&upper)?;
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l > u {
                return Err(Error::InvertedInterval {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(ProbabilityIntervalSet {
            candidates,
            lower,
            upper,
        })
    }

    /// Zero-width intervals at the PMF's probabilities.
    pub fn degenerate(pmf: &PrecisePmf) -> Self {
        ProbabilityIntervalSet {
            candidates: pmf.candidates.clone(),
            lower: pmf.probs.clone(),
            upper: pmf.probs.clone(),
        }
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

/// Finite ensemble of PMFs over one candidate set; the credal set is its convex hull.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CredalRepr", into = "CredalRepr")]
pub struct CredalSet {
    members: Vec<PrecisePmf>,
    member_tags: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CredalRepr {
    members: Vec<PrecisePmf>,
    member_tags: Vec<String>,
}

impl TryFrom<CredalRepr> for CredalSet {
    type Error = Error;

    fn try_from(repr: CredalRepr) -> Result<Self> {
        CredalSet::new(repr.members, repr.member_tags)
    }
}

impl From<CredalSet> for CredalRepr {
    fn from(c: CredalSet) -> Self {
        CredalRepr {
            members: c.members,
            member_tags: c.member_tags,
        }
    }
}

impl CredalSet {
    pub fn new(members: Vec<PrecisePmf>, member_tags: Vec<String>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyCredal)?;
        if members.iter().any(|m| m.candidates != first.candidates) {
            return Err(Error::CandidateSetMismatch);
        }
        if member_tags.len() != members.len() {
            return Err(Error::TagCountMismatch {
                members: members.len(),
                tags: member_tags.len(),
            });
        }
        Ok(CredalSet { members, member_tags })
    }

    /// Members tagged `m0`, `m1`, ...
    pub fn untagged(members: Vec<PrecisePmf>) -> Result<Self> {
        let tags = (0..members.len()).map(|i| format!("m{i}")).collect();
        Self::new(members, tags)
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.members[0].candidates
    }

    pub fn members(&self) -> &[PrecisePmf] {
        &self.members
    }

    pub fn member_tags(&self) -> &[String] {
        &self.member_tags
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Singleton bounds of a credal set: componentwise min and max over members.
pub fn interval_from_credal(credal: &CredalSet) -> ProbabilityIntervalSet {
    let n = credal.candidates().len();
    let mut lower = vec![f64::INFINITY; n];
    let mut upper = vec![f64::NEG_INFINITY; n];
    for member in &credal.members {
        for (i, &p) in member.probs.iter().enumerate() {
            lower[i] = lower[i].min(p);
            upper[i] = upper[i].max(p);
        }
    }
    ProbabilityIntervalSet {
        candidates: credal.candidates().clone(),
        lower,
        upper,
    }
}

/// Possibly unnormalized plausibility scores plus a "none of the above" slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PossibilityRepr", into = "PossibilityRepr")]
pub struct PossibilityAssignment {
    candidates: CandidateSet,
    raw_scores: Vec<f64>,
    none_of_above: f64,
}

#[derive(Serialize, Deserialize)]
struct PossibilityRepr {
    candidates: CandidateSet,
    raw_scores: Vec<f64>,
    none_of_above: f64,
}

impl TryFrom<PossibilityRepr> for PossibilityAssignment {
    type Error = Error;

    fn try_from(repr: PossibilityRepr) -> Result<Self> {
        PossibilityAssignment::new(repr.candidates, repr.raw_scores, repr.none_of_above)
    }
}

impl From<PossibilityAssignment> for PossibilityRepr {
    fn from(a: PossibilityAssignment) -> Self {
        PossibilityRepr {
            candidates: a.candidates,
            raw_scores: a.raw_scores,
            none_of_above: a.none_of_above,
        }
    }
}

impl PossibilityAssignment {
    pub fn new(candidates: CandidateSet, raw_scores: Vec<f64>, none_of_above: f64) -> Result<Self> {
        check_len(candidates.len(), raw_scores.len())?;
        check_unit(&raw_scores)?;
        check_unit(&[none_of_above]).map_err(|e| match e {
            Error::OutOfRange { value, .. } => Error::OutOfRange {
                index: raw_scores.len(),
                value,
            },
            Error::NonFinite(_) => Error::NonFinite(raw_scores.len()),
            other => other,
        })?;
        if raw_scores.iter().all(|&s| s == 0.0) && none_of_above == 0.0 {
            return Err(Error::AllZero);
        }
        Ok(PossibilityAssignment {
            candidates,
            raw_scores,
            none_of_above,
        })
    }

    pub(crate) fn from_parts_unchecked(candidates: CandidateSet, raw_scores: Vec<f64>, none_of_above: f64) -> Self {
        PossibilityAssignment {
            candidates,
            raw_scores,
            none_of_above,
        }
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn raw_scores(&self) -> &[f64] {
        &self.raw_scores
    }

    pub fn none_of_above(&self) -> f64 {
        self.none_of_above
    }

    /// Candidate scores followed by the "none of the above" score.
    pub fn all_scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.raw_scores
            .iter()
            .copied()
            .chain(std::iter::once(self.none_of_above))
    }
}

/// One question with its candidate set and ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub question: String,
    /// `None` for open-ended questions whose candidates are still to be generated.
    pub candidates: Option<CandidateSet>,
    pub truth_set: Vec<String>,
    pub reference_answer: Option<String>,
    pub prediction: Option<String>,
    /// Reference distribution over answers, when the dataset provides one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pstar: Option<Vec<(String, f64)>>,
}

impl QaRecord {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        candidates: Option<CandidateSet>,
        truth_set: Vec<String>,
        reference_answer: Option<String>,
        prediction: Option<String>,
    ) -> Result<Self> {
        if let Some(reference) = &reference_answer {
            let key = fold_answer(reference);
            if !truth_set.iter().any(|t| fold_answer(t) == key) {
                return Err(Error::ReferenceNotInTruthSet(reference.clone()));
            }
        }
        Ok(QaRecord {
            id: id.into(),
            question: question.into(),
            candidates,
            truth_set,
            reference_answer,
            prediction,
            pstar: None,
        })
    }

    pub fn with_pstar(mut self, pstar: Vec<(String, f64)>) -> Self {
        self.pstar = Some(pstar);
        self
    }

    /// Ambiguous iff more than one distinct correct answer exists.
    pub fn is_ambiguous(&self) -> bool {
        let distinct: std::collections::HashSet<_> = self.truth_set.iter().map(|t| fold_answer(t)).collect();
        distinct.len() > 1
    }

    /// `None` when there is no prediction or no candidate set yet.
    pub fn prediction_in_candidates(&self) -> Option<bool> {
        match (&self.prediction, &self.candidates) {
            (Some(p), Some(c)) => Some(c.contains(p)),
            _ => None,
        }
    }

    /// Correct iff the prediction matches the reference answer, or any truth
    /// answer when no reference is designated.
    pub fn is_correct(&self, prediction: &str) -> bool {
        let key = fold_answer(prediction);
        match &self.reference_answer {
            Some(reference) => fold_answer(reference) == key,
            None => self.truth_set.iter().any(|t| fold_answer(t) == key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab() -> CandidateSet {
        CandidateSet::new(["A", "B"], false).unwrap()
    }

    #[test]
    fn build_pmf_examples() {
        assert_eq!(build_pmf(&ab(), &[0.5, 0.5], false).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(build_pmf(&ab(), &[2.0, 2.0], true).unwrap().probs(), &[0.5, 0.5]);
        assert!(matches!(
            build_pmf(&ab(), &[0.7, 0.4], false),
            Err(Error::SumViolation { .. })
        ));
    }

    #[test]
    fn build_pmf_errors() {
        assert!(matches!(
            build_pmf(&ab(), &[-0.1, 1.1], true),
            Err(Error::NegativeWeight { index: 0, .. })
        ));
        assert_eq!(build_pmf(&ab(), &[0.0, 0.0], true), Err(Error::ZeroMass));
        assert!(matches!(
            build_pmf(&ab(), &[1.0], true),
            Err(Error::LengthMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let set = CandidateSet::new([" Paris", "London", "paris ", "LONDON", "Rome"], true).unwrap();
        assert_eq!(set.answers(), &["Paris", "London", "Rome"]);
        assert!(set.is_open_ended());
        assert_eq!(set.index_of("rome"), Some(2));
    }

    #[test]
    fn case_sensitive_keeps_variants() {
        let set = CandidateSet::case_sensitive(["ABC", "aBC", "ABC"], false).unwrap();
        assert_eq!(set.answers(), &["ABC", "aBC"]);
        let back: CandidateSet = serde_json::from_str(&serde_json::to_string(&set).unwrap()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn candidate_set_rejects_empty() {
        assert_eq!(
            CandidateSet::new(Vec::<String>::new(), false),
            Err(Error::EmptyCandidateSet)
        );
        assert_eq!(CandidateSet::new(["a", "  "], false), Err(Error::EmptyAnswer(1)));
    }

    #[test]
    fn interval_from_credal_examples() {
        let pmf = |a: f64, b: f64| build_pmf(&ab(), &[a, b], false).unwrap();
        let c = CredalSet::untagged(vec![pmf(0.2, 0.8), pmf(0.5, 0.5)]).unwrap();
        let iv = interval_from_credal(&c);
        assert_eq!(iv.lower(), &[0.2, 0.5]);
        assert_eq!(iv.upper(), &[0.5, 0.8]);

        let c = CredalSet::untagged(vec![pmf(0.3, 0.7)]).unwrap();
        let iv = interval_from_credal(&c);
        assert_eq!(iv.lower(), iv.upper());
        assert_eq!(iv.lower(), &[0.3, 0.7]);

        let c = CredalSet::untagged(vec![pmf(1.0, 0.0), pmf(0.0, 1.0)]).unwrap();
        let iv = interval_from_credal(&c);
        assert_eq!(iv.lower(), &[0.0, 0.0]);
        assert_eq!(iv.upper(), &[1.0, 1.0]);
    }

    #[test]
    fn credal_rejects_empty_and_mismatch() {
        assert_eq!(CredalSet::untagged(vec![]), Err(Error::EmptyCredal));
        let other = CandidateSet::new(["A", "C"], false).unwrap();
        let a = PrecisePmf::uniform(ab());
        let b = PrecisePmf::uniform(other);
        assert_eq!(CredalSet::untagged(vec![a, b]), Err(Error::CandidateSetMismatch));
    }

    #[test]
    fn interval_set_validation() {
        assert!(matches!(
            ProbabilityIntervalSet::new(ab(), vec![0.5, 0.1], vec![0.4, 0.2]),
            Err(Error::InvertedInterval { index: 0, .. })
        ));
        assert!(matches!(
            ProbabilityIntervalSet::new(ab(), vec![0.1, 0.1], vec![0.4, 1.2]),
            Err(Error::OutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn qa_record_labels() {
        let r = QaRecord::new(
            "q1",
            "Who won?",
            None,
            vec!["England".into(), "Wales".into(), "england".into()],
            Some("Wales".into()),
            Some("wales".into()),
        )
        .unwrap();
        assert!(r.is_ambiguous());
        assert!(r.is_correct("WALES"));
        assert!(!r.is_correct("England"));
        assert!(QaRecord::new("q", "x", None, vec!["a".into()], Some("b".into()), None).is_err());
    }

    #[test]
    fn serde_revalidates() {
        let bad = r#"{"candidates":{"answers":["A","B"],"open_ended":false},"probs":[0.9,0.9]}"#;
        assert!(serde_json::from_str::<PrecisePmf>(bad).is_err());
    }

    fn credal_strategy() -> impl Strategy<Value = CredalSet> {
        (1usize..=6, 1usize..=5).prop_flat_map(|(n, m)| {
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), m).prop_map(move |rows| {
                let ys = CandidateSet::new((0..n).map(|i| format!("y{i}")), false).unwrap();
                let members = rows
                    .iter()
                    .map(|w| {
                        let mut w = w.clone();
                        w[0] += 1e-3;
                        build_pmf(&ys, &w, true).unwrap()
                    })
                    .collect();
                CredalSet::untagged(members).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn credal_interval_contains_members(c in credal_strategy()) {
            let iv = interval_from_credal(&c);
            for m in c.members() {
                for (i, &p) in m.probs().iter().enumerate() {
                    prop_assert!(iv.lower()[i] <= p && p <= iv.upper()[i]);
                }
            }
        }

        #[test]
        fn renormalize_is_idempotent(w in prop::collection::vec(0.0f64..10.0, 1..12)) {
            let mut w = w;
            w[0] += 0.01;
            let ys = CandidateSet::new((0..w.len()).map(|i| i.to_string()), false).unwrap();
            let once = build_pmf(&ys, &w, true).unwrap();
            let twice = build_pmf(&ys, once.probs(), true).unwrap();
            for (a, b) in once.probs().iter().zip(twice.probs()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
