//! Maximum Mean Imprecision under total variation.
//!
//! `MMI = sup_A (P̄(A) − P̲(A))` over all events `A ⊆ 𝒴`. For a finite credal
//! set the event bounds are min/max of member sums, so the supremum is a
//! finite enumeration over `2^|𝒴|` events. Interval reports only support the
//! answer-level width and the set-level bound `1 − Σ P̲({y})`.

use serde::{Deserialize, Serialize};

use crate::coherence::normalize_possibility;
use crate::par::{self, ExecPolicy};
use crate::types::{CredalSet, PossibilityAssignment, PROB_TOL};
use crate::{Error, Result};

/// Largest candidate set for which events are enumerated exactly.
pub const EXACT_ENUM_CAP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmiMode {
    ExactEventEnum,
    UpperBound,
    IntervalWidth,
    PossibilityOrderStat,
    PossibilityBinary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmiScore {
    pub value: f64,
    pub mode: MmiMode,
    /// Number of events enumerated; zero for the closed-form modes.
    pub event_count: u64,
}

impl MmiScore {
    fn closed_form(value: f64, mode: MmiMode) -> Self {
        MmiScore {
            value,
            mode,
            event_count: 0,
        }
    }
}

/// Answer-level MMI: the width of one probability interval.
pub fn interval_width_mmi(lower: f64, upper: f64) -> Result<MmiScore> {
    for (index, value) in [lower, upper].into_iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { index, value });
        }
    }
    if lower > upper {
        return Err(Error::InvertedInterval { index: 0, lower, upper });
    }
    Ok(MmiScore::closed_form(upper - lower, MmiMode::IntervalWidth))
}

/// Set-level bound `1 − Σ lowers`, clamped to `[0, 1]`.
pub fn mmi_upper_bound(lowers: &[f64]) -> Result<MmiScore> {
    for (index, &value) in lowers.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { index, value });
        }
    }
    let sum: f64 = lowers.iter().sum();
    if sum > 1.0 + PROB_TOL {
        return Err(Error::LowerSumExceedsOne { sum });
    }
    Ok(MmiScore::closed_form((1.0 - sum).clamp(0.0, 1.0), MmiMode::UpperBound))
}

/// Exact MMI of a credal set with the default cap and execution policy.
pub fn exact_mmi_credal(credal: &CredalSet) -> Result<MmiScore> {
    exact_mmi_credal_with(credal, EXACT_ENUM_CAP, ExecPolicy::default())
}

/// Exact MMI by enumerating every event.
///
/// Each event probability is accumulated over its members in ascending
/// candidate order, so the result does not depend on `policy`.
pub fn exact_mmi_credal_with(credal: &CredalSet, cap: usize, policy: ExecPolicy) -> Result<MmiScore> {
    let n = credal.candidates().len();
    if n > cap || n >= usize::BITS as usize {
        return Err(Error::CandidateSetTooLarge { size: n, cap });
    }
    let events = 1usize << n;
    let tables = par::map(policy, credal.members(), |m| event_sums(m.probs()));

    const CHUNK: usize = 1 << 12;
    let chunks = events.div_ceil(CHUNK);
    let chunk_max = par::map_range(policy, chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(events);
        let mut best = 0.0f64;
        for mask in start..end {
            best = best.max(event_width(&tables, mask));
        }
        best
    });
    let value = chunk_max.into_iter().fold(0.0f64, f64::max);
    Ok(MmiScore {
        value,
        mode: MmiMode::ExactEventEnum,
        event_count: events as u64,
    })
}

/// Width `P̄(A) − P̲(A)` of every event, indexed by bitmask.
pub fn event_widths(credal: &CredalSet, cap: usize) -> Result<Vec<f64>> {
    let n = credal.candidates().len();
    if n > cap || n >= usize::BITS as usize {
        return Err(Error::CandidateSetTooLarge { size: n, cap });
    }
    let tables: Vec<Vec<f64>> = credal.members().iter().map(|m| event_sums(m.probs())).collect();
    Ok((0..1usize << n).map(|mask| event_width(&tables, mask)).collect())
}

fn event_width(tables: &[Vec<f64>], mask: usize) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for t in tables {
        hi = hi.max(t[mask]);
        lo = lo.min(t[mask]);
    }
    hi - lo
}

/// `sums[mask] = Σ_{i ∈ mask} probs[i]`, folded in ascending index order.
fn event_sums(probs: &[f64]) -> Vec<f64> {
    let n = probs.len();
    let mut sums = vec![0.0f64; 1 << n];
    for mask in 1usize..(1 << n) {
        let high = usize::BITS - 1 - mask.leading_zeros();
        sums[mask] = sums[mask ^ (1 << high)] + probs[high as usize];
    }
    sums
}

/// Set-level possibility MMI: second-largest normalized score, "none of the
/// above" included.
pub fn possibility_mmi(a: &PossibilityAssignment) -> Result<MmiScore> {
    let mut scores: Vec<f64> = a.all_scores().collect();
    scores.sort_by(|x, y| y.total_cmp(x));
    let top = scores[0];
    if top <= 0.0 {
        return Err(Error::AllZero);
    }
    let value = if scores.len() < 2 { 0.0 } else { scores[1] / top };
    Ok(MmiScore::closed_form(value, MmiMode::PossibilityOrderStat))
}

/// Answer-level possibility MMI from `π̂(y)` and `π̂(¬y)`.
pub fn possibility_binary_mmi(pi_yes: f64, pi_no: f64) -> Result<MmiScore> {
    for (index, value) in [pi_yes, pi_no].into_iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { index, value });
        }
    }
    let hi = pi_yes.max(pi_no);
    if hi <= 0.0 {
        return Err(Error::AllZero);
    }
    Ok(MmiScore::closed_form(
        pi_yes.min(pi_no) / hi,
        MmiMode::PossibilityBinary,
    ))
}

/// Answer-level possibility MMI for candidate `index`, with `¬y` scored as the
/// most plausible alternative (possibility of a union is the max).
pub fn possibility_answer_mmi(a: &PossibilityAssignment, index: usize) -> Result<MmiScore> {
    let normalized = normalize_possibility(a)?;
    let yes = *normalized.raw_scores().get(index).ok_or(Error::LengthMismatch {
        expected: normalized.raw_scores().len(),
        got: index + 1,
    })?;
    let no = normalized
        .all_scores()
        .enumerate()
        .filter(|&(i, _)| i != index)
        .map(|(_, s)| s)
        .fold(0.0f64, f64::max);
    possibility_binary_mmi(yes, no)
}
