//! First-order scores (nats) and the cross-entropy decomposition.

use serde::{Deserialize, Serialize};

use crate::types::{build_pmf, PrecisePmf};
use crate::{Error, Result};

/// Floor applied to the estimate before KL when its support misses the reference's.
pub const KL_SMOOTHING_FLOOR: f64 = 1e-9;

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats, `0 · ln 0 = 0`.
pub fn entropy(p: &PrecisePmf) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    let h = -probs.iter().map(|&p| plogp(p)).sum::<f64>();
    h.max(0.0)
}

/// Entropy of `Bern(p)`, the answer-level first-order score.
pub fn bernoulli_entropy(p: f64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange { index: 0, value: p });
    }
    Ok((-plogp(p) - plogp(1.0 - p)).max(0.0))
}

/// `CE(p*, p̂) = H(p*) + KL(p* ‖ p̂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub cross_entropy: f64,
    pub entropy_au: f64,
    pub kl_eu: f64,
    /// True when the estimate had to be floored to cover the reference support.
    pub smoothed: bool,
}

/// Decomposition with the default smoothing floor.
pub fn ce_kl_decomposition(p_star: &PrecisePmf, p_hat: &PrecisePmf) -> Result<Decomposition> {
    ce_kl_decomposition_with(p_star, p_hat, Some(KL_SMOOTHING_FLOOR))
}

/// Decomposition with an explicit floor; `None` turns a support mismatch into
/// [`Error::SupportMismatch`].
///
/// The three terms are summed independently, so the identity is a check and
/// not a definition.
pub fn ce_kl_decomposition_with(p_star: &PrecisePmf, p_hat: &PrecisePmf, floor: Option<f64>) -> Result<Decomposition> {
    if p_star.candidates() != p_hat.candidates() {
        return Err(Error::CandidateSetMismatch);
    }
    let mismatch = p_star
        .probs()
        .iter()
        .zip(p_hat.probs())
        .position(|(&s, &h)| s > 0.0 && h == 0.0);
    let (q, smoothed) = match (mismatch, floor) {
        (None, _) => (p_hat.probs().to_vec(), false),
        (Some(i), None) => return Err(Error::SupportMismatch(i)),
        (Some(_), Some(eps)) => {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidParameter(format!("smoothing floor {eps}")));
            }
            let floored: Vec<f64> = p_hat.probs().iter().map(|&h| h.max(eps)).collect();
            let pmf = build_pmf(p_hat.candidates(), &floored, true)?;
            (pmf.probs().to_vec(), true)
        }
    };

    let mut cross_entropy = 0.0;
    let mut entropy_au = 0.0;
    let mut kl_eu = 0.0;
    for (&s, &h) in p_star.probs().iter().zip(&q) {
        if s > 0.0 {
            cross_entropy -= s * h.ln();
            entropy_au -= s * s.ln();
            kl_eu += s * (s / h).ln();
        }
    }
    Ok(Decomposition {
        cross_entropy: cross_entropy.max(0.0),
        entropy_au: entropy_au.max(0.0),
        kl_eu: kl_eu.max(0.0),
        smoothed,
    })
}

/// Product of a first-order and a second-order score.
pub fn combined_score(first_order: f64, second_order: f64) -> Result<f64> {
    for s in [first_order, second_order] {
        if s.is_nan() || s < 0.0 {
            return Err(Error::NegativeScore(s));
        }
    }
    Ok(first_order * second_order)
}
