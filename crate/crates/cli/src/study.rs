//! Synthetic ICL study: sweep case noise `p` and example count `m`, elicit
//! each method on the exact variant set, and summarize scores over repeats.
//!
//! First-order and second-order scores are taken at set level over the full
//! variant set; `error` is the fraction of decisions that fail a permissive
//! match against the clean answer.

use std::sync::Arc;

use ipelicit_core::eval::mean_std;
use ipelicit_core::synth::{
    generate_icl_task, ground_truth_variants, permissive_match, variant_candidates, NoiseSpec, DEFAULT_MAX_ENUM,
};
use ipelicit_core::CredalSet;
use ipelicit_elicit::{
    elicit_credal_ensemble, elicit_with_retry, ChatEndpoint, ElicitError, ElicitOptions, EnsembleMember, PromptKind,
};
use serde::{Deserialize, Serialize};

use crate::config::StudyConfig;
use crate::scoring::{score_report, Report};
use crate::CliError;

/// One summary cell: a metric of one method at one `(p, m)` setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub method: PromptKind,
    pub p: f64,
    pub m: usize,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    /// Elicitations that exhausted their retry budget.
    pub failures: usize,
}

impl StudyResult {
    pub fn get(&self, method: PromptKind, p: f64, m: usize, metric: &str) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.p == p && r.m == m && r.metric == metric)
    }
}

/// Task seed for one grid cell; independent of the sweep order.
fn cell_seed(base: u64, pi: usize, mi: usize, rep: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((pi as u64) << 40 | (mi as u64) << 20 | rep as u64)
}

/// Runs the sweep. `endpoint_for(p)` supplies the endpoint used at noise `p`;
/// real models ignore it, simulated agents use it as their belief.
pub fn run_synthetic_study(
    cfg: &StudyConfig,
    endpoint_for: impl Fn(f64) -> Result<Arc<dyn ChatEndpoint>, CliError>,
) -> Result<StudyResult, CliError> {
    cfg.validate()?;
    let mut result = StudyResult::default();
    for (pi, &p) in cfg.p_grid.iter().enumerate() {
        let endpoint = endpoint_for(p)?;
        for (mi, &m) in cfg.m_grid.iter().enumerate() {
            for &method in &cfg.methods {
                let mut first = Vec::new();
                let mut second = Vec::new();
                let mut error = Vec::new();
                for rep in 0..cfg.repeats {
                    let seed = cell_seed(cfg.seed, pi, mi, rep);
                    let noise = NoiseSpec::new(p, seed ^ 0x5EED)?;
                    let task = generate_icl_task(&cfg.spec, &noise, m, cfg.word_length, seed)?;
                    let variants = ground_truth_variants(&task.clean_query_output, p, DEFAULT_MAX_ENUM)?;
                    let cands = variant_candidates(&variants)?;
                    let question = task.to_question();
                    let opts = ElicitOptions::default()
                        .with_max_attempts(cfg.max_attempts)
                        .with_seed(Some(seed));

                    let scored = if method == PromptKind::Credal {
                        let members: Vec<EnsembleMember<'_>> = (0..cfg.credal_members as u64)
                            .map(|j| EnsembleMember {
                                endpoint: endpoint.as_ref(),
                                seed: Some(seed.wrapping_add(j)),
                            })
                            .collect();
                        match elicit_credal_ensemble(&members, &question, &cands, &opts, None) {
                            Ok(out) => Some(score_credal(&out.credal)?),
                            Err(ElicitError::MemberQuorumNotMet { .. }) => None,
                            Err(e) => return Err(e.into()),
                        }
                    } else {
                        match elicit_with_retry(endpoint.as_ref(), method, &question, Some(&cands), &opts) {
                            Ok(r) => {
                                let payload = r.payload.as_ref().expect("succeeded results carry a payload");
                                Some(score_report(method, &Report::Single(payload), None)?)
                            }
                            Err(ElicitError::RetriesExhausted(_)) => None,
                            Err(e) => return Err(e.into()),
                        }
                    };
                    let Some(scored) = scored else {
                        result.failures += 1;
                        continue;
                    };
                    if let Some(f) = scored.scores.first_order {
                        first.push(f);
                    }
                    if let Some(s) = scored.scores.second_order {
                        second.push(s);
                    }
                    if let Some(d) = scored.decisions.first() {
                        let wrong = !permissive_match(&d.chosen_answer, &task.clean_query_output);
                        error.push(if wrong { 1.0 } else { 0.0 });
                    }
                }
                for (metric, values) in [("first_order", &first), ("second_order", &second), ("error", &error)] {
                    if let Some((mean, std)) = mean_std(values) {
                        result.rows.push(StudyRow {
                            method,
                            p,
                            m,
                            metric: metric.to_string(),
                            mean,
                            std,
                            n: values.len(),
                        });
                    }
                }
            }
        }
    }
    Ok(result)
}

fn score_credal(c: &CredalSet) -> Result<crate::scoring::Scored, CliError> {
    Ok(score_report(PromptKind::Credal, &Report::Credal(c), None)?)
}
