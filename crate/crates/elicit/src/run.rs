//! Verify-retry elicitation loops.
//!
//! A reply that fails to parse or fails its verifier is re-asked immediately
//! with the problems listed in the prompt; only transport errors back off, and
//! that happens inside the endpoint.

use ipelicit_core::coherence::VerdictReport;
use ipelicit_core::eval::UsageEntry;
use ipelicit_core::mmi::mmi_upper_bound;
use ipelicit_core::scores::entropy;
use ipelicit_core::{build_pmf, CandidateSet, CredalSet};
use serde::{Deserialize, Serialize};

use crate::endpoint::{ChatEndpoint, ChatRequest, Usage};
use crate::parse::{parse_structured_report, ParseError, Payload, RawReport};
use crate::prompts::{render_prompt, retry_note, PromptKind, SYSTEM_TEXT};
use crate::ElicitError;

pub const DEFAULT_MAX_ATTEMPTS: u32 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElicitOptions {
    pub max_attempts: u32,
    /// Overrides the endpoint's default seed.
    pub seed: Option<u64>,
    /// Overrides the endpoint's default temperature.
    pub temperature: Option<f64>,
    /// Also require `Σ upper ≥ 1` for interval reports.
    pub enforce_upper: bool,
    /// On the final attempt, renormalize a non-negative betting/credal report
    /// instead of failing. The result is flagged `salvaged`.
    pub salvage_renormalize: bool,
}

impl Default for ElicitOptions {
    fn default() -> Self {
        ElicitOptions {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            seed: None,
            temperature: None,
            enforce_upper: false,
            salvage_renormalize: false,
        }
    }
}

impl ElicitOptions {
    pub fn with_max_attempts(mut self, n: u32) -> Self {
        self.max_attempts = n;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }
}

/// One request/reply round, stored verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub attempt: u32,
    pub prompt: String,
    pub reply: String,
    pub raw_request: String,
    pub raw_response: String,
    pub usage: Usage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<ParseError>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElicitStatus {
    Succeeded,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElicitationResult {
    pub kind: PromptKind,
    pub endpoint: String,
    /// Seed actually sent, `None` when the endpoint ignores seeds.
    pub seed: Option<u64>,
    pub status: ElicitStatus,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    #[serde(default)]
    pub salvaged: bool,
    /// Entropy for betting reports, the set-level MMI bound for interval reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub usage: Usage,
    pub log: Vec<AttemptLog>,
}

impl ElicitationResult {
    pub fn succeeded(&self) -> bool {
        self.status == ElicitStatus::Succeeded
    }

    /// Verdicts of the attempts whose reply parsed.
    pub fn verdicts(&self) -> Vec<&VerdictReport> {
        self.log.iter().filter_map(|a| a.verdict.as_ref()).collect()
    }

    /// Usage attributed to `method` for cost accounting.
    pub fn usage_entry(&self, method: &str) -> UsageEntry {
        UsageEntry {
            method: method.to_string(),
            endpoint: self.endpoint.clone(),
            input_tokens: self.usage.input_tokens,
            output_tokens: self.usage.output_tokens,
        }
    }
}

/// Re-derives a payload from a stored reply: parse, verify, build.
pub fn replay(
    kind: PromptKind,
    reply: &str,
    candidates: Option<&CandidateSet>,
    enforce_upper: bool,
) -> Result<Payload, ElicitError> {
    let raw = parse_structured_report(kind, reply, candidates).map_err(ElicitError::Parse)?;
    let verdict = raw.verify(enforce_upper);
    if !verdict.passed {
        return Err(ElicitError::Rejected(verdict));
    }
    Ok(raw.into_payload(candidates, false)?)
}

/// The score returned alongside a verified payload.
pub fn summary_score(payload: &Payload) -> Option<f64> {
    match payload {
        Payload::Pmf { pmf } => Some(entropy(pmf)),
        Payload::Intervals { intervals } => mmi_upper_bound(intervals.lower()).ok().map(|s| s.value),
        _ => None,
    }
}

fn salvage(raw: &RawReport, candidates: Option<&CandidateSet>) -> Option<Payload> {
    let (RawReport::Prices { prices: v } | RawReport::Probs { probs: v }) = raw else {
        return None;
    };
    let pmf = build_pmf(candidates?, v, true).ok()?;
    Some(Payload::Pmf { pmf })
}

/// Requests, parses and verifies until the kind's verifier passes or the
/// attempt budget runs out.
pub fn elicit_with_retry(
    endpoint: &dyn ChatEndpoint,
    kind: PromptKind,
    question: &str,
    candidates: Option<&CandidateSet>,
    opts: &ElicitOptions,
) -> Result<ElicitationResult, ElicitError> {
    if opts.max_attempts == 0 {
        return Err(ElicitError::InvalidConfig("max_attempts must be at least 1".into()));
    }
    let base = render_prompt(kind, question, candidates)?;
    let seed = opts
        .seed
        .or_else(|| endpoint.default_seed())
        .filter(|_| endpoint.supports_seed());
    let temperature = opts.temperature.or_else(|| endpoint.default_temperature());

    let mut result = ElicitationResult {
        kind,
        endpoint: endpoint.id().to_string(),
        seed,
        status: ElicitStatus::Failed,
        attempts: 0,
        payload: None,
        salvaged: false,
        score: None,
        usage: Usage::default(),
        log: Vec::new(),
    };
    let mut problems: Vec<String> = Vec::new();

    for attempt in 1..=opts.max_attempts {
        let prompt = if attempt == 1 {
            base.clone()
        } else {
            format!("{base}{}", retry_note(attempt, &problems))
        };
        let request = ChatRequest {
            model: endpoint.model().to_string(),
            system: SYSTEM_TEXT.to_string(),
            user: prompt.clone(),
            temperature,
            seed,
        };
        let response = endpoint.complete(&request)?;
        result.attempts = attempt;
        result.usage += response.usage;
        let mut entry = AttemptLog {
            attempt,
            prompt,
            reply: response.text,
            raw_request: response.raw_request,
            raw_response: response.raw_response,
            usage: response.usage,
            verdict: None,
            parse_error: None,
        };

        let mut payload = None;
        match parse_structured_report(kind, &entry.reply, candidates) {
            Err(e) => {
                log::debug!("{}: attempt {attempt} unparseable: {e}", result.endpoint);
                problems = vec![format!("the output block could not be read: {e}")];
                entry.parse_error = Some(e);
            }
            Ok(raw) => {
                let verdict = raw.verify(opts.enforce_upper);
                if verdict.passed {
                    payload = Some(raw.into_payload(candidates, false)?);
                } else if attempt == opts.max_attempts && opts.salvage_renormalize {
                    payload = salvage(&raw, candidates);
                    result.salvaged = payload.is_some();
                }
                if payload.is_none() {
                    log::debug!(
                        "{}: attempt {attempt} rejected: {:?}",
                        result.endpoint,
                        verdict.violations
                    );
                    problems = verdict.violations.iter().map(ToString::to_string).collect();
                }
                entry.verdict = Some(verdict);
            }
        }
        result.log.push(entry);

        if let Some(p) = payload {
            result.score = summary_score(&p);
            result.payload = Some(p);
            result.status = ElicitStatus::Succeeded;
            return Ok(result);
        }
    }
    Err(ElicitError::RetriesExhausted(Box::new(result)))
}

/// Elicits candidate answers (numbered list), deduplicated by trim + case-fold.
pub fn generate_candidates(
    endpoint: &dyn ChatEndpoint,
    question: &str,
    opts: &ElicitOptions,
) -> Result<(CandidateSet, ElicitationResult), ElicitError> {
    let r = elicit_with_retry(endpoint, PromptKind::Candidates, question, None, opts)?;
    let set = r
        .payload
        .as_ref()
        .and_then(Payload::candidates)
        .cloned()
        .expect("successful candidate elicitation carries a candidate set");
    Ok((set, r))
}

/// One belief in a credal ensemble: an endpoint plus an optional seed.
#[derive(Clone, Copy)]
pub struct EnsembleMember<'a> {
    pub endpoint: &'a dyn ChatEndpoint,
    pub seed: Option<u64>,
}

impl EnsembleMember<'_> {
    /// Provenance tag; unseeded members of a seedless endpoint are marked as
    /// independent samples.
    pub fn tag(&self, index: usize) -> String {
        match (self.seed, self.endpoint.supports_seed()) {
            (Some(s), true) => format!("{}#seed={s}", self.endpoint.id()),
            (Some(s), false) => format!("{}#seed={s}~unseeded", self.endpoint.id()),
            (None, _) => format!("{}#{index}", self.endpoint.id()),
        }
    }
}

#[derive(Debug)]
pub struct MemberOutcome {
    pub tag: String,
    pub result: Result<ElicitationResult, ElicitError>,
}

#[derive(Debug)]
pub struct EnsembleOutcome {
    pub credal: CredalSet,
    /// Every member in input order, including failures.
    pub members: Vec<MemberOutcome>,
}

impl EnsembleOutcome {
    pub fn usage(&self) -> Usage {
        let mut u = Usage::default();
        for m in &self.members {
            u += member_usage(&m.result);
        }
        u
    }
}

/// Usage of a member, including failed elicitations.
pub fn member_usage(r: &Result<ElicitationResult, ElicitError>) -> Usage {
    match r {
        Ok(res) => res.usage,
        Err(ElicitError::RetriesExhausted(res)) => res.usage,
        Err(_) => Usage::default(),
    }
}

/// Runs one credal elicitation per member over the same candidate set and
/// assembles the successes into a credal set. `quorum` defaults to all members.
pub fn elicit_credal_ensemble(
    members: &[EnsembleMember<'_>],
    question: &str,
    candidates: &CandidateSet,
    opts: &ElicitOptions,
    quorum: Option<usize>,
) -> Result<EnsembleOutcome, ElicitError> {
    if members.is_empty() {
        return Err(ElicitError::InvalidConfig(
            "credal ensemble needs at least one member".into(),
        ));
    }
    let required = quorum.unwrap_or(members.len()).clamp(1, members.len());

    let outcomes: Vec<MemberOutcome> = std::thread::scope(|s| {
        let handles: Vec<_> = members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let opts = ElicitOptions {
                    seed: m.seed.or(opts.seed),
                    ..opts.clone()
                };
                s.spawn(move || MemberOutcome {
                    tag: m.tag(i),
                    result: elicit_with_retry(m.endpoint, PromptKind::Credal, question, Some(candidates), &opts),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ensemble member panicked"))
            .collect()
    });

    let (pmfs, tags): (Vec<_>, Vec<_>) = outcomes
        .iter()
        .filter_map(|o| {
            let pmf = o.result.as_ref().ok()?.payload.as_ref()?.pmf()?.clone();
            Some((pmf, o.tag.clone()))
        })
        .unzip();
    if pmfs.len() < required {
        return Err(ElicitError::MemberQuorumNotMet {
            succeeded: pmfs.len(),
            required,
            members: outcomes,
        });
    }
    let credal = CredalSet::new(pmfs, tags)?;
    Ok(EnsembleOutcome {
        credal,
        members: outcomes,
    })
}
