//! Deterministic mock endpoint: scripted replies plus a programmable agent.
//!
//! The mock is stateless. Every request is answered from the prompt alone: the
//! kind is recovered from the catalog text, the question from the `Question:`
//! line and the attempt number from the re-ask note. That keeps replies
//! identical whether the mock runs in-process or behind `mock serve`, and under
//! any request interleaving.

use std::path::Path;
use std::sync::Arc;

use ipelicit_core::synth::{
    apply_transform, ground_truth_variants, parse_icl_question, TransformSpec, DEFAULT_MAX_ENUM,
};
use ipelicit_elicit::prompts::{attempt_from_prompt, detect_kind, question_from_prompt};
use ipelicit_elicit::scripted::respond;
use ipelicit_elicit::{ChatEndpoint, ChatRequest, ChatResponse, ModelEndpoint, PromptKind, TransportError};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Replies for one (question, kind) pair, indexed by attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub question: String,
    pub kind: PromptKind,
    /// Restrict to one model id.
    #[serde(default)]
    pub model: Option<String>,
    /// Restrict to one request seed.
    #[serde(default)]
    pub seed: Option<u64>,
    pub replies: Vec<String>,
}

/// Parameters of the simulated agent used when no script entry matches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    /// Believed case-noise level; estimated from the examples when absent.
    #[serde(default)]
    pub p: Option<f64>,
    /// Second-order width is `min(1, width_c / m)`.
    #[serde(default = "default_width_c")]
    pub width_c: f64,
    /// The rule the agent has "learned".
    #[serde(default = "TransformSpec::base_setup")]
    pub spec: TransformSpec,
    /// Attempts answered with incoherent (over-summing) reports first.
    #[serde(default)]
    pub flaky_attempts: u32,
}

fn default_width_c() -> f64 {
    1.0
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            p: None,
            width_c: default_width_c(),
            spec: TransformSpec::base_setup(),
            flaky_attempts: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
    #[serde(default)]
    pub agent: Option<AgentParams>,
}

impl MockScript {
    pub fn agent(params: AgentParams) -> Self {
        MockScript {
            entries: Vec::new(),
            agent: Some(params),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("mock script {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("mock script {}: {e}", path.display())))
    }

    /// The assistant text for `request`, or why there is none.
    pub fn reply(&self, request: &ChatRequest) -> Result<String, String> {
        let prompt = &request.user;
        let kind = detect_kind(prompt).ok_or("prompt matches no catalog template")?;
        let question = question_from_prompt(prompt).ok_or("prompt has no question line")?;
        let attempt = attempt_from_prompt(prompt);

        let entry = self
            .entries
            .iter()
            .filter(|e| e.kind == kind && e.question.trim() == question)
            .filter(|e| e.model.as_ref().is_none_or(|m| *m == request.model))
            .filter(|e| e.seed.is_none() || e.seed == request.seed)
            .max_by_key(|e| (e.model.is_some() as u8) + (e.seed.is_some() as u8));
        if let Some(e) = entry {
            return e
                .replies
                .get(attempt as usize - 1)
                .cloned()
                .ok_or_else(|| format!("script exhausted: {kind} attempt {attempt} for `{question}`"));
        }
        match &self.agent {
            Some(a) => agent_reply(a, kind, question, prompt, request.seed, attempt),
            None => Err(format!("no script entry for {kind} `{question}`")),
        }
    }
}

/// In-process endpoint backed by a [`MockScript`].
pub struct MockEndpoint {
    id: String,
    model: String,
    supports_seed: bool,
    temperature: Option<f64>,
    seed: Option<u64>,
    script: Arc<MockScript>,
}

impl MockEndpoint {
    pub fn new(config: &ModelEndpoint, script: Arc<MockScript>) -> Self {
        MockEndpoint {
            id: config.id().to_string(),
            model: config.model_id.clone(),
            supports_seed: config.supports_seed,
            temperature: config.temperature,
            seed: config.seed,
            script,
        }
    }
}

impl ChatEndpoint for MockEndpoint {
    fn id(&self) -> &str {
        &self.id
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn default_temperature(&self) -> Option<f64> {
        self.temperature
    }

    fn default_seed(&self) -> Option<u64> {
        self.seed
    }

    fn supports_seed(&self) -> bool {
        self.supports_seed
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let text = self.script.reply(request).map_err(TransportError::Script)?;
        Ok(respond(request, &text))
    }
}

/// Numbered candidates listed in a rendered prompt.
fn prompt_candidates(prompt: &str) -> Vec<String> {
    let Some(start) = prompt.find("\nAnswers:\n") else {
        return Vec::new();
    };
    prompt[start + "\nAnswers:\n".len()..]
        .lines()
        .take_while(|l| !l.trim().is_empty())
        .filter_map(|l| l.split_once(". ").map(|(_, a)| a.to_string()))
        .collect()
}

fn fnv(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for p in parts {
        for &b in *p {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// The agent's belief: a distribution over `answers` and an imprecision width.
struct Belief {
    answers: Vec<String>,
    probs: Vec<f64>,
    width: f64,
}

fn icl_belief(params: &AgentParams, question: &str, listed: &[String]) -> Result<Option<Belief>, String> {
    let Some((examples, query)) = parse_icl_question(question) else {
        return Ok(None);
    };
    let p = params.p.unwrap_or_else(|| {
        let (lower, total) = examples
            .iter()
            .flat_map(|e| e.output.chars())
            .fold((0usize, 0usize), |(l, t), c| {
                (l + c.is_ascii_lowercase() as usize, t + 1)
            });
        if total == 0 {
            0.0
        } else {
            lower as f64 / total as f64
        }
    });
    let clean = apply_transform(&params.spec, &query).map_err(|e| e.to_string())?;
    let variants = ground_truth_variants(&clean, p, DEFAULT_MAX_ENUM).map_err(|e| e.to_string())?;
    let m = examples.len();
    let width = if m == 0 {
        1.0
    } else {
        (params.width_c / m as f64).min(1.0)
    };

    if listed.is_empty() {
        let mut v = variants;
        // most probable first; ties keep enumeration order
        v.sort_by(|a, b| b.prob.total_cmp(&a.prob));
        return Ok(Some(Belief {
            answers: v.iter().map(|v| v.text.clone()).collect(),
            probs: v.iter().map(|v| v.prob).collect(),
            width,
        }));
    }
    let raw: Vec<f64> = listed
        .iter()
        .map(|c| variants.iter().find(|v| v.text == *c).map_or(0.0, |v| v.prob))
        .collect();
    Ok(Some(Belief {
        answers: listed.to_vec(),
        probs: normalize(raw),
        width,
    }))
}

fn generic_belief(question: &str, listed: &[String]) -> Belief {
    let answers: Vec<String> = if listed.is_empty() {
        ["alpha", "beta", "gamma"].map(String::from).to_vec()
    } else {
        listed.to_vec()
    };
    let raw = answers
        .iter()
        .map(|a| 0.05 + unit(fnv(&[question.as_bytes(), a.as_bytes()])))
        .collect();
    Belief {
        probs: normalize(raw),
        width: 0.05 + 0.45 * unit(fnv(&[question.as_bytes(), b"width"])),
        answers,
    }
}

fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.into_iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

fn block(rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from("```\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.push_str("```\n");
    s
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn agent_reply(
    params: &AgentParams,
    kind: PromptKind,
    question: &str,
    prompt: &str,
    seed: Option<u64>,
    attempt: u32,
) -> Result<String, String> {
    let listed = prompt_candidates(prompt);
    let (belief, is_icl) = match icl_belief(params, question, &listed)? {
        Some(b) => (b, true),
        None => (generic_belief(question, &listed), false),
    };
    let Belief {
        answers,
        probs,
        width: w,
    } = belief;
    let flaky = attempt <= params.flaky_attempts;
    let inflate = if flaky { 1.5 } else { 1.0 };

    Ok(match kind {
        PromptKind::Candidates => answers
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{}. {a}\n", i + 1))
            .collect(),
        PromptKind::Definetti => block(
            probs
                .iter()
                .enumerate()
                .map(|(i, p)| format!("{}|price={}", i + 1, p * inflate)),
        ),
        PromptKind::Credal => {
            let k = seed.unwrap_or(0) as usize % probs.len();
            block(probs.iter().enumerate().map(|(i, p)| {
                let q = (1.0 - w) * p + if i == k { w } else { 0.0 };
                format!("{}|prob={}", i + 1, q * inflate)
            }))
        }
        PromptKind::Probint => {
            let lower_scale = if flaky { 2.0 } else { 1.0 - w };
            block(probs.iter().enumerate().map(|(i, p)| {
                let lo = (p * lower_scale).min(1.0);
                let hi = (p * (1.0 - w) + w).min(1.0).max(lo);
                format!("{}|lower={lo}|upper={hi}", i + 1)
            }))
        }
        PromptKind::Possibility => {
            let max = probs.iter().copied().fold(0.0, f64::max);
            let mut rows: Vec<String> = probs
                .iter()
                .enumerate()
                .map(|(i, p)| format!("{}|pos={}", i + 1, if max > 0.0 { p / max } else { 0.0 }))
                .collect();
            rows.push(format!("NOTA|pos={w}"));
            block(rows)
        }
        PromptKind::Vanilla => {
            let proposed = prompt
                .lines()
                .find_map(|l| l.strip_prefix("Proposed answer: "))
                .map(str::to_string);
            match proposed {
                Some(a) => {
                    let conf = match answers.iter().position(|x| *x == a) {
                        Some(i) => probs[i],
                        None if is_icl => 0.0,
                        None => 0.05 + 0.9 * unit(fnv(&[question.as_bytes(), a.as_bytes()])),
                    };
                    block([format!("CONF|conf={conf}")])
                }
                None => {
                    let best = argmax(&probs);
                    format!(
                        "Answer: {}\n{}",
                        answers[best],
                        block([format!("CONF|conf={}", probs[best])])
                    )
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ipelicit_core::synth::{generate_icl_task, variant_candidates, NoiseSpec};
    use ipelicit_elicit::{elicit_with_retry, render_prompt, ElicitOptions};

    fn request(user: String, seed: Option<u64>) -> ChatRequest {
        ChatRequest {
            model: "mock".into(),
            system: String::new(),
            user,
            temperature: None,
            seed,
        }
    }

    #[test]
    fn script_entries_are_indexed_by_attempt() {
        let script = MockScript {
            entries: vec![ScriptEntry {
                question: "q".into(),
                kind: PromptKind::Definetti,
                model: None,
                seed: None,
                replies: vec!["first".into(), "second".into()],
            }],
            agent: None,
        };
        let cands = ipelicit_core::CandidateSet::new(["A", "B"], false).unwrap();
        let p = render_prompt(PromptKind::Definetti, "q", Some(&cands)).unwrap();
        assert_eq!(script.reply(&request(p.clone(), None)).unwrap(), "first");
        let p2 = format!("{p}{}", ipelicit_elicit::prompts::retry_note(2, &[]));
        assert_eq!(script.reply(&request(p2, None)).unwrap(), "second");
        let p3 = format!("{p}{}", ipelicit_elicit::prompts::retry_note(3, &[]));
        assert!(script.reply(&request(p3, None)).unwrap_err().contains("exhausted"));
        let other = render_prompt(PromptKind::Definetti, "other", Some(&cands)).unwrap();
        assert!(script.reply(&request(other, None)).is_err());
    }

    #[test]
    fn seed_specific_entries_win() {
        let entry = |seed, reply: &str| ScriptEntry {
            question: "q".into(),
            kind: PromptKind::Vanilla,
            model: None,
            seed,
            replies: vec![reply.into()],
        };
        let script = MockScript {
            entries: vec![entry(None, "any"), entry(Some(7), "seven")],
            agent: None,
        };
        let p = render_prompt(PromptKind::Vanilla, "q", None).unwrap();
        assert_eq!(script.reply(&request(p.clone(), Some(7))).unwrap(), "seven");
        assert_eq!(script.reply(&request(p, Some(8))).unwrap(), "any");
    }

    fn icl(p: f64, m: usize) -> (String, ipelicit_core::CandidateSet, Vec<f64>) {
        let spec = TransformSpec::base_setup();
        let task = generate_icl_task(&spec, &NoiseSpec::new(p, 3).unwrap(), m, 4, 9).unwrap();
        let variants = ground_truth_variants(&task.clean_query_output, p, DEFAULT_MAX_ENUM).unwrap();
        let probs = variants.iter().map(|v| v.prob).collect();
        (task.to_question(), variant_candidates(&variants).unwrap(), probs)
    }

    #[test]
    fn agent_verbalizes_analytic_distribution() {
        let agent = MockEndpoint::new(
            &ModelEndpoint::new("mock://", "agent"),
            Arc::new(MockScript::agent(AgentParams {
                p: Some(0.25),
                width_c: 2.0,
                ..AgentParams::default()
            })),
        );
        let (q, cands, probs) = icl(0.25, 8);
        let opts = ElicitOptions::default();
        let r = elicit_with_retry(&agent, PromptKind::Definetti, &q, Some(&cands), &opts).unwrap();
        let got = r.payload.unwrap();
        for (a, b) in got.pmf().unwrap().probs().iter().zip(&probs) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = elicit_with_retry(&agent, PromptKind::Probint, &q, Some(&cands), &opts).unwrap();
        assert!((r.score.unwrap() - 0.25).abs() < 1e-12, "width c/m = 2/8");
        let r = elicit_with_retry(&agent, PromptKind::Possibility, &q, Some(&cands), &opts).unwrap();
        let a = r.payload.unwrap();
        assert_eq!(a.possibility().unwrap().raw_scores()[0], 1.0);
        assert_eq!(a.possibility().unwrap().none_of_above(), 0.25);
    }

    #[test]
    fn flaky_agent_needs_retries() {
        let agent = MockEndpoint::new(
            &ModelEndpoint::new("mock://", "agent"),
            Arc::new(MockScript::agent(AgentParams {
                flaky_attempts: 2,
                ..AgentParams::default()
            })),
        );
        let (q, cands, _) = icl(0.25, 8);
        let r = elicit_with_retry(
            &agent,
            PromptKind::Definetti,
            &q,
            Some(&cands),
            &ElicitOptions::default(),
        )
        .unwrap();
        assert_eq!(r.attempts, 3);
        let r = elicit_with_retry(&agent, PromptKind::Probint, &q, Some(&cands), &ElicitOptions::default()).unwrap();
        assert_eq!(r.attempts, 3);
    }

    #[test]
    fn generic_agent_is_deterministic_and_coherent() {
        let ep = MockEndpoint::new(
            &ModelEndpoint::new("mock://", "agent"),
            Arc::new(MockScript::agent(AgentParams::default())),
        );
        let opts = ElicitOptions::default();
        let (cands, _) = ipelicit_elicit::generate_candidates(&ep, "Who wrote it?", &opts).unwrap();
        assert_eq!(cands.len(), 3);
        for kind in [
            PromptKind::Definetti,
            PromptKind::Probint,
            PromptKind::Credal,
            PromptKind::Possibility,
        ] {
            let a = elicit_with_retry(&ep, kind, "Who wrote it?", Some(&cands), &opts).unwrap();
            let b = elicit_with_retry(&ep, kind, "Who wrote it?", Some(&cands), &opts).unwrap();
            assert_eq!(a.attempts, 1);
            assert_eq!(a, b);
        }
        let v = elicit_with_retry(&ep, PromptKind::Vanilla, "Who wrote it?", None, &opts).unwrap();
        assert!(v.payload.unwrap().confidence().is_some());
    }
}
