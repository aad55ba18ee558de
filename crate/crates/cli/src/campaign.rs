//! Campaign runner: question × method × seed → one persisted [`RunRecord`].
//!
//! Records go to `records.jsonl` in the output directory, after a header line
//! naming the schema and version. Work is processed in chunks; each chunk is
//! elicited in parallel and then appended in work-list order by the single
//! writer, so the file content does not depend on thread scheduling. Resume
//! scans existing keys before the writer starts and skips them.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ipelicit_core::decision::DecisionOutcome;
use ipelicit_core::{CandidateSet, CredalSet, QaRecord};
use ipelicit_elicit::{
    elicit_credal_ensemble, elicit_with_retry, generate_candidates, ChatEndpoint, ChatRequest, ChatResponse,
    ElicitError, ElicitOptions, ElicitationResult, EnsembleMember, HttpEndpoint, ModelEndpoint, Payload, PromptKind,
    TransportError, Usage,
};
use serde::{Deserialize, Serialize};

use crate::config::{CampaignConfig, ScoreLevel};
use crate::ingest::load_dataset;
use crate::mock::{MockEndpoint, MockScript};
use crate::scoring::{score_report, Report, Scores};
use crate::CliError;

pub const RECORD_SCHEMA: &str = "ipelicit.run_record";
pub const RECORD_VERSION: u32 = 1;
pub const CANDIDATE_SCHEMA: &str = "ipelicit.candidate_set";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub schema: String,
    pub version: u32,
}

impl FileHeader {
    fn new(schema: &str) -> Self {
        FileHeader {
            schema: schema.to_string(),
            version: RECORD_VERSION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub question_id: String,
    pub method: PromptKind,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSource {
    Dataset,
    Generated {
        endpoint: String,
    },
    /// Vanilla: the prediction is the only candidate.
    Prediction,
    None,
}

/// Wall-clock data; the only non-deterministic part of a record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub key: RecordKey,
    pub question: String,
    pub endpoint: String,
    pub candidates: Option<CandidateSet>,
    pub candidate_source: CandidateSource,
    /// The prediction was missing from a generated set and was appended.
    #[serde(default)]
    pub prediction_appended: bool,
    pub truth_set: Vec<String>,
    pub reference_answer: Option<String>,
    pub prediction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pstar: Option<Vec<(String, f64)>>,
    pub ambiguous: bool,
    /// Correctness of the prediction (or the vanilla answer).
    pub correct: Option<bool>,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Provenance tags of credal members that succeeded, in member order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub member_tags: Vec<String>,
    pub elicitations: Vec<ElicitationResult>,
    pub scores: Option<Scores>,
    pub decisions: Vec<DecisionOutcome>,
    /// Correctness of each decision's chosen answer.
    pub decision_correct: Vec<bool>,
    pub usage: Usage,
    pub timing: Timing,
}

impl RunRecord {
    /// Credal set rebuilt from the stored member payloads.
    pub fn credal_set(&self) -> Option<CredalSet> {
        let pmfs: Vec<_> = self
            .elicitations
            .iter()
            .filter(|r| r.succeeded())
            .filter_map(|r| r.payload.as_ref()?.pmf().cloned())
            .collect();
        CredalSet::new(pmfs, self.member_tags.clone()).ok()
    }

    /// Recomputes scores and decisions from the stored payloads.
    pub fn rescore(&self) -> Result<Option<(Scores, Vec<DecisionOutcome>)>, ipelicit_core::Error> {
        let Some(stored) = &self.scores else {
            return Ok(None);
        };
        let credal;
        let report = if self.key.method == PromptKind::Credal {
            credal = self.credal_set().ok_or(ipelicit_core::Error::EmptyCredal)?;
            Report::Credal(&credal)
        } else {
            let p = self
                .elicitations
                .first()
                .and_then(|r| r.payload.as_ref())
                .ok_or(ipelicit_core::Error::EmptyInput)?;
            Report::Single(p)
        };
        let index = if self.key.method == PromptKind::Vanilla {
            None
        } else {
            stored.answer_index
        };
        let scored = score_report(self.key.method, &report, index)?;
        Ok(Some((scored.scores, scored.decisions)))
    }

    /// Canonical JSON with the timing subrecord removed.
    pub fn without_timing(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("record serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("timing");
        }
        v
    }
}

/// One cached candidate generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateCacheEntry {
    pub question_id: String,
    pub generator: String,
    pub candidates: CandidateSet,
    pub elicitation: ElicitationResult,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub written: usize,
    pub skipped: usize,
    pub failed: usize,
    /// Work items elicited in this run (excluding candidate generation).
    pub elicitations: usize,
    pub candidate_generations: usize,
    /// Endpoint requests issued, including retries.
    pub requests: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Refuses to touch an existing records file.
    Fresh,
    /// Skips keys already present.
    Resume,
}

/// Counting semaphore bounding in-flight requests across all endpoints.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().expect("gate lock");
            while *free == 0 {
                free = self.cv.wait(free).expect("gate lock");
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().expect("gate lock") += 1;
        self.cv.notify_one();
        out
    }
}

struct Throttled {
    inner: Box<dyn ChatEndpoint>,
    gate: Arc<Gate>,
    requests: Arc<AtomicU64>,
}

impl ChatEndpoint for Throttled {
    fn id(&self) -> &str {
        self.inner.id()
    }
    fn model(&self) -> &str {
        self.inner.model()
    }
    fn default_temperature(&self) -> Option<f64> {
        self.inner.default_temperature()
    }
    fn default_seed(&self) -> Option<u64> {
        self.inner.default_seed()
    }
    fn supports_seed(&self) -> bool {
        self.inner.supports_seed()
    }
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        self.gate.run(|| self.inner.complete(request))
    }
}

/// HTTP client, or the in-process mock for `mock://` base URLs.
pub fn build_endpoint(
    cfg: &ModelEndpoint,
    script: Option<&Arc<MockScript>>,
) -> Result<Box<dyn ChatEndpoint>, CliError> {
    if cfg.base_url.starts_with("mock://") {
        let script = script
            .cloned()
            .unwrap_or_else(|| Arc::new(MockScript::agent(Default::default())));
        Ok(Box::new(MockEndpoint::new(cfg, script)))
    } else {
        Ok(Box::new(HttpEndpoint::new(cfg.clone()).map_err(CliError::Elicit)?))
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn write_header(file: &mut File, schema: &str) -> Result<(), CliError> {
    writeln!(file, "{}", serde_json::to_string(&FileHeader::new(schema))?)?;
    Ok(())
}

/// Reads a JSONL file with a header. A final line without a trailing newline
/// that fails to parse is an interrupted write and is truncated away.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path, schema: &str, repair: bool) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut offset = 0usize;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let complete = line.ends_with('\n');
        let body = line.trim_end();
        if i == 0 {
            let header: FileHeader = serde_json::from_str(body)
                .map_err(|e| CliError::Corrupt(format!("{}: bad header: {e}", path.display())))?;
            if header.schema != schema || header.version != RECORD_VERSION {
                return Err(CliError::Corrupt(format!(
                    "{}: expected {schema} v{RECORD_VERSION}, found {} v{}",
                    path.display(),
                    header.schema,
                    header.version
                )));
            }
        } else if !body.is_empty() {
            match serde_json::from_str(body) {
                Ok(v) => out.push(v),
                Err(_) if !complete && repair => {
                    log::warn!("{}: dropping truncated final line", path.display());
                    OpenOptions::new().write(true).open(path)?.set_len(offset as u64)?;
                    break;
                }
                Err(e) => {
                    return Err(CliError::Corrupt(format!("{}:{}: {e}", path.display(), i + 1)));
                }
            }
        }
        offset += line.len();
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    read_jsonl(path, RECORD_SCHEMA, false)
}

pub fn read_candidate_cache(path: &Path) -> Result<Vec<CandidateCacheEntry>, CliError> {
    read_jsonl(path, CANDIDATE_SCHEMA, false)
}

/// Opens `path` for appending, writing the header when the file is new.
fn open_append(path: &Path, schema: &str) -> Result<File, CliError> {
    let exists = path.exists() && std::fs::metadata(path)?.len() > 0;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if !exists {
        write_header(&mut f, schema)?;
    }
    Ok(f)
}

fn append_lines<T: Serialize>(file: &mut File, items: &[T]) -> Result<(), CliError> {
    let mut buf = String::new();
    for it in items {
        buf.push_str(&serde_json::to_string(it)?);
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    file.flush()?;
    Ok(())
}

#[derive(Clone)]
struct WorkItem {
    question: usize,
    method: PromptKind,
    seed: u64,
}

enum Outcome {
    Record(Box<RunRecord>),
    /// Transport failure: nothing is written so a later resume retries it.
    Unreachable(String),
}

struct Ctx<'a> {
    cfg: &'a CampaignConfig,
    endpoints: Vec<Throttled>,
    questions: &'a [QaRecord],
    candidates: &'a BTreeMap<String, CandidateSet>,
    generator: String,
}

fn transport_message(e: &ElicitError) -> Option<String> {
    match e {
        ElicitError::Transport(t) => Some(t.to_string()),
        ElicitError::MemberQuorumNotMet { members, .. } => members.iter().find_map(|m| match &m.result {
            Err(ElicitError::Transport(t)) => Some(format!("{}: {t}", m.tag)),
            _ => None,
        }),
        _ => None,
    }
}

fn opts_for(cfg: &CampaignConfig, seed: Option<u64>) -> ElicitOptions {
    ElicitOptions {
        max_attempts: cfg.max_attempts,
        seed,
        temperature: None,
        enforce_upper: cfg.enforce_upper,
        salvage_renormalize: cfg.salvage_renormalize,
    }
}

fn run_item(ctx: &Ctx<'_>, item: &WorkItem) -> Outcome {
    let started = now_ms();
    let clock = Instant::now();
    let q = &ctx.questions[item.question];
    let cfg = ctx.cfg;
    let primary = &ctx.endpoints[0];

    // candidate set for this method
    let (candidates, source, appended) = if item.method == PromptKind::Vanilla {
        match &q.prediction {
            Some(p) => (
                CandidateSet::new([p.as_str()], false).ok(),
                CandidateSource::Prediction,
                false,
            ),
            None => (None, CandidateSource::None, false),
        }
    } else if let Some(c) = &q.candidates {
        (Some(c.clone()), CandidateSource::Dataset, false)
    } else {
        match ctx.candidates.get(&q.id) {
            Some(c) => {
                let source = CandidateSource::Generated {
                    endpoint: ctx.generator.clone(),
                };
                match &q.prediction {
                    Some(p) if !c.contains(p) => {
                        let mut all = c.answers().to_vec();
                        all.push(p.clone());
                        (CandidateSet::new(all, c.is_open_ended()).ok(), source, true)
                    }
                    _ => (Some(c.clone()), source, false),
                }
            }
            None => (None, CandidateSource::None, false),
        }
    };

    let mut record = RunRecord {
        key: RecordKey {
            question_id: q.id.clone(),
            method: item.method,
            seed: item.seed,
        },
        question: q.question.clone(),
        endpoint: primary.id().to_string(),
        candidates: candidates.clone(),
        candidate_source: source,
        prediction_appended: appended,
        truth_set: q.truth_set.clone(),
        reference_answer: q.reference_answer.clone(),
        prediction: q.prediction.clone(),
        pstar: q.pstar.clone(),
        ambiguous: q.is_ambiguous(),
        correct: q.prediction.as_deref().map(|p| q.is_correct(p)),
        status: RecordStatus::Failed,
        error: None,
        member_tags: Vec::new(),
        elicitations: Vec::new(),
        scores: None,
        decisions: Vec::new(),
        decision_correct: Vec::new(),
        usage: Usage::default(),
        timing: Timing::default(),
    };

    let finish = |mut r: RunRecord| {
        r.timing = Timing {
            started_unix_ms: started,
            elapsed_ms: clock.elapsed().as_millis() as u64,
        };
        Outcome::Record(Box::new(r))
    };

    if item.method != PromptKind::Vanilla && candidates.is_none() {
        record.error = Some("no candidate set (candidate generation failed)".into());
        return finish(record);
    }

    let answer_index = match cfg.score_level {
        ScoreLevel::Set => None,
        ScoreLevel::Auto | ScoreLevel::Answer => q
            .prediction
            .as_deref()
            .zip(candidates.as_ref())
            .and_then(|(p, c)| c.index_of(p)),
    };

    let elicited: Result<Option<CredalSet>, ElicitError> = if item.method == PromptKind::Credal {
        let cands = candidates.as_ref().expect("checked above");
        let members: Vec<EnsembleMember<'_>> = if ctx.endpoints.len() > 1 {
            ctx.endpoints
                .iter()
                .map(|e| EnsembleMember {
                    endpoint: e,
                    seed: Some(item.seed),
                })
                .collect()
        } else {
            (0..cfg.credal_members as u64)
                .map(|j| EnsembleMember {
                    endpoint: primary,
                    seed: Some(item.seed.wrapping_mul(1000).wrapping_add(j)),
                })
                .collect()
        };
        match elicit_credal_ensemble(&members, &q.question, cands, &opts_for(cfg, None), cfg.credal_quorum) {
            Ok(out) => {
                for m in &out.members {
                    record.usage += ipelicit_elicit::run::member_usage(&m.result);
                }
                record.elicitations = out.members.into_iter().filter_map(|m| m.result.ok()).collect();
                record.member_tags = out.credal.member_tags().to_vec();
                Ok(Some(out.credal))
            }
            Err(ElicitError::MemberQuorumNotMet {
                succeeded,
                required,
                members,
            }) => {
                if let Some(t) = members.iter().find_map(|m| match &m.result {
                    Err(ElicitError::Transport(t)) => Some(format!("{}: {t}", m.tag)),
                    _ => None,
                }) {
                    return Outcome::Unreachable(t);
                }
                for m in members {
                    record.usage += ipelicit_elicit::run::member_usage(&m.result);
                    match m.result {
                        Ok(r) => record.elicitations.push(r),
                        Err(ElicitError::RetriesExhausted(r)) => record.elicitations.push(*r),
                        Err(_) => {}
                    }
                }
                Err(ElicitError::InvalidConfig(format!(
                    "only {succeeded} of {required} required credal members succeeded"
                )))
            }
            Err(e) => Err(e),
        }
    } else {
        match elicit_with_retry(
            primary,
            item.method,
            &q.question,
            candidates.as_ref(),
            &opts_for(cfg, Some(item.seed)),
        ) {
            Ok(r) => {
                record.usage += r.usage;
                record.elicitations.push(r);
                Ok(None)
            }
            Err(ElicitError::RetriesExhausted(r)) => {
                record.usage += r.usage;
                let attempts = r.attempts;
                record.elicitations.push(*r);
                Err(ElicitError::InvalidConfig(format!(
                    "no coherent report after {attempts} attempts"
                )))
            }
            Err(e) => Err(e),
        }
    };

    let credal = match elicited {
        Ok(c) => c,
        Err(e) => {
            if let Some(t) = transport_message(&e) {
                return Outcome::Unreachable(t);
            }
            record.error = Some(match e {
                ElicitError::InvalidConfig(m) => m,
                other => other.to_string(),
            });
            return finish(record);
        }
    };

    let report = match (&credal, record.elicitations.first().and_then(|r| r.payload.as_ref())) {
        (Some(c), _) => Report::Credal(c),
        (None, Some(p)) => Report::Single(p),
        (None, None) => {
            record.error = Some("elicitation returned no payload".into());
            return finish(record);
        }
    };
    let index = if item.method == PromptKind::Vanilla {
        None
    } else {
        answer_index
    };
    match score_report(item.method, &report, index) {
        Ok(scored) => {
            record.decision_correct = scored
                .decisions
                .iter()
                .map(|d| q.is_correct(&d.chosen_answer))
                .collect();
            record.decisions = scored.decisions;
            record.scores = Some(scored.scores);
            record.status = RecordStatus::Ok;
            if item.method == PromptKind::Vanilla && q.prediction.is_none() {
                if let Some(Payload::Confidence { answer: Some(a), .. }) = record.elicitations[0].payload.as_ref() {
                    record.correct = Some(q.is_correct(a));
                }
            }
        }
        Err(e) => record.error = Some(format!("scoring failed: {e}")),
    }
    finish(record)
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, U: Send>(threads: usize, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, U: Send>(_threads: usize, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Generates (or loads from cache) candidate sets for open-ended questions.
fn ensure_candidates(
    cfg: &CampaignConfig,
    generator: &Throttled,
    questions: &[QaRecord],
    needed: &[usize],
    report: &mut CampaignReport,
) -> Result<BTreeMap<String, CandidateSet>, CliError> {
    let path = cfg.candidates_path();
    let mut cache: BTreeMap<String, CandidateSet> = BTreeMap::new();
    if path.exists() {
        for e in read_jsonl::<CandidateCacheEntry>(&path, CANDIDATE_SCHEMA, true)? {
            cache.insert(e.question_id, e.candidates);
        }
    }
    let missing: Vec<usize> = needed
        .iter()
        .copied()
        .filter(|&i| !cache.contains_key(&questions[i].id))
        .collect();
    if missing.is_empty() {
        return Ok(cache);
    }
    let opts = opts_for(cfg, Some(cfg.seeds[0]));
    let results = par_map(cfg.concurrency, &missing, |&i| {
        generate_candidates(generator, &questions[i].question, &opts)
    });
    let mut file = open_append(&path, CANDIDATE_SCHEMA)?;
    let mut entries = Vec::new();
    let mut unreachable = None;
    for (&i, r) in missing.iter().zip(results) {
        report.candidate_generations += 1;
        match r {
            Ok((set, elicitation)) => entries.push(CandidateCacheEntry {
                question_id: questions[i].id.clone(),
                generator: generator.id().to_string(),
                candidates: set,
                elicitation,
            }),
            Err(ElicitError::Transport(t)) => unreachable = Some(t.to_string()),
            Err(e) => log::warn!("candidate generation failed for {}: {e}", questions[i].id),
        }
    }
    append_lines(&mut file, &entries)?;
    if let Some(t) = unreachable {
        return Err(CliError::EndpointUnreachable(t));
    }
    for e in entries {
        cache.insert(e.question_id, e.candidates);
    }
    Ok(cache)
}

/// Runs (or resumes) a campaign and returns what was done.
///
/// Fails with [`CliError::PartialCampaign`] when some records were written
/// with `status = failed`, and with [`CliError::EndpointUnreachable`] when a
/// transport error stopped the run (completed chunks stay on disk).
pub fn run_campaign(cfg: &CampaignConfig, mode: RunMode) -> Result<CampaignReport, CliError> {
    cfg.validate()?;
    let questions = load_dataset(&cfg.dataset)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let records_path = cfg.records_path();

    let existing: HashSet<RecordKey> = if records_path.exists() {
        if mode == RunMode::Fresh {
            return Err(CliError::OutputExists(records_path));
        }
        read_jsonl::<RunRecord>(&records_path, RECORD_SCHEMA, true)?
            .into_iter()
            .map(|r| r.key)
            .collect()
    } else {
        HashSet::new()
    };

    let script = match &cfg.mock_script {
        Some(p) => Some(Arc::new(MockScript::load(p)?)),
        None => None,
    };
    let gate = Arc::new(Gate::new(cfg.concurrency));
    let requests = Arc::new(AtomicU64::new(0));
    let throttle = |e: &ModelEndpoint| -> Result<Throttled, CliError> {
        Ok(Throttled {
            inner: build_endpoint(e, script.as_ref())?,
            gate: Arc::clone(&gate),
            requests: Arc::clone(&requests),
        })
    };
    let endpoints = cfg.endpoints.iter().map(throttle).collect::<Result<Vec<_>, _>>()?;
    let generator = throttle(cfg.generator_endpoint())?;

    let mut report = CampaignReport::default();
    let mut work = Vec::new();
    for (qi, q) in questions.iter().enumerate() {
        for &method in &cfg.methods {
            for &seed in &cfg.seeds {
                let key = RecordKey {
                    question_id: q.id.clone(),
                    method,
                    seed,
                };
                if existing.contains(&key) {
                    report.skipped += 1;
                } else {
                    work.push(WorkItem {
                        question: qi,
                        method,
                        seed,
                    });
                }
            }
        }
    }

    let mut needed: Vec<usize> = work
        .iter()
        .filter(|w| w.method != PromptKind::Vanilla && questions[w.question].candidates.is_none())
        .map(|w| w.question)
        .collect();
    needed.dedup();
    let candidates = ensure_candidates(cfg, &generator, &questions, &needed, &mut report)?;

    let ctx = Ctx {
        cfg,
        endpoints,
        questions: &questions,
        candidates: &candidates,
        generator: generator.id().to_string(),
    };
    let mut file = open_append(&records_path, RECORD_SCHEMA)?;
    let chunk = cfg.concurrency * 4;
    for items in work.chunks(chunk) {
        let outcomes = par_map(cfg.concurrency, items, |it| run_item(&ctx, it));
        report.elicitations += items.len();
        let mut records = Vec::new();
        let mut unreachable = None;
        for o in outcomes {
            match o {
                Outcome::Record(r) => {
                    if r.status == RecordStatus::Failed {
                        report.failed += 1;
                    }
                    records.push(*r);
                }
                Outcome::Unreachable(m) => unreachable = Some(m),
            }
        }
        report.written += records.len();
        append_lines(&mut file, &records)?;
        if let Some(m) = unreachable {
            return Err(CliError::EndpointUnreachable(m));
        }
    }
    report.requests = requests.load(Ordering::Relaxed);
    if report.failed > 0 {
        return Err(CliError::PartialCampaign(report));
    }
    Ok(report)
}

/// Largest deviation between stored and recomputed scores over `records`.
pub fn rescoring_deviation(records: &[RunRecord]) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for r in records {
        if let (Some(stored), Some((fresh, decisions))) = (&r.scores, r.rescore()?) {
            worst = worst.max(stored.max_abs_diff(&fresh));
            if decisions != r.decisions {
                worst = f64::INFINITY;
            }
        }
    }
    Ok(worst)
}
