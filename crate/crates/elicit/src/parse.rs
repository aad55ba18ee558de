//! Strict parsing of the machine-readable reply block.
//!
//! Rows look like `<index>|<field>=<value>[|<field>=<value>...]`, inside the
//! last fenced block of the reply. Possibility replies add a `NOTA|pos=` row,
//! vanilla replies are a single `CONF|conf=` row. Candidate lists are plain
//! numbered lines, fenced or not.

use std::collections::BTreeMap;

use ipelicit_core::coherence::{verify_axioms, verify_interval_bounds, verify_possibility, VerdictReport};
use ipelicit_core::{build_pmf, CandidateSet, PossibilityAssignment, PrecisePmf, ProbabilityIntervalSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::PromptKind;

#[derive(Clone, Debug, PartialEq, Error, Serialize, Deserialize)]
pub enum ParseError {
    #[error("no fenced output block found in the reply")]
    NoStructuredBlock,
    #[error("expected {expected} answer rows, found {got}")]
    CandidateCountMismatch { expected: usize, got: usize },
    #[error("`{value}` for {field} is not a decimal number")]
    NumberParse { field: String, value: String },
    #[error("{field}={value} is outside [{min}, {max}]")]
    ValueOutOfRange {
        field: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("cannot read line `{0}`")]
    MalformedLine(String),
    #[error("row {0} appears more than once")]
    DuplicateRow(String),
    #[error("the list of answers is empty")]
    EmptyList,
}

/// The numbers read from a reply, before any verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RawReport {
    Prices { prices: Vec<f64> },
    Intervals { lower: Vec<f64>, upper: Vec<f64> },
    Probs { probs: Vec<f64> },
    Possibility { scores: Vec<f64>, none_of_above: f64 },
    Candidates { answers: Vec<String> },
    Confidence { confidence: f64, answer: Option<String> },
}

/// A verified report, typed per prompt kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Pmf {
        pmf: PrecisePmf,
    },
    Intervals {
        intervals: ProbabilityIntervalSet,
    },
    Possibility {
        assignment: PossibilityAssignment,
    },
    Candidates {
        candidates: CandidateSet,
    },
    Confidence {
        confidence: f64,
        uncertainty: f64,
        answer: Option<String>,
    },
}

impl Payload {
    pub fn pmf(&self) -> Option<&PrecisePmf> {
        match self {
            Payload::Pmf { pmf } => Some(pmf),
            _ => None,
        }
    }

    pub fn intervals(&self) -> Option<&ProbabilityIntervalSet> {
        match self {
            Payload::Intervals { intervals } => Some(intervals),
            _ => None,
        }
    }

    pub fn possibility(&self) -> Option<&PossibilityAssignment> {
        match self {
            Payload::Possibility { assignment } => Some(assignment),
            _ => None,
        }
    }

    pub fn candidates(&self) -> Option<&CandidateSet> {
        match self {
            Payload::Candidates { candidates } => Some(candidates),
            _ => None,
        }
    }

    /// `(confidence, uncertainty)` for a vanilla report.
    pub fn confidence(&self) -> Option<(f64, f64)> {
        match self {
            Payload::Confidence {
                confidence,
                uncertainty,
                ..
            } => Some((*confidence, *uncertainty)),
            _ => None,
        }
    }
}

impl RawReport {
    /// Runs the kind's verifier. Candidate lists and confidences always pass
    /// once parsed.
    pub fn verify(&self, enforce_upper: bool) -> VerdictReport {
        match self {
            RawReport::Prices { prices } | RawReport::Probs { probs: prices } => {
                verify_axioms(prices).unwrap_or_else(|_| VerdictReport::pass())
            }
            RawReport::Intervals { lower, upper } => verify_interval_bounds(lower, upper, enforce_upper),
            RawReport::Possibility { scores, none_of_above } => verify_possibility(scores, *none_of_above),
            RawReport::Candidates { .. } | RawReport::Confidence { .. } => VerdictReport::pass(),
        }
    }

    /// Builds the typed payload. Call only after [`RawReport::verify`] passed,
    /// or with `renormalize` for the salvage path on betting/credal reports.
    pub fn into_payload(
        self,
        candidates: Option<&CandidateSet>,
        renormalize: bool,
    ) -> Result<Payload, ipelicit_core::Error> {
        let need = || candidates.cloned().ok_or(ipelicit_core::Error::EmptyCandidateSet);
        Ok(match self {
            RawReport::Prices { prices: v } | RawReport::Probs { probs: v } => Payload::Pmf {
                pmf: build_pmf(&need()?, &v, renormalize)?,
            },
            RawReport::Intervals { lower, upper } => Payload::Intervals {
                intervals: ProbabilityIntervalSet::new(need()?, lower, upper)?,
            },
            RawReport::Possibility { scores, none_of_above } => Payload::Possibility {
                assignment: PossibilityAssignment::new(need()?, scores, none_of_above)?,
            },
            RawReport::Candidates { answers } => Payload::Candidates {
                candidates: CandidateSet::new(answers, true)?,
            },
            RawReport::Confidence { confidence, answer } => Payload::Confidence {
                confidence,
                uncertainty: 1.0 - confidence,
                answer,
            },
        })
    }
}

/// Parses a reply for `kind`. `candidates` fixes the expected row count for
/// the per-answer kinds and is ignored otherwise.
pub fn parse_structured_report(
    kind: PromptKind,
    raw: &str,
    candidates: Option<&CandidateSet>,
) -> Result<RawReport, ParseError> {
    match kind {
        PromptKind::Candidates => parse_numbered_list(raw).map(|answers| RawReport::Candidates { answers }),
        PromptKind::Vanilla => parse_vanilla(raw),
        _ => {
            let n = candidates.map_or(0, CandidateSet::len);
            parse_rows(kind, raw, n)
        }
    }
}

/// Lines of the last fenced block; an unterminated final fence runs to the end.
fn fenced_block(raw: &str) -> Option<Vec<&str>> {
    let mut last = None;
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(block) => last = Some(block),
                None => current = Some(Vec::new()),
            }
        } else if let Some(block) = current.as_mut() {
            block.push(line);
        }
    }
    match current {
        Some(block) if !block.iter().all(|l| l.trim().is_empty()) => Some(block),
        _ => last,
    }
}

fn is_decimal(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    match frac {
        None => !int.is_empty() && digits(int),
        Some(f) => (!int.is_empty() || !f.is_empty()) && digits(int) && digits(f),
    }
}

fn parse_number(field: &str, value: &str) -> Result<f64, ParseError> {
    let v = value.trim();
    let v = if field == "price" {
        v.strip_prefix('$').unwrap_or(v)
    } else {
        v
    };
    if !is_decimal(v) {
        return Err(ParseError::NumberParse {
            field: field.to_string(),
            value: value.trim().to_string(),
        });
    }
    v.parse::<f64>().map_err(|_| ParseError::NumberParse {
        field: field.to_string(),
        value: value.trim().to_string(),
    })
}

type Row<'a> = (&'a str, Vec<(&'a str, &'a str)>);

/// Splits `key|f=v|g=w` into the key and its field pairs.
fn split_row(line: &str) -> Result<Row<'_>, ParseError> {
    let mut parts = line.split('|');
    let key = parts.next().unwrap_or("").trim();
    let mut fields = Vec::new();
    for p in parts {
        let (f, v) = p
            .split_once('=')
            .ok_or_else(|| ParseError::MalformedLine(line.to_string()))?;
        fields.push((f.trim(), v));
    }
    if key.is_empty() || fields.is_empty() {
        return Err(ParseError::MalformedLine(line.to_string()));
    }
    Ok((key, fields))
}

fn parse_rows(kind: PromptKind, raw: &str, n: usize) -> Result<RawReport, ParseError> {
    let block = fenced_block(raw).ok_or(ParseError::NoStructuredBlock)?;
    let wanted = kind.row_fields();
    let mut rows: BTreeMap<usize, BTreeMap<&str, f64>> = BTreeMap::new();
    let mut nota: Option<f64> = None;
    let mut extra_rows = 0usize;

    for line in block.iter().map(|l| l.trim()).filter(|l| !l.is_empty()) {
        let (key, fields) = split_row(line)?;
        if kind == PromptKind::Possibility && key.eq_ignore_ascii_case("NOTA") {
            if nota.is_some() {
                return Err(ParseError::DuplicateRow("NOTA".into()));
            }
            let [(f, v)] = fields[..] else {
                return Err(ParseError::MalformedLine(line.to_string()));
            };
            if f != "pos" {
                return Err(ParseError::MalformedLine(line.to_string()));
            }
            nota = Some(parse_number(f, v)?);
            continue;
        }
        let index: usize = key.parse().map_err(|_| ParseError::MalformedLine(line.to_string()))?;
        if index == 0 || index > n {
            extra_rows += 1;
            continue;
        }
        let row = rows.entry(index).or_default();
        for (f, v) in fields {
            if !wanted.contains(&f) {
                return Err(ParseError::MalformedLine(line.to_string()));
            }
            if row.insert(f, parse_number(f, v)?).is_some() {
                return Err(ParseError::DuplicateRow(format!("{index}|{f}")));
            }
        }
    }

    let complete = rows.values().filter(|r| r.len() == wanted.len()).count();
    if complete != n || extra_rows > 0 {
        return Err(ParseError::CandidateCountMismatch {
            expected: n,
            got: complete + extra_rows,
        });
    }
    let column = |f: &str| -> Vec<f64> { rows.values().map(|r| r[f]).collect() };
    Ok(match kind {
        PromptKind::Definetti => RawReport::Prices {
            prices: column("price"),
        },
        PromptKind::Credal => RawReport::Probs { probs: column("prob") },
        PromptKind::Probint => RawReport::Intervals {
            lower: column("lower"),
            upper: column("upper"),
        },
        PromptKind::Possibility => RawReport::Possibility {
            scores: column("pos"),
            none_of_above: nota.ok_or(ParseError::CandidateCountMismatch {
                expected: n + 1,
                got: n,
            })?,
        },
        PromptKind::Candidates | PromptKind::Vanilla => unreachable!("handled by the caller"),
    })
}

fn parse_vanilla(raw: &str) -> Result<RawReport, ParseError> {
    let block = fenced_block(raw).ok_or(ParseError::NoStructuredBlock)?;
    let mut conf = None;
    for line in block.iter().map(|l| l.trim()).filter(|l| !l.is_empty()) {
        let (key, fields) = split_row(line)?;
        match (key, &fields[..]) {
            (k, [("conf", v)]) if k.eq_ignore_ascii_case("CONF") => {
                if conf.is_some() {
                    return Err(ParseError::DuplicateRow("CONF".into()));
                }
                conf = Some(parse_number("conf", v)?);
            }
            _ => return Err(ParseError::MalformedLine(line.to_string())),
        }
    }
    let confidence = conf.ok_or(ParseError::NoStructuredBlock)?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(ParseError::ValueOutOfRange {
            field: "conf".into(),
            value: confidence,
            min: 0.0,
            max: 1.0,
        });
    }
    let answer = raw
        .lines()
        .find_map(|l| l.trim().strip_prefix("Answer:"))
        .map(|a| a.trim().to_string())
        .filter(|a| !a.is_empty());
    Ok(RawReport::Confidence { confidence, answer })
}

/// Numbered lines `1. x` or `1) x`, in order, with duplicates removed
/// case-insensitively.
pub fn parse_numbered_list(raw: &str) -> Result<Vec<String>, ParseError> {
    let mut seen = std::collections::HashSet::new();
    let mut found_any = false;
    let mut out = Vec::new();
    for line in raw.lines() {
        let t = line.trim();
        let digits = t.bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            continue;
        }
        let rest = &t[digits..];
        let Some(answer) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) else {
            continue;
        };
        found_any = true;
        let answer = answer.trim();
        if answer.is_empty() {
            continue;
        }
        if seen.insert(ipelicit_core::fold_answer(answer)) {
            out.push(answer.to_string());
        }
    }
    if !found_any {
        return Err(ParseError::NoStructuredBlock);
    }
    if out.is_empty() {
        return Err(ParseError::EmptyList);
    }
    Ok(out)
}
