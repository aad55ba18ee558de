//! CSV exports and record-level evaluation.

use std::io::Write;

use ipelicit_core::eval::{
    auroc, concordance_index, cost_report, CostLedger, EndpointPrice, ScoredExample, UsageEntry,
};
use serde::Serialize;

use crate::campaign::{RecordStatus, RunRecord};
use crate::study::StudyRow;
use crate::CliError;

/// Which score column of a record to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreField {
    FirstOrder,
    SecondOrder,
    Combined,
}

impl std::str::FromStr for ScoreField {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "first_order" => Ok(ScoreField::FirstOrder),
            "second_order" => Ok(ScoreField::SecondOrder),
            "combined" => Ok(ScoreField::Combined),
            _ => Err(CliError::Config(format!("unknown score field `{s}`"))),
        }
    }
}

fn score_of(r: &RunRecord, field: ScoreField) -> Option<f64> {
    let s = r.scores.as_ref()?;
    match field {
        ScoreField::FirstOrder => s.first_order,
        ScoreField::SecondOrder => s.second_order,
        ScoreField::Combined => s.combined,
    }
}

/// What the score should predict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// The question has more than one correct answer.
    Ambiguous,
    /// The prediction is wrong.
    Misaligned,
}

impl std::str::FromStr for Target {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "ambiguous" => Ok(Target::Ambiguous),
            "misaligned" => Ok(Target::Misaligned),
            _ => Err(CliError::Config(format!("unknown target `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AurocRow {
    pub method: String,
    pub score: String,
    pub target: String,
    pub auroc: Option<f64>,
    pub n: usize,
    pub note: String,
}

/// AUROC per method; higher scores are read as "more uncertain", so the
/// positive class is the ambiguous or misaligned one.
pub fn auroc_by_method(records: &[RunRecord], field: ScoreField, target: Target) -> Vec<AurocRow> {
    let mut methods: Vec<String> = records.iter().map(|r| r.key.method.to_string()).collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|method| {
            let examples: Vec<ScoredExample> = records
                .iter()
                .filter(|r| r.key.method.to_string() == method && r.status == RecordStatus::Ok)
                .filter_map(|r| {
                    let label = match target {
                        Target::Ambiguous => r.ambiguous,
                        Target::Misaligned => !r.correct?,
                    };
                    Some(ScoredExample::new(score_of(r, field)?, label))
                })
                .collect();
            let (auroc, note) = match auroc(&examples) {
                Ok(a) => (Some(a), String::new()),
                Err(e) => (None, e.to_string()),
            };
            AurocRow {
                method,
                score: format!("{field:?}"),
                target: format!("{target:?}"),
                auroc,
                n: examples.len(),
                note,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcordanceRow {
    pub method: String,
    pub score: String,
    pub concordance: Option<f64>,
    pub n: usize,
    pub note: String,
}

/// Concordance of a score with a reference score from the `pstar` entropy
/// of each record (records without `pstar` are skipped).
pub fn concordance_by_method(records: &[RunRecord], field: ScoreField) -> Vec<ConcordanceRow> {
    let mut methods: Vec<String> = records.iter().map(|r| r.key.method.to_string()).collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|method| {
            let pairs: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.key.method.to_string() == method && r.status == RecordStatus::Ok)
                .filter_map(|r| {
                    let reference: f64 = r
                        .pstar
                        .as_ref()?
                        .iter()
                        .filter(|(_, p)| *p > 0.0)
                        .map(|(_, p)| -p * p.ln())
                        .sum();
                    Some((score_of(r, field)?, reference))
                })
                .collect();
            let (concordance, note) = match concordance_index(&pairs) {
                Ok(c) => (Some(c), String::new()),
                Err(e) => (None, e.to_string()),
            };
            ConcordanceRow {
                method,
                score: format!("{field:?}"),
                concordance,
                n: pairs.len(),
                note,
            }
        })
        .collect()
}

/// Usage entries of every record, one per elicitation.
pub fn usage_entries(records: &[RunRecord]) -> Vec<UsageEntry> {
    records
        .iter()
        .flat_map(|r| r.elicitations.iter().map(move |e| e.usage_entry(r.key.method.as_str())))
        .collect()
}

pub fn ledger_for(records: &[RunRecord], prices: &[EndpointPrice]) -> Result<CostLedger, CliError> {
    Ok(cost_report(&usage_entries(records), prices)?)
}

#[derive(Serialize)]
struct CostRow<'a> {
    scope: &'a str,
    method: &'a str,
    endpoint: &'a str,
    input_tokens: u64,
    output_tokens: u64,
    currency: f64,
}

pub fn write_cost_csv(ledger: &CostLedger, out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for (endpoint, line) in &ledger.per_endpoint {
        w.serialize(CostRow {
            scope: "endpoint",
            method: "",
            endpoint,
            input_tokens: line.input_tokens,
            output_tokens: line.output_tokens,
            currency: line.currency,
        })?;
    }
    for ((method, endpoint), line) in &ledger.per_method {
        w.serialize(CostRow {
            scope: "method",
            method,
            endpoint,
            input_tokens: line.input_tokens,
            output_tokens: line.output_tokens,
            currency: line.currency,
        })?;
    }
    let t = ledger.total();
    w.serialize(CostRow {
        scope: "total",
        method: "",
        endpoint: "",
        input_tokens: t.input_tokens,
        output_tokens: t.output_tokens,
        currency: t.currency,
    })?;
    w.flush()?;
    Ok(())
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_study_csv(rows: &[StudyRow], out: impl Write) -> Result<(), CliError> {
    write_csv(rows, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ipelicit_core::eval::CostLine;

    #[test]
    fn cost_csv_has_scopes_and_total() {
        let mut ledger = CostLedger::default();
        let line = CostLine {
            input_tokens: 10,
            output_tokens: 2,
            currency: 0.5,
        };
        ledger.per_endpoint.insert("e".into(), line);
        ledger.per_method.insert(("definetti".into(), "e".into()), line);
        let mut buf = Vec::new();
        write_cost_csv(&ledger, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "scope,method,endpoint,input_tokens,output_tokens,currency");
        assert_eq!(lines[1], "endpoint,,e,10,2,0.5");
        assert_eq!(lines[2], "method,definetti,e,10,2,0.5");
        assert_eq!(lines[3], "total,,,10,2,0.5");
    }

    #[test]
    fn field_names_parse() {
        assert_eq!("combined".parse::<ScoreField>().unwrap(), ScoreField::Combined);
        assert!("x".parse::<Target>().is_err());
    }
}
