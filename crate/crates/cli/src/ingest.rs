//! QA dataset ingestion from JSONL or CSV.
//!
//! Named fields per row: `id` (optional), `question`, `answers`, `reference`,
//! `options`, `answer` (mc key), `prediction` and `pstar`. In CSV, list-valued
//! cells are either a JSON array or `|`-separated text, and `pstar` is JSON.

use std::path::Path;

use ipelicit_core::synth::{generate_icl_task, ground_truth_variants, variant_candidates, NoiseSpec, DEFAULT_MAX_ENUM};
use ipelicit_core::{CandidateSet, QaRecord};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{DatasetSource, SynthDataset};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// Open-ended, possibly several gold answers (`answers: [..]`).
    MaqaLike,
    /// Open-ended; `answers` lists one alias list per interpretation.
    AmbigqaLike,
    /// Multiple choice: `options` plus an `answer` key.
    McLike,
}

impl std::str::FromStr for DatasetFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maqa_like" => Ok(DatasetFormat::MaqaLike),
            "ambigqa_like" => Ok(DatasetFormat::AmbigqaLike),
            "mc_like" => Ok(DatasetFormat::McLike),
            _ => Err(CliError::Config(format!("unknown dataset format `{s}`"))),
        }
    }
}

fn violation(line: usize, message: impl Into<String>) -> CliError {
    CliError::SchemaViolation {
        line,
        message: message.into(),
    }
}

/// Reads `path` (`.csv` by extension, JSONL otherwise).
pub fn ingest_qa_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<QaRecord>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::DatasetParse(format!("{}: {e}", path.display())))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let rows = if is_csv { csv_rows(&text)? } else { jsonl_rows(&text)? };
    let mut out = Vec::with_capacity(rows.len());
    let mut ids = std::collections::HashSet::new();
    for (line, row) in rows {
        let rec = record_from_row(&row, format, line)?;
        if !ids.insert(rec.id.clone()) {
            return Err(violation(line, format!("duplicate id `{}`", rec.id)));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(CliError::DatasetParse(format!("{}: no rows", path.display())));
    }
    Ok(out)
}

fn jsonl_rows(text: &str) -> Result<Vec<(usize, Value)>, CliError> {
    let mut rows = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(l).map_err(|e| violation(i + 1, format!("invalid JSON: {e}")))?;
        if !v.is_object() {
            return Err(violation(i + 1, "row is not an object"));
        }
        rows.push((i + 1, v));
    }
    Ok(rows)
}

fn csv_rows(text: &str) -> Result<Vec<(usize, Value)>, CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| violation(1, format!("bad header: {e}")))?
        .clone();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            violation(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut obj = serde_json::Map::new();
        for (h, cell) in headers.iter().zip(rec.iter()) {
            if cell.trim().is_empty() {
                continue;
            }
            let value = match h {
                "answers" | "options" => list_cell(cell, line)?,
                "pstar" => serde_json::from_str(cell).map_err(|e| violation(line, format!("pstar: {e}")))?,
                _ => Value::String(cell.to_string()),
            };
            obj.insert(h.to_string(), value);
        }
        rows.push((line, Value::Object(obj)));
    }
    Ok(rows)
}

fn list_cell(cell: &str, line: usize) -> Result<Value, CliError> {
    if cell.trim_start().starts_with('[') {
        serde_json::from_str(cell).map_err(|e| violation(line, format!("list cell: {e}")))
    } else {
        Ok(Value::Array(
            cell.split('|').map(|s| Value::String(s.trim().to_string())).collect(),
        ))
    }
}

fn str_field(row: &Value, key: &str, line: usize) -> Result<Option<String>, CliError> {
    match row.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.trim().to_string()).filter(|s| !s.is_empty())),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(_) => Err(violation(line, format!("`{key}` must be a string"))),
    }
}

fn str_list(v: &Value, key: &str, line: usize) -> Result<Vec<String>, CliError> {
    let arr = v
        .as_array()
        .ok_or_else(|| violation(line, format!("`{key}` must be a list")))?;
    arr.iter()
        .map(|x| match x {
            Value::String(s) => Ok(s.trim().to_string()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(violation(line, format!("`{key}` entries must be strings"))),
        })
        .collect()
}

fn parse_pstar(v: &Value, line: usize) -> Result<Vec<(String, f64)>, CliError> {
    let bad = || violation(line, "`pstar` must be an object or a list of [answer, prob] pairs");
    let pairs: Vec<(String, f64)> = match v {
        Value::Object(m) => m
            .iter()
            .map(|(k, x)| x.as_f64().map(|p| (k.clone(), p)).ok_or_else(bad))
            .collect::<Result<_, _>>()?,
        Value::Array(a) => a
            .iter()
            .map(|pair| match pair.as_array().map(Vec::as_slice) {
                Some([Value::String(k), p]) => p.as_f64().map(|p| (k.clone(), p)).ok_or_else(bad),
                _ => Err(bad()),
            })
            .collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if pairs.iter().any(|(_, p)| !(0.0..=1.0).contains(p)) {
        return Err(violation(line, "`pstar` probabilities must lie in [0, 1]"));
    }
    Ok(pairs)
}

fn mc_key(key: &str, options: &[String], line: usize) -> Result<String, CliError> {
    let k = key.trim();
    let by_letter = (k.len() == 1)
        .then(|| k.chars().next().expect("one char"))
        .filter(char::is_ascii_alphabetic)
        .map(|c| (c.to_ascii_uppercase() as u8 - b'A') as usize);
    let index = by_letter.or_else(|| k.parse::<usize>().ok());
    if let Some(opt) = index.and_then(|i| options.get(i)) {
        return Ok(opt.clone());
    }
    let folded = ipelicit_core::fold_answer(k);
    options
        .iter()
        .find(|o| ipelicit_core::fold_answer(o) == folded)
        .cloned()
        .ok_or_else(|| violation(line, format!("answer key `{k}` matches no option")))
}

fn record_from_row(row: &Value, format: DatasetFormat, line: usize) -> Result<QaRecord, CliError> {
    let question = str_field(row, "question", line)?.ok_or_else(|| violation(line, "missing `question`"))?;
    let id = str_field(row, "id", line)?.unwrap_or_else(|| format!("line{line}"));
    let prediction = str_field(row, "prediction", line)?;
    let mut reference = str_field(row, "reference", line)?;

    let (candidates, truth_set) = match format {
        DatasetFormat::MaqaLike => {
            let answers = str_list(
                row.get("answers").ok_or_else(|| violation(line, "missing `answers`"))?,
                "answers",
                line,
            )?;
            (None, answers)
        }
        DatasetFormat::AmbigqaLike => {
            let groups = row
                .get("answers")
                .and_then(Value::as_array)
                .ok_or_else(|| violation(line, "missing `answers`"))?;
            // one representative per interpretation; a bare string is its own group
            let truth = groups
                .iter()
                .map(|g| match g {
                    Value::String(s) => Ok(s.trim().to_string()),
                    Value::Array(_) => str_list(g, "answers", line)?
                        .into_iter()
                        .next()
                        .ok_or_else(|| violation(line, "empty interpretation")),
                    _ => Err(violation(line, "`answers` entries must be strings or lists")),
                })
                .collect::<Result<Vec<_>, _>>()?;
            (None, truth)
        }
        DatasetFormat::McLike => {
            let options = str_list(
                row.get("options").ok_or_else(|| violation(line, "missing `options`"))?,
                "options",
                line,
            )?;
            let key = str_field(row, "answer", line)?.ok_or_else(|| violation(line, "missing `answer` key"))?;
            let correct = mc_key(&key, &options, line)?;
            let set = CandidateSet::new(options, false).map_err(|e| violation(line, e.to_string()))?;
            if reference.is_none() {
                reference = Some(correct.clone());
            }
            (Some(set), vec![correct])
        }
    };
    if truth_set.is_empty() || truth_set.iter().any(String::is_empty) {
        return Err(violation(line, "gold answers must be non-empty"));
    }
    let mut rec = QaRecord::new(id, question, candidates, truth_set, reference, prediction)
        .map_err(|e| violation(line, e.to_string()))?;
    if let Some(p) = row.get("pstar").filter(|v| !v.is_null()) {
        rec = rec.with_pstar(parse_pstar(p, line)?);
    }
    Ok(rec)
}

/// ICL tasks as QA records: the candidate set is every case variant of the
/// clean answer, all of which are correct.
pub fn synth_dataset(spec: &SynthDataset) -> Result<Vec<QaRecord>, CliError> {
    let noise_base = spec.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    (0..spec.count)
        .map(|i| {
            let seed = spec.seed.wrapping_add(i as u64);
            let noise = NoiseSpec::new(spec.p, noise_base.wrapping_add(i as u64))?;
            let task = generate_icl_task(&spec.spec, &noise, spec.m, spec.word_length, seed)?;
            let variants = ground_truth_variants(&task.clean_query_output, spec.p, DEFAULT_MAX_ENUM)?;
            let truth: Vec<String> = variants.iter().map(|v| v.text.clone()).collect();
            let pstar = variants.iter().map(|v| (v.text.clone(), v.prob)).collect();
            let rec = QaRecord::new(
                format!("synth{i}"),
                task.to_question(),
                Some(variant_candidates(&variants)?),
                truth,
                Some(task.clean_query_output.clone()),
                None,
            )?;
            Ok(rec.with_pstar(pstar))
        })
        .collect::<Result<Vec<_>, ipelicit_core::Error>>()
        .map_err(CliError::from)
}

/// Loads the configured dataset, applying the optional seeded subsample.
pub fn load_dataset(src: &DatasetSource) -> Result<Vec<QaRecord>, CliError> {
    let mut records = match (&src.path, &src.synth, src.format) {
        (Some(p), _, Some(f)) => ingest_qa_dataset(p, f)?,
        (_, Some(s), _) => synth_dataset(s)?,
        _ => return Err(CliError::Config("dataset needs `path` + `format` or `synth`".into())),
    };
    if let Some(n) = src.sample.filter(|&n| n < records.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(src.sample_seed);
        let mut idx: Vec<usize> = (0..records.len()).collect();
        idx.shuffle(&mut rng);
        let mut keep = idx[..n].to_vec();
        keep.sort_unstable();
        let mut all: Vec<Option<QaRecord>> = records.into_iter().map(Some).collect();
        records = keep.into_iter().map(|i| all[i].take().expect("unique index")).collect();
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(name: &str, content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(content.as_bytes())
            .unwrap();
        (dir, path)
    }

    #[test]
    fn maqa_ambiguity_labels() {
        let (_d, p) = write(
            "d.jsonl",
            r#"{"id":"a","question":"Q1","answers":["x","y","z"]}
{"id":"b","question":"Q2","answers":["only"],"reference":"only","prediction":"only"}
"#,
        );
        let recs = ingest_qa_dataset(&p, DatasetFormat::MaqaLike).unwrap();
        assert!(recs[0].is_ambiguous());
        assert!(!recs[1].is_ambiguous());
        assert_eq!(recs[1].prediction.as_deref(), Some("only"));
        assert!(recs[0].candidates.is_none());
    }

    #[test]
    fn mc_rows_populate_candidates() {
        let (_d, p) = write(
            "d.jsonl",
            r#"{"question":"Pick","options":["red","green","blue"],"answer":"B"}
{"question":"Pick again","options":["red","green"],"answer":"0"}
{"question":"By text","options":["red","green"],"answer":"GREEN"}
"#,
        );
        let recs = ingest_qa_dataset(&p, DatasetFormat::McLike).unwrap();
        let c = recs[0].candidates.as_ref().unwrap();
        assert_eq!(c.len(), 3);
        assert!(!c.is_open_ended());
        assert_eq!(recs[0].truth_set, vec!["green"]);
        assert_eq!(recs[1].reference_answer.as_deref(), Some("red"));
        assert_eq!(recs[2].truth_set, vec!["green"]);
        assert_eq!(recs[0].id, "line1");
    }

    #[test]
    fn ambigqa_groups() {
        let (_d, p) = write(
            "d.jsonl",
            r#"{"question":"Who?","answers":[["England","ENG"],["Wales"]]}
{"question":"One","answers":[["Paris","City of Paris"]]}
"#,
        );
        let recs = ingest_qa_dataset(&p, DatasetFormat::AmbigqaLike).unwrap();
        assert_eq!(recs[0].truth_set, vec!["England", "Wales"]);
        assert!(recs[0].is_ambiguous());
        assert!(!recs[1].is_ambiguous());
    }

    #[test]
    fn csv_rows_and_pstar() {
        let (_d, p) = write(
            "d.csv",
            "id,question,answers,pstar\nq1,\"Who, exactly?\",England|Wales,\"{\"\"England\"\": 0.6, \"\"Wales\"\": 0.4}\"\nq2,Where,\"[\"\"Paris\"\"]\",\n",
        );
        let recs = ingest_qa_dataset(&p, DatasetFormat::MaqaLike).unwrap();
        assert_eq!(recs[0].question, "Who, exactly?");
        assert_eq!(recs[0].truth_set, vec!["England", "Wales"]);
        assert_eq!(recs[0].pstar.as_ref().unwrap().len(), 2);
        assert_eq!(recs[1].truth_set, vec!["Paris"]);
        assert!(recs[1].pstar.is_none());
    }

    #[test]
    fn schema_violations_carry_line_numbers() {
        let (_d, p) = write(
            "d.jsonl",
            "{\"question\":\"ok\",\"answers\":[\"a\"]}\n\n{\"answers\":[\"a\"]}\n",
        );
        match ingest_qa_dataset(&p, DatasetFormat::MaqaLike) {
            Err(CliError::SchemaViolation { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let (_d, p) = write("d.jsonl", "not json\n");
        assert!(matches!(
            ingest_qa_dataset(&p, DatasetFormat::MaqaLike),
            Err(CliError::SchemaViolation { line: 1, .. })
        ));
        let (_d, p) = write("d.jsonl", "{\"question\":\"q\",\"options\":[\"a\"],\"answer\":\"Z\"}\n");
        assert!(ingest_qa_dataset(&p, DatasetFormat::McLike).is_err());
        let (_d, p) = write("d.csv", "id,question,answers\nq1,Q,a\nq2,Q,\n");
        match ingest_qa_dataset(&p, DatasetFormat::MaqaLike) {
            Err(CliError::SchemaViolation { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file_is_dataset_parse() {
        assert!(matches!(
            ingest_qa_dataset(Path::new("/nonexistent/file.jsonl"), DatasetFormat::MaqaLike),
            Err(CliError::DatasetParse(_))
        ));
    }

    #[test]
    fn synth_dataset_records() {
        let spec = SynthDataset {
            spec: ipelicit_core::synth::TransformSpec::base_setup(),
            p: 0.25,
            m: 10,
            count: 3,
            word_length: 3,
            seed: 1,
        };
        let recs = synth_dataset(&spec).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].candidates.as_ref().unwrap().len(), 8);
        let total: f64 = recs[0].pstar.as_ref().unwrap().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        let (_d, p) = write(
            "d.jsonl",
            &(0..20)
                .map(|i| format!("{{\"id\":\"{i}\",\"question\":\"q{i}\",\"answers\":[\"a\"]}}\n"))
                .collect::<String>(),
        );
        let src = DatasetSource {
            path: Some(p),
            format: Some(DatasetFormat::MaqaLike),
            synth: None,
            sample: Some(5),
            sample_seed: 3,
        };
        let a: Vec<String> = load_dataset(&src).unwrap().into_iter().map(|r| r.id).collect();
        let b: Vec<String> = load_dataset(&src).unwrap().into_iter().map(|r| r.id).collect();
        assert_eq!(a.len(), 5);
        assert_eq!(a, b);
    }
}
