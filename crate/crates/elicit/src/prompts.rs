//! Prompt catalog and rendering.
//!
//! Each kind's instruction text lives in `prompts/<kind>.txt` and is embedded
//! byte-for-byte. Rendering appends the question, a numbered candidate list
//! and a strict output-format block the parser understands.

use std::fmt;
use std::str::FromStr;

use ipelicit_core::CandidateSet;
use serde::{Deserialize, Serialize};

use crate::ElicitError;

/// System text sent with every request.
pub const SYSTEM_TEXT: &str =
    "You are a careful assistant. Follow the output format exactly and report numbers as plain decimals.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Definetti,
    Probint,
    Credal,
    Possibility,
    Candidates,
    Vanilla,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        PromptKind::Definetti,
        PromptKind::Probint,
        PromptKind::Credal,
        PromptKind::Possibility,
        PromptKind::Candidates,
        PromptKind::Vanilla,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Definetti => "definetti",
            PromptKind::Probint => "probint",
            PromptKind::Credal => "credal",
            PromptKind::Possibility => "possibility",
            PromptKind::Candidates => "candidates",
            PromptKind::Vanilla => "vanilla",
        }
    }

    /// The catalog text for this kind, verbatim.
    pub fn template(self) -> &'static str {
        match self {
            PromptKind::Definetti => include_str!("../prompts/definetti.txt"),
            PromptKind::Probint => include_str!("../prompts/probint.txt"),
            PromptKind::Credal => include_str!("../prompts/credal.txt"),
            PromptKind::Possibility => include_str!("../prompts/possibility.txt"),
            PromptKind::Candidates => include_str!("../prompts/candidates.txt"),
            PromptKind::Vanilla => include_str!("../prompts/vanilla.txt"),
        }
    }

    pub fn requires_candidates(self) -> bool {
        !matches!(self, PromptKind::Candidates | PromptKind::Vanilla)
    }

    /// Field names expected on each candidate row of the output block.
    pub fn row_fields(self) -> &'static [&'static str] {
        match self {
            PromptKind::Definetti => &["price"],
            PromptKind::Probint => &["lower", "upper"],
            PromptKind::Credal => &["prob"],
            PromptKind::Possibility => &["pos"],
            PromptKind::Candidates | PromptKind::Vanilla => &[],
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = ElicitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| ElicitError::UnknownKind(s.to_string()))
    }
}

/// Renders the full user prompt for one elicitation.
///
/// For `vanilla`, a supplied candidate set carries the proposed answer in its
/// first slot; without one the model is asked to answer first.
pub fn render_prompt(
    kind: PromptKind,
    question: &str,
    candidates: Option<&CandidateSet>,
) -> Result<String, ElicitError> {
    let question = question.trim();
    if question.is_empty() {
        return Err(ElicitError::EmptyQuestion);
    }
    let candidates = candidates.filter(|c| !c.is_empty());
    if kind.requires_candidates() && candidates.is_none() {
        return Err(ElicitError::MissingCandidates(kind));
    }

    let mut out = String::new();
    out.push_str(kind.template().trim_end());
    out.push_str("\n\nQuestion: ");
    out.push_str(question);
    out.push('\n');

    match kind {
        PromptKind::Candidates => {
            out.push_str(
                "\nOutput format: reply with the numbered list only, one answer per line, \
                 each line of the form `<number>. <answer>`.\n",
            );
        }
        PromptKind::Vanilla => {
            match candidates.and_then(|c| c.get(0)) {
                Some(answer) => {
                    out.push_str("\nProposed answer: ");
                    out.push_str(answer);
                    out.push('\n');
                }
                None => out.push_str(
                    "\nFirst give your answer on its own line of the form `Answer: <answer>`; \
                     the confidence refers to that answer.\n",
                ),
            }
            out.push_str(&format_block_instruction(&["CONF|conf=<value>".to_string()]));
        }
        _ => {
            let candidates = candidates.expect("checked above");
            out.push_str("\nAnswers:\n");
            for (i, a) in candidates.answers().iter().enumerate() {
                out.push_str(&format!("{}. {}\n", i + 1, a));
            }
            let mut rows: Vec<String> = (1..=candidates.len())
                .map(|i| {
                    let fields: Vec<String> = kind.row_fields().iter().map(|f| format!("{f}=<value>")).collect();
                    format!("{i}|{}", fields.join("|"))
                })
                .collect();
            if kind == PromptKind::Possibility {
                rows.push("NOTA|pos=<value>".to_string());
            }
            out.push_str(&format_block_instruction(&rows));
        }
    }
    Ok(out)
}

fn format_block_instruction(rows: &[String]) -> String {
    let mut s = String::from(
        "\nOutput format: end your reply with a fenced block (``` on its own line before and after) \
         containing exactly these lines, with each <value> replaced by a decimal number:\n```\n",
    );
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s.push_str("```\n");
    s
}

/// Appended to the prompt on a re-ask, listing what was wrong last time.
pub fn retry_note(attempt: u32, problems: &[String]) -> String {
    let mut s = format!("\n\nAttempt {attempt}: your previous reply was rejected for the following reasons:\n");
    for p in problems {
        s.push_str("- ");
        s.push_str(p);
        s.push('\n');
    }
    s.push_str("Reply again, fixing these problems and following the output format exactly.\n");
    s
}

/// Recovers the attempt number from a prompt built with [`retry_note`]; 1 when absent.
pub fn attempt_from_prompt(prompt: &str) -> u32 {
    prompt
        .rfind("\n\nAttempt ")
        .and_then(|pos| {
            let rest = &prompt[pos + "\n\nAttempt ".len()..];
            let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
            digits.parse().ok()
        })
        .unwrap_or(1)
}

/// Identifies which catalog template a rendered prompt was built from.
pub fn detect_kind(prompt: &str) -> Option<PromptKind> {
    PromptKind::ALL
        .into_iter()
        .find(|k| prompt.starts_with(k.template().trim_end()))
}

/// Recovers the question text from a rendered prompt.
pub fn question_from_prompt(prompt: &str) -> Option<&str> {
    let start = prompt.find("\n\nQuestion: ")? + "\n\nQuestion: ".len();
    let rest = &prompt[start..];
    // the question may span several lines; it ends at the first blank line
    let end = rest.find("\n\n").unwrap_or(rest.len());
    Some(rest[..end].trim_end())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> CandidateSet {
        CandidateSet::new(["A", "B"], false).unwrap()
    }

    #[test]
    fn definetti_prompt_contains_template_and_numbered_candidates() {
        let p = render_prompt(PromptKind::Definetti, "Who?", Some(&ab())).unwrap();
        assert!(p.contains("Assign a buy price"));
        assert!(p.starts_with(PromptKind::Definetti.template().trim_end()));
        assert!(p.contains("\n1. A\n2. B\n"));
        assert!(p.contains("1|price=<value>\n2|price=<value>\n"));
    }

    #[test]
    fn candidates_prompt_has_no_candidate_block() {
        let p = render_prompt(PromptKind::Candidates, "Who?", None).unwrap();
        assert!(p.contains("numbered list"));
        assert!(p.contains("all possible correct answers"));
        assert!(!p.contains("Answers:"));
    }

    #[test]
    fn missing_candidates_rejected() {
        let empty = CandidateSet::new(["x"], false).unwrap();
        assert!(render_prompt(PromptKind::Probint, "q", None).is_err());
        // a non-empty set is required; CandidateSet itself cannot be empty
        assert!(render_prompt(PromptKind::Probint, "q", Some(&empty)).is_ok());
        assert!(matches!(
            render_prompt(PromptKind::Credal, "q", None),
            Err(ElicitError::MissingCandidates(PromptKind::Credal))
        ));
        assert!(matches!(
            render_prompt(PromptKind::Credal, "  ", Some(&ab())),
            Err(ElicitError::EmptyQuestion)
        ));
    }

    #[test]
    fn catalog_phrases() {
        assert!(PromptKind::Probint
            .template()
            .contains("Provide a lower and upper probability"));
        assert!(PromptKind::Credal.template().contains("would be given as a response"));
        assert!(PromptKind::Possibility
            .template()
            .contains("a different answer (not listed)"));
        assert!(PromptKind::Candidates
            .template()
            .contains("all possible correct answers"));
    }

    #[test]
    fn possibility_and_vanilla_rows() {
        let p = render_prompt(PromptKind::Possibility, "q", Some(&ab())).unwrap();
        assert!(p.contains("2|pos=<value>\nNOTA|pos=<value>\n"));
        let v = render_prompt(PromptKind::Vanilla, "q", Some(&ab())).unwrap();
        assert!(v.contains("Proposed answer: A\n"));
        assert!(v.contains("CONF|conf=<value>"));
        let v = render_prompt(PromptKind::Vanilla, "q", None).unwrap();
        assert!(v.contains("Answer: <answer>"));
    }

    #[test]
    fn kind_round_trip_and_detection() {
        for k in PromptKind::ALL {
            assert_eq!(k.as_str().parse::<PromptKind>().unwrap(), k);
            let p = render_prompt(k, "What is it?\nSecond line", Some(&ab())).unwrap();
            assert_eq!(detect_kind(&p), Some(k));
            assert_eq!(question_from_prompt(&p), Some("What is it?\nSecond line"));
            assert_eq!(attempt_from_prompt(&p), 1);
            let again = format!("{p}{}", retry_note(3, &["SUM".into()]));
            assert_eq!(attempt_from_prompt(&again), 3);
            assert_eq!(question_from_prompt(&again), Some("What is it?\nSecond line"));
        }
        assert!("bogus".parse::<PromptKind>().is_err());
    }
}
