//! Synthetic sequence-transformation tasks for in-context learning.
//!
//! A task applies a fixed chain of alphabet rotations and positional cyclic
//! shifts to random uppercase words. Example outputs are corrupted by
//! lowercasing each letter with probability `p`; correctness is judged after
//! uppercasing, so every case variant of the clean output is a correct answer
//! and the answer distribution is known exactly.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::CandidateSet;
use crate::{Error, Result};

/// Default cap on `2^L` for [`ground_truth_variants`].
pub const DEFAULT_MAX_ENUM: u128 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Rotation,
    CyclicShift,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformStep {
    pub kind: TransformKind,
    pub n: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftDirection {
    #[default]
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub steps: Vec<TransformStep>,
    #[serde(default)]
    pub shift_direction: ShiftDirection,
}

impl TransformSpec {
    pub fn new(steps: Vec<TransformStep>) -> Self {
        TransformSpec {
            steps,
            shift_direction: ShiftDirection::Left,
        }
    }

    /// Rotation by 13 followed by a cyclic shift by 1.
    pub fn base_setup() -> Self {
        Self::new(vec![
            TransformStep {
                kind: TransformKind::Rotation,
                n: 13,
            },
            TransformStep {
                kind: TransformKind::CyclicShift,
                n: 1,
            },
        ])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub p: f64,
    pub rng_seed: u64,
}

impl NoiseSpec {
    pub fn new(p: f64, rng_seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange { index: 0, value: p });
        }
        Ok(NoiseSpec { p, rng_seed })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IclExample {
    pub input: String,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IclTask {
    pub spec: TransformSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub examples: Vec<IclExample>,
    pub query_input: String,
    pub clean_query_output: String,
}

impl IclTask {
    pub fn m(&self) -> usize {
        self.examples.len()
    }

    /// Question text: one `Input: X → Output: Y` line per example, then the
    /// query with an empty output.
    pub fn to_question(&self) -> String {
        let mut q = String::from(
            "Each example below applies the same hidden transformation rule to an input string. \
             Infer the rule and give the output for the final input.\n",
        );
        for ex in &self.examples {
            q.push_str(&format!("Input: {} → Output: {}\n", ex.input, ex.output));
        }
        q.push_str(&format!("Input: {} → Output:", self.query_input));
        q
    }
}

/// Parses the example lines and query back out of [`IclTask::to_question`] text.
pub fn parse_icl_question(text: &str) -> Option<(Vec<IclExample>, String)> {
    let mut examples = Vec::new();
    let mut query = None;
    for line in text.lines() {
        let Some(rest) = line.trim().strip_prefix("Input: ") else {
            continue;
        };
        let (input, output) = rest.split_once(" → Output:")?;
        let output = output.trim();
        if output.is_empty() {
            query = Some(input.trim().to_string());
        } else {
            examples.push(IclExample {
                input: input.trim().to_string(),
                output: output.to_string(),
            });
        }
    }
    query.map(|q| (examples, q))
}

fn check_alpha(s: &str) -> Result<()> {
    if s.bytes().all(|b| b.is_ascii_uppercase()) {
        Ok(())
    } else {
        Err(Error::NonAlphabetInput(s.to_string()))
    }
}

/// Advances each letter `n` places, wrapping Z to A.
pub fn apply_rotation(s: &str, n: u32) -> Result<String> {
    check_alpha(s)?;
    let k = (n % 26) as u8;
    Ok(s.bytes().map(|b| (b'A' + (b - b'A' + k) % 26) as char).collect())
}

/// Rotates the characters left by `n mod |s|` positions.
pub fn apply_cyclic_shift(s: &str, n: u32) -> Result<String> {
    apply_cyclic_shift_dir(s, n, ShiftDirection::Left)
}

pub fn apply_cyclic_shift_dir(s: &str, n: u32, direction: ShiftDirection) -> Result<String> {
    let chars: Vec<char> = s.chars().collect();
    if chars.is_empty() {
        return Err(Error::EmptyString);
    }
    let len = chars.len();
    let k = n as usize % len;
    let start = match direction {
        ShiftDirection::Left => k,
        ShiftDirection::Right => (len - k) % len,
    };
    Ok(chars[start..].iter().chain(&chars[..start]).collect())
}

pub fn apply_transform(spec: &TransformSpec, s: &str) -> Result<String> {
    check_alpha(s)?;
    let mut out = s.to_string();
    for step in &spec.steps {
        out = match step.kind {
            TransformKind::Rotation => apply_rotation(&out, step.n)?,
            TransformKind::CyclicShift => apply_cyclic_shift_dir(&out, step.n, spec.shift_direction)?,
        };
    }
    Ok(out)
}

/// Lowercases each uppercase letter with probability `noise.p`, seeded by `noise.rng_seed`.
pub fn inject_case_noise(s: &str, noise: &NoiseSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    inject_case_noise_with(s, noise.p, &mut rng)
}

/// One uniform draw per letter, whether or not it flips.
pub fn inject_case_noise_with<R: Rng + ?Sized>(s: &str, p: f64, rng: &mut R) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_uppercase() {
                let u: f64 = rng.random();
                if u < p {
                    return c.to_ascii_lowercase();
                }
            }
            c
        })
        .collect()
}

fn random_word<R: Rng + ?Sized>(rng: &mut R, len: usize) -> String {
    (0..len).map(|_| (b'A' + rng.random_range(0..26u8)) as char).collect()
}

/// Builds a task with `m` distinct example inputs and a fresh query input.
///
/// Inputs are drawn from `rng_seed`; case noise from `noise.rng_seed`.
pub fn generate_icl_task(
    spec: &TransformSpec,
    noise: &NoiseSpec,
    m: usize,
    word_length: usize,
    rng_seed: u64,
) -> Result<IclTask> {
    if word_length == 0 {
        return Err(Error::InvalidParameter("word_length must be at least 1".into()));
    }
    let needed = m + 1;
    let vocabulary = 26u128.checked_pow(word_length as u32).unwrap_or(u128::MAX);
    if needed as u128 > vocabulary {
        return Err(Error::VocabularyExhausted { needed, word_length });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    let mut seen = HashSet::with_capacity(needed);
    let mut inputs = Vec::with_capacity(needed);
    while inputs.len() < needed {
        let w = random_word(&mut rng, word_length);
        if seen.insert(w.clone()) {
            inputs.push(w);
        }
    }
    let query_input = inputs.pop().expect("needed >= 1");
    let examples = inputs
        .into_iter()
        .map(|input| {
            let clean = apply_transform(spec, &input)?;
            Ok(IclExample {
                output: inject_case_noise_with(&clean, noise.p, &mut noise_rng),
                input,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clean_query_output = apply_transform(spec, &query_input)?;
    Ok(IclTask {
        spec: spec.clone(),
        noise: *noise,
        seed: rng_seed,
        examples,
        query_input,
        clean_query_output,
    })
}

/// One case variant of a clean answer with its exact probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseVariant {
    pub text: String,
    pub lowercase_count: usize,
    pub prob: f64,
}

/// Every case variant of `clean` with probability `p^ℓ (1−p)^(L−ℓ)`.
///
/// Variants with probability exactly zero (only possible at `p ∈ {0, 1}`) are
/// omitted. The clean answer comes first whenever it is included.
pub fn ground_truth_variants(clean: &str, p: f64, max_enum: u128) -> Result<Vec<CaseVariant>> {
    check_alpha(clean)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange { index: 0, value: p });
    }
    let letters: Vec<u8> = clean.bytes().collect();
    let l = letters.len();
    let variants = 1u128.checked_shl(l as u32).unwrap_or(u128::MAX);
    if l >= 64 || variants > max_enum {
        return Err(Error::EnumerationTooLarge {
            variants,
            limit: max_enum,
        });
    }
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << l) {
        let lowercase_count = mask.count_ones() as usize;
        let prob = p.powi(lowercase_count as i32) * (1.0 - p).powi((l - lowercase_count) as i32);
        if prob == 0.0 {
            continue;
        }
        let text = letters
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                if mask >> i & 1 == 1 {
                    b.to_ascii_lowercase() as char
                } else {
                    b as char
                }
            })
            .collect();
        out.push(CaseVariant {
            text,
            lowercase_count,
            prob,
        });
    }
    Ok(out)
}

/// Case-sensitive candidate set over the variants.
pub fn variant_candidates(variants: &[CaseVariant]) -> Result<CandidateSet> {
    CandidateSet::case_sensitive(variants.iter().map(|v| v.text.clone()), false)
}

/// Uppercases and trims the prediction before an exact comparison.
pub fn permissive_match(prediction: &str, clean_truth: &str) -> bool {
    prediction.trim().to_uppercase() == clean_truth
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // independent lookup table for the rotation oracle
    const ROT13: &str = "NOPQRSTUVWXYZABCDEFGHIJKLM";

    fn rot13_oracle(s: &str) -> String {
        s.bytes()
            .map(|b| ROT13.as_bytes()[(b - b'A') as usize] as char)
            .collect()
    }

    fn shift_oracle(s: &str, n: usize) -> String {
        let b = s.as_bytes();
        (0..b.len()).map(|i| b[(i + n) % b.len()] as char).collect()
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(apply_rotation("APPLE", 1).unwrap(), "BQQMF");
        assert_eq!(apply_rotation("APPLE", 0).unwrap(), "APPLE");
        assert_eq!(rot13_oracle("APPLE"), "NCCYR");
        assert_eq!(apply_rotation("APPLE", 13).unwrap(), "NCCYR");
        assert!(matches!(apply_rotation("Apple", 1), Err(Error::NonAlphabetInput(_))));
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift_oracle("ABCDE", 1), "BCDEA");
        assert_eq!(apply_cyclic_shift("ABCDE", 1).unwrap(), "BCDEA");
        assert_eq!(apply_cyclic_shift("ABCDE", 5).unwrap(), "ABCDE");
        assert_eq!(apply_cyclic_shift("ABCDE", 0).unwrap(), "ABCDE");
        assert_eq!(apply_cyclic_shift("", 1), Err(Error::EmptyString));
        assert_eq!(
            apply_cyclic_shift_dir("ABCDE", 1, ShiftDirection::Right).unwrap(),
            "EABCD"
        );
    }

    #[test]
    fn transform_examples() {
        let two_step = shift_oracle(&rot13_oracle("APPLE"), 1);
        assert_eq!(two_step, "CCYRN");
        assert_eq!(apply_transform(&TransformSpec::base_setup(), "APPLE").unwrap(), "CCYRN");
        assert_eq!(apply_transform(&TransformSpec::new(vec![]), "APPLE").unwrap(), "APPLE");
        let full = TransformSpec::new(vec![TransformStep {
            kind: TransformKind::Rotation,
            n: 26,
        }]);
        assert_eq!(apply_transform(&full, "APPLE").unwrap(), "APPLE");
    }

    #[test]
    fn noise_examples() {
        let s = "ABCDEFGHIJ";
        assert_eq!(inject_case_noise(s, &NoiseSpec::new(0.0, 1).unwrap()), s);
        assert_eq!(inject_case_noise(s, &NoiseSpec::new(1.0, 1).unwrap()), s.to_lowercase());
        let n = NoiseSpec::new(0.25, 42).unwrap();
        assert_eq!(inject_case_noise(s, &n), inject_case_noise(s, &n));
    }

    #[test]
    fn noise_frequency_monte_carlo() {
        let s = "A".repeat(100_000);
        let noisy = inject_case_noise(&s, &NoiseSpec::new(0.25, 7).unwrap());
        let frac = noisy.bytes().filter(u8::is_ascii_lowercase).count() as f64 / 1e5;
        assert!((frac - 0.25).abs() <= 0.005, "fraction {frac}");
    }

    #[test]
    fn task_generation() {
        let spec = TransformSpec::base_setup();
        let noise = NoiseSpec::new(0.25, 3).unwrap();
        let zero = generate_icl_task(&spec, &noise, 0, 5, 9).unwrap();
        assert!(zero.examples.is_empty());
        assert_eq!(
            zero.clean_query_output,
            apply_transform(&spec, &zero.query_input).unwrap()
        );

        let a = generate_icl_task(&spec, &noise, 80, 5, 11).unwrap();
        let b = generate_icl_task(&spec, &noise, 80, 5, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.m(), 80);
        for ex in &a.examples {
            assert_eq!(ex.output.to_uppercase(), apply_transform(&spec, &ex.input).unwrap());
            assert_ne!(ex.input, a.query_input);
        }
        let distinct: HashSet<_> = a.examples.iter().map(|e| &e.input).collect();
        assert_eq!(distinct.len(), 80);

        assert!(matches!(
            generate_icl_task(&spec, &noise, 26, 1, 0),
            Err(Error::VocabularyExhausted { .. })
        ));
        assert_eq!(generate_icl_task(&spec, &noise, 25, 1, 0).unwrap().m(), 25);
    }

    #[test]
    fn question_round_trip() {
        let task = generate_icl_task(&TransformSpec::base_setup(), &NoiseSpec::new(0.5, 1).unwrap(), 4, 5, 2).unwrap();
        let (examples, query) = parse_icl_question(&task.to_question()).unwrap();
        assert_eq!(examples, task.examples);
        assert_eq!(query, task.query_input);
    }

    #[test]
    fn ground_truth_examples() {
        let v = ground_truth_variants("ABCD", 0.25, DEFAULT_MAX_ENUM).unwrap();
        assert_eq!(v.len(), 16);
        assert_eq!(v[0].text, "ABCD");
        let expected = [0.316, 0.105, 0.035, 0.012, 0.004];
        for (l, want) in expected.iter().enumerate() {
            let per = v.iter().find(|x| x.lowercase_count == l).unwrap().prob;
            assert!((per - want).abs() < 5e-4, "l={l}: {per}");
        }
        let v = ground_truth_variants("APPLE", 0.0, DEFAULT_MAX_ENUM).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].text.as_str(), v[0].prob), ("APPLE", 1.0));
        assert!(matches!(
            ground_truth_variants("ABCDE", 0.5, 16),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    fn binomial_sum(l: usize, p: f64) -> f64 {
        let mut total = 0.0;
        let mut c = 1.0;
        for k in 0..=l {
            total += c * p.powi(k as i32) * (1.0 - p).powi((l - k) as i32);
            c = c * (l - k) as f64 / (k + 1) as f64;
        }
        total
    }

    #[test]
    fn variant_mass_sums_to_one() {
        for l in 1..=12 {
            let clean = "Q".repeat(l);
            for step in 0..=10 {
                let p = step as f64 / 10.0;
                let v = ground_truth_variants(&clean, p, DEFAULT_MAX_ENUM).unwrap();
                let sum: f64 = v.iter().map(|x| x.prob).sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!((binomial_sum(l, p) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn permissive_examples() {
        assert!(permissive_match("bQqMf", "BQQMF"));
        assert!(permissive_match("BQQMF ", "BQQMF"));
        assert!(!permissive_match("BQQMG", "BQQMF"));
    }

    proptest! {
        #[test]
        fn rotation_round_trip(s in "[A-Z]{1,12}", n in 0u32..26) {
            let there = apply_rotation(&s, n).unwrap();
            prop_assert_eq!(apply_rotation(&there, 26 - n).unwrap(), s);
        }

        #[test]
        fn shift_round_trip(s in "[A-Z]{1,12}", n in 0usize..12) {
            let n = n % s.len();
            let there = apply_cyclic_shift(&s, n as u32).unwrap();
            prop_assert_eq!(apply_cyclic_shift(&there, (s.len() - n) as u32).unwrap(), s);
        }

        #[test]
        fn noise_preserves_letters(s in "[A-Z]{1,20}", p in 0.0f64..=1.0, seed in any::<u64>()) {
            let noisy = inject_case_noise(&s, &NoiseSpec::new(p, seed).unwrap());
            prop_assert_eq!(noisy.to_uppercase(), s.clone());
            prop_assert!(permissive_match(&noisy, &s));
        }
    }
}
