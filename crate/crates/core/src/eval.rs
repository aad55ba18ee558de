//! Ranking metrics and API cost accounting.
//!
//! Scores are uncertainties: a higher score should rank the positive class
//! (ambiguous, or incorrect) higher. Ties earn half credit in both AUROC and
//! the concordance index. Both are computed by sorting with integer counts of
//! half-pairs, so results are exact rationals rounded once.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub score: f64,
    pub label: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_value: Option<f64>,
}

impl ScoredExample {
    pub fn new(score: f64, label: bool) -> Self {
        ScoredExample {
            score,
            label,
            ref_value: None,
        }
    }
}

fn check_finite(values: impl Iterator<Item = f64>) -> Result<()> {
    for (i, v) in values.enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(())
}

/// Probability that a random positive outranks a random negative.
pub fn auroc(examples: &[ScoredExample]) -> Result<f64> {
    check_finite(examples.iter().map(|e| e.score))?;
    let positives = examples.iter().filter(|e| e.label).count() as u64;
    let negatives = examples.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut sorted: Vec<&ScoredExample> = examples.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));

    // twice the Mann-Whitney U statistic
    let mut twice_u: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].score == sorted[i].score {
            j += 1;
        }
        let group_pos = sorted[i..j].iter().filter(|e| e.label).count() as u64;
        let group_neg = (j - i) as u64 - group_pos;
        twice_u += 2 * group_pos * negatives_below + group_pos * group_neg;
        negatives_below += group_neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * positives * negatives) as f64)
}

/// Fenwick tree over dense score ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0; n + 1])
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut total = 0;
        while i > 0 {
            total += self.0[i];
            i -= i & i.wrapping_neg();
        }
        total
    }
}

/// Fraction of comparable pairs (distinct reference values) whose score order
/// agrees with the reference order. Pairs tied on reference are excluded.
pub fn concordance_index(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::TooFewItems {
            needed: 2,
            got: pairs.len(),
        });
    }
    check_finite(pairs.iter().flat_map(|&(s, r)| [s, r]))?;

    let mut scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let rank = |s: f64| scores.partition_point(|&x| x < s);

    let mut by_ref: Vec<(f64, f64)> = pairs.to_vec();
    by_ref.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut tree = Fenwick::new(scores.len());
    let mut inserted: u64 = 0;
    let mut comparable: u64 = 0;
    let mut twice_concordant: u64 = 0;
    let mut i = 0;
    while i < by_ref.len() {
        let mut j = i;
        while j < by_ref.len() && by_ref[j].1 == by_ref[i].1 {
            j += 1;
        }
        // everything already inserted has a strictly smaller reference value
        for &(s, _) in &by_ref[i..j] {
            let r = rank(s);
            let lower = tree.below(r);
            let equal = tree.below(r + 1) - lower;
            twice_concordant += 2 * lower + equal;
            comparable += inserted;
        }
        for &(s, _) in &by_ref[i..j] {
            tree.add(rank(s));
        }
        inserted += (j - i) as u64;
        i = j;
    }
    if comparable == 0 {
        return Err(Error::AllRefsTied);
    }
    Ok(twice_concordant as f64 / (2 * comparable) as f64)
}

/// Sample mean and standard deviation (n − 1 denominator, zero for n = 1).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// One row of a metric table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub dataset: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MetricRow {
    /// Mean over repeats with standard error `std / √n`.
    pub fn from_repeats(method: &str, dataset: &str, metric: &str, values: &[f64]) -> Option<Self> {
        let (mean, std) = mean_std(values)?;
        Some(MetricRow {
            method: method.into(),
            dataset: dataset.into(),
            metric: metric.into(),
            value: mean,
            stderr: std / (values.len() as f64).sqrt(),
            n: values.len(),
        })
    }
}

/// Per-token prices of one endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointPrice {
    pub endpoint: String,
    pub price_per_input_token: f64,
    pub price_per_output_token: f64,
}

/// Token usage of one elicitation, attributed to a method and endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEntry {
    pub method: String,
    pub endpoint: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLine {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub currency: f64,
}

impl CostLine {
    fn add(&mut self, other: &CostLine) {
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
        self.currency += other.currency;
    }
}

/// Token and currency totals per endpoint and per (method, endpoint).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub per_endpoint: BTreeMap<String, CostLine>,
    pub per_method: BTreeMap<(String, String), CostLine>,
}

impl CostLedger {
    pub fn total(&self) -> CostLine {
        let mut t = CostLine::default();
        for line in self.per_endpoint.values() {
            t.add(line);
        }
        t
    }

    pub fn merge(&mut self, other: &CostLedger) {
        for (k, v) in &other.per_endpoint {
            self.per_endpoint.entry(k.clone()).or_default().add(v);
        }
        for (k, v) in &other.per_method {
            self.per_method.entry(k.clone()).or_default().add(v);
        }
    }
}

pub fn cost_report(usages: &[UsageEntry], prices: &[EndpointPrice]) -> Result<CostLedger> {
    let table: BTreeMap<&str, &EndpointPrice> = prices.iter().map(|p| (p.endpoint.as_str(), p)).collect();
    let mut ledger = CostLedger::default();
    for u in usages {
        let price = table
            .get(u.endpoint.as_str())
            .ok_or_else(|| Error::UnknownEndpoint(u.endpoint.clone()))?;
        let line = CostLine {
            input_tokens: u.input_tokens,
            output_tokens: u.output_tokens,
            currency: u.input_tokens as f64 * price.price_per_input_token
                + u.output_tokens as f64 * price.price_per_output_token,
        };
        ledger.per_endpoint.entry(u.endpoint.clone()).or_default().add(&line);
        ledger
            .per_method
            .entry((u.method.clone(), u.endpoint.clone()))
            .or_default()
            .add(&line);
    }
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_auroc(ex: &[ScoredExample]) -> f64 {
        let mut credit = 0.0;
        let mut pairs = 0.0;
        for p in ex.iter().filter(|e| e.label) {
            for n in ex.iter().filter(|e| !e.label) {
                pairs += 1.0;
                if p.score > n.score {
                    credit += 1.0;
                } else if p.score == n.score {
                    credit += 0.5;
                }
            }
        }
        credit / pairs
    }

    fn brute_concordance(pairs: &[(f64, f64)]) -> f64 {
        let mut credit = 0.0;
        let mut comparable = 0.0;
        for i in 0..pairs.len() {
            for j in (i + 1)..pairs.len() {
                let (si, ri) = pairs[i];
                let (sj, rj) = pairs[j];
                if ri == rj {
                    continue;
                }
                comparable += 1.0;
                if si == sj {
                    credit += 0.5;
                } else if (si < sj) == (ri < rj) {
                    credit += 1.0;
                }
            }
        }
        credit / comparable
    }

    #[test]
    fn auroc_examples() {
        let ex = [ScoredExample::new(0.9, true), ScoredExample::new(0.1, false)];
        assert_eq!(auroc(&ex).unwrap(), 1.0);
        let ex: Vec<_> = (0..6).map(|i| ScoredExample::new(0.3, i % 2 == 0)).collect();
        assert_eq!(auroc(&ex).unwrap(), 0.5);
        assert_eq!(auroc(&[ScoredExample::new(0.1, true)]), Err(Error::DegenerateLabels));

        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let ex: Vec<_> = (0..50)
            .map(|_| ScoredExample::new(rng.random(), rng.random_bool(0.4)))
            .collect();
        assert_eq!(auroc(&ex).unwrap(), brute_auroc(&ex));
    }

    #[test]
    fn concordance_examples() {
        let mono: Vec<_> = (0..10).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert_eq!(concordance_index(&mono).unwrap(), 1.0);
        let anti: Vec<_> = (0..10).map(|i| (-(i as f64), i as f64)).collect();
        assert_eq!(concordance_index(&anti).unwrap(), 0.0);
        assert_eq!(concordance_index(&[(0.1, 1.0), (0.2, 1.0)]), Err(Error::AllRefsTied));

        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let pairs: Vec<_> = (0..50)
            .map(|_| (rng.random_range(0..10) as f64, rng.random_range(0..10) as f64))
            .collect();
        assert_eq!(concordance_index(&pairs).unwrap(), brute_concordance(&pairs));
    }

    #[test]
    fn cost_examples() {
        let prices = [EndpointPrice {
            endpoint: "e".into(),
            price_per_input_token: 1e-6,
            price_per_output_token: 2e-6,
        }];
        let u = |method: &str, i, o| UsageEntry {
            method: method.into(),
            endpoint: "e".into(),
            input_tokens: i,
            output_tokens: o,
        };
        let l = cost_report(&[u("definetti", 1000, 500)], &prices).unwrap();
        assert!((l.total().currency - 0.002).abs() < 1e-12);

        assert_eq!(cost_report(&[], &prices).unwrap().total(), CostLine::default());

        let l = cost_report(&[u("definetti", 1000, 500), u("probint", 300, 70)], &prices).unwrap();
        let rows: f64 = l.per_method.values().map(|c| c.currency).sum();
        let independent = (1000.0 + 300.0) * 1e-6 + (500.0 + 70.0) * 2e-6;
        assert!((rows - l.per_endpoint["e"].currency).abs() < 1e-12);
        assert!((independent - l.total().currency).abs() < 1e-12);

        let bad = UsageEntry {
            endpoint: "other".into(),
            ..u("x", 1, 1)
        };
        assert_eq!(
            cost_report(&[bad], &prices),
            Err(Error::UnknownEndpoint("other".into()))
        );
    }

    #[test]
    fn mean_std_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(m, 3.0);
        assert!((s - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]), Some((4.0, 0.0)));
        assert_eq!(mean_std(&[]), None);
    }

    fn examples_strategy() -> impl Strategy<Value = Vec<ScoredExample>> {
        prop::collection::vec((0u8..20, any::<bool>()), 2..60)
            .prop_map(|v| {
                v.into_iter()
                    .map(|(s, l)| ScoredExample::new(s as f64 / 7.0, l))
                    .collect()
            })
            .prop_filter("both labels", |v: &Vec<ScoredExample>| {
                v.iter().any(|e| e.label) && v.iter().any(|e| !e.label)
            })
    }

    proptest! {
        #[test]
        fn auroc_invariant_under_monotone_transform(ex in examples_strategy()) {
            let a = auroc(&ex).unwrap();
            let t: Vec<_> = ex.iter().map(|e| ScoredExample::new(e.score.exp() * 3.0 + 1.0, e.label)).collect();
            prop_assert_eq!(a, auroc(&t).unwrap());
        }

        #[test]
        fn auroc_label_flip(ex in examples_strategy()) {
            let a = auroc(&ex).unwrap();
            let f: Vec<_> = ex.iter().map(|e| ScoredExample::new(e.score, !e.label)).collect();
            prop_assert!((auroc(&f).unwrap() - (1.0 - a)).abs() < 1e-12);
        }

        #[test]
        fn concordance_invariant_under_monotone_transforms(pairs in prop::collection::vec((0u8..10, 0u8..10), 2..50)) {
            let pairs: Vec<(f64, f64)> = pairs.into_iter().map(|(a, b)| (a as f64, b as f64)).collect();
            prop_assume!(pairs.iter().any(|p| p.1 != pairs[0].1));
            let a = concordance_index(&pairs).unwrap();
            let t: Vec<_> = pairs.iter().map(|&(s, r)| (s * s * s + 1.0, r.exp())).collect();
            prop_assert_eq!(a, concordance_index(&t).unwrap());
        }

        #[test]
        fn ledger_merge_is_additive(a in prop::collection::vec((0u64..10_000, 0u64..10_000), 0..10), b in prop::collection::vec((0u64..10_000, 0u64..10_000), 0..10)) {
            let prices = [EndpointPrice { endpoint: "e".into(), price_per_input_token: 3e-7, price_per_output_token: 1.2e-6 }];
            let mk = |v: &[(u64, u64)]| v.iter().map(|&(i, o)| UsageEntry { method: "m".into(), endpoint: "e".into(), input_tokens: i, output_tokens: o }).collect::<Vec<_>>();
            let mut la = cost_report(&mk(&a), &prices).unwrap();
            let lb = cost_report(&mk(&b), &prices).unwrap();
            let mut all = mk(&a);
            all.extend(mk(&b));
            let lall = cost_report(&all, &prices).unwrap();
            la.merge(&lb);
            prop_assert_eq!(la.total().input_tokens, lall.total().input_tokens);
            prop_assert!((la.total().currency - lall.total().currency).abs() < 1e-12);
        }
    }
}
