use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ipelicit_core::mmi::exact_mmi_credal_with;
use ipelicit_core::scores::entropy;
use ipelicit_core::{build_pmf, par, CandidateSet, CredalSet, ExecPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn credal(rng: &mut ChaCha8Rng, n: usize, members: usize) -> CredalSet {
    let cands = CandidateSet::new((0..n).map(|i| format!("y{i}")), false).unwrap();
    let pmfs = (0..members)
        .map(|_| {
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            build_pmf(&cands, &w, true).unwrap()
        })
        .collect();
    CredalSet::untagged(pmfs).unwrap()
}

const POLICIES: [(&str, ExecPolicy); 2] = [
    ("sequential", ExecPolicy::Sequential),
    ("parallel", ExecPolicy::Parallel),
];

fn exact_mmi(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("exact_mmi");
    group.sample_size(20);
    for n in [12usize, 16] {
        let set = credal(&mut rng, n, 5);
        for (name, policy) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &set, |b, set| {
                b.iter(|| exact_mmi_credal_with(black_box(set), 16, policy).unwrap())
            });
        }
    }
    group.finish();
}

fn batch_scoring(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sets: Vec<CredalSet> = (0..2_000).map(|_| credal(&mut rng, 8, 5)).collect();
    let mut group = c.benchmark_group("batch_scoring");
    for (name, policy) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| {
                par::map(policy, black_box(&sets), |s| {
                    let mmi = exact_mmi_credal_with(s, 16, ExecPolicy::Sequential).unwrap().value;
                    (mmi, entropy(&s.members()[0]))
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, exact_mmi, batch_scoring);
criterion_main!(benches);
