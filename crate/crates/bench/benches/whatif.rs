use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use histif_core::{answer, generate_workload, Method, VersionedStore, WhatIfOptions, WorkloadSpec};

fn store_for(spec: &WorkloadSpec) -> (VersionedStore, Vec<histif_core::Modification>) {
    let w = generate_workload(spec).expect("valid spec");
    (VersionedStore::from_history(w.db, &w.history).expect("history runs"), w.mods)
}

/// Every method as the history grows, with a tenth of the unmodified
/// updates depending on the modified one.
fn by_history_length(c: &mut Criterion) {
    let mut g = c.benchmark_group("history_length");
    g.sample_size(10);
    for u in [10, 50, 100] {
        let spec = WorkloadSpec {
            u,
            d: 10,
            size: 5_000,
            ..WorkloadSpec::default()
        };
        let (store, mods) = store_for(&spec);
        for method in Method::ALL {
            let opts = WhatIfOptions {
                method,
                ..WhatIfOptions::default()
            };
            g.bench_with_input(BenchmarkId::new(method.name(), u), &u, |b, _| {
                b.iter(|| answer(&store, &mods, &opts).expect("answer"))
            });
        }
    }
    g.finish();
}

fn by_dependent_share(c: &mut Criterion) {
    let mut g = c.benchmark_group("dependent_share");
    g.sample_size(10);
    for d in [0, 50, 100] {
        let spec = WorkloadSpec {
            u: 20,
            d,
            size: 5_000,
            ..WorkloadSpec::default()
        };
        let (store, mods) = store_for(&spec);
        for method in Method::REENACTMENT {
            let opts = WhatIfOptions {
                method,
                ..WhatIfOptions::default()
            };
            g.bench_with_input(BenchmarkId::new(method.name(), d), &d, |b, _| {
                b.iter(|| answer(&store, &mods, &opts).expect("answer"))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, by_history_length, by_dependent_share);
criterion_main!(benches);
