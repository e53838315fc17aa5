use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use histif_core::expr::Cond;
use histif_core::milp::{CompileOptions, Domains, VarDomain};
use histif_core::random::{Gen, GenConfig};
use histif_core::sat::check_sat;
use histif_core::solver::{SolveOptions, DEFAULT_LP_MAX_CELLS};
use histif_core::{Type, Value};

/// Fixed random formulas over three integer variables.
fn instances(n: usize, width: i64) -> Vec<(Cond, Domains)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = Gen::new(GenConfig {
        domain: width,
        ..GenConfig::default()
    });
    let attrs = ["x", "y", "z"];
    (0..n)
        .map(|_| {
            let f = g.cond(&mut rng, &attrs, 3);
            let mut doms = Domains::new();
            for v in attrs {
                let lo = rng.gen_range(-width..width);
                doms.insert(
                    v.to_string(),
                    VarDomain::numeric(Type::Integer, Value::Integer(lo), Value::Integer(lo + width)),
                );
            }
            (f, doms)
        })
        .collect()
}

/// Simplex-backed search against propagation-only branching.
fn check_sat_random(c: &mut Criterion) {
    let mut g = c.benchmark_group("check_sat");
    for width in [10, 1_000] {
        let cases = instances(50, width);
        for (name, cells) in [("lp", DEFAULT_LP_MAX_CELLS), ("propagation", 0)] {
            let sopts = SolveOptions {
                lp_max_cells: cells,
                ..SolveOptions::default()
            };
            g.bench_with_input(BenchmarkId::new(name, width), &width, |b, _| {
                b.iter(|| {
                    for (f, doms) in &cases {
                        check_sat(f, doms, &CompileOptions::default(), &sopts).expect("compiles");
                    }
                })
            });
        }
    }
    g.finish();
}

criterion_group!(benches, check_sat_random);
criterion_main!(benches);
