//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails. Case counts, seeds and time limits are fixed
//! below.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use histif_core::compress::compress;
use histif_core::dataslice::{data_slice_from, filter_database, DataSliceOptions, Side};
use histif_core::engine::{answer, Method, WhatIfOptions};
use histif_core::fixtures::{order_db, order_history, order_mods, order_mods_u3};
use histif_core::progslice::{build_slice_test, check_slice, SliceIndexSet, SliceOptions, Verdict};
use histif_core::statement::{apply_mods, normalize_mods, run_history};
use histif_core::{generate_workload, Database, Value, VersionedStore, WorkloadSpec};

const SEED: u64 = 0x5eed;
const RUNNING_EXAMPLE_LIMIT: Duration = Duration::from_secs(1);
const REENACTMENT_CASES: usize = 1000;
const REENACTMENT_LIMIT: Duration = Duration::from_secs(30);
const DS_CASES: usize = 500;
const WORLD_CASES: usize = 300;
const SOLVER_CASES: usize = 1000;
const SLICE_CASES: usize = 200;
const WORKLOAD_CASES: usize = 500;
const PERF_SIZE: usize = 100_000;
const PERF_REPS: usize = 3;
const PERF_LIMIT: Duration = Duration::from_secs(300);
/// `r+ds` must take at most this share of `r`.
const DS_SPEEDUP: f64 = 0.7;

type Check = Result<String, String>;

/// False for NaN, so a broken timing fails the check.
fn at_most(a: f64, b: f64) -> bool {
    a <= b
}

fn fees(db: &Database) -> Vec<i64> {
    db.get("Order")
        .map(|r| {
            r.sorted()
                .iter()
                .filter_map(|t| match &t[4] {
                    Value::Integer(v) => Some(*v),
                    _ => None,
                })
                .collect()
        })
        .unwrap_or_default()
}

fn running_example() -> Check {
    let start = Instant::now();
    let (db, h, mods) = (order_db(), order_history(), order_mods());
    let hm = apply_mods(&h, &mods).map_err(|e| e.to_string())?;
    let f = fees(&run_history(&h, &db).map_err(|e| e.to_string())?);
    let fm = fees(&run_history(&hm, &db).map_err(|e| e.to_string())?);
    if f != [8, 5, 0, 4] || fm != [8, 10, 0, 4] {
        return Err(format!("fees {f:?} and {fm:?}"));
    }
    let want = "- Order(12, Alex, UK, 50, 5)\n+ Order(12, Alex, UK, 50, 10)\n";
    let store = VersionedStore::from_history(db, &h).map_err(|e| e.to_string())?;
    for method in Method::ALL {
        let a = answer(&store, &mods, &WhatIfOptions { method, ..Default::default() }).map_err(|e| e.to_string())?;
        let got = a.delta.to_string();
        if got != want {
            return Err(format!("{method} returned {got:?}"));
        }
    }
    let took = start.elapsed();
    if took > RUNNING_EXAMPLE_LIMIT {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("5 methods agree in {took:?}"))
}

fn random_cases(name: &str, seed: u64, cases: usize, case: fn(&mut ChaCha8Rng) -> common::CaseResult) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    for k in 0..cases {
        case(&mut rng).map_err(|e| format!("{name} case {k}: {e}"))?;
    }
    Ok(format!("{cases} cases in {:?}", start.elapsed()))
}

fn reenactment() -> Check {
    let start = Instant::now();
    let msg = random_cases("reenactment", SEED, REENACTMENT_CASES, common::reenactment_case)?;
    if start.elapsed() > REENACTMENT_LIMIT {
        return Err(format!("took {:?}", start.elapsed()));
    }
    Ok(msg)
}

fn data_slicing() -> Check {
    let db = order_db();
    let n = normalize_mods(&order_history(), &order_mods_u3()).map_err(|e| e.to_string())?;
    let s = data_slice_from(&n, &db.catalog(), DataSliceOptions::default(), 1).map_err(|e| e.to_string())?;
    for side in [Side::Original, Side::Modified] {
        let f = filter_database(&db, s.side(side)).map_err(|e| e.to_string())?;
        let ids: Vec<Value> = f.get("Order").map_err(|e| e.to_string())?.sorted().iter().map(|t| t[0].clone()).collect();
        if ids != [Value::Integer(11)] {
            return Err(format!("base condition keeps {ids:?}"));
        }
    }
    random_cases("data slicing", SEED + 1, DS_CASES, common::data_slicing_case)
}

fn possible_worlds() -> Check {
    random_cases("possible worlds", SEED + 2, WORLD_CASES, common::possible_worlds_case)
}

fn solver() -> Check {
    random_cases("solver", SEED + 3, SOLVER_CASES, common::solver_case)
}

fn slicing() -> Check {
    let db = order_db();
    let cat = db.catalog();
    let n = normalize_mods(&order_history(), &order_mods()).map_err(|e| e.to_string())?;
    let chi = vec![compress(db.get("Order").map_err(|e| e.to_string())?, Some("Country"), 2).map_err(|e| e.to_string())?];
    for (i, want) in [(vec![1], Verdict::NotProven), (vec![1, 2, 3], Verdict::IsSlice)] {
        let set: SliceIndexSet = i.iter().copied().collect();
        let t = build_slice_test(&n, &set, &chi, &cat).map_err(|e| e.to_string())?;
        let (v, _, _) = check_slice(&t, &SliceOptions::default()).map_err(|e| e.to_string())?;
        if v != want {
            return Err(format!("{i:?} gave {v:?}"));
        }
    }
    random_cases("slicing", SEED + 4, SLICE_CASES, common::slice_soundness_case)
}

fn method_agreement() -> Check {
    let mut k = 0;
    let start = Instant::now();
    'outer: loop {
        for u in [5, 20] {
            for d in [10, 100] {
                for t in [1, 10] {
                    for ix in [0, 10] {
                        if k == WORKLOAD_CASES {
                            break 'outer;
                        }
                        let spec = WorkloadSpec {
                            u,
                            m: 1,
                            d,
                            t,
                            i: ix,
                            x: ix,
                            size: 1000,
                            seed: SEED + k as u64,
                        };
                        agree_on(&spec).map_err(|e| format!("{spec:?}: {e}"))?;
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{k} workloads in {:?}", start.elapsed()))
}

fn agree_on(spec: &WorkloadSpec) -> Result<(), String> {
    let w = generate_workload(spec).map_err(|e| e.to_string())?;
    let store = VersionedStore::from_history(w.db, &w.history).map_err(|e| e.to_string())?;
    let mut outputs = BTreeSet::new();
    for method in Method::ALL {
        let a = answer(&store, &w.mods, &WhatIfOptions { method, ..Default::default() }).map_err(|e| e.to_string())?;
        outputs.insert(a.delta.to_csv().map_err(|e| e.to_string())?);
    }
    if outputs.len() != 1 {
        return Err(format!("{} distinct outputs", outputs.len()));
    }
    Ok(())
}

fn median_ms(store: &VersionedStore, w: &histif_core::Workload, method: Method) -> Result<f64, String> {
    let mut runs = Vec::with_capacity(PERF_REPS);
    for _ in 0..PERF_REPS {
        let start = Instant::now();
        answer(store, &w.mods, &WhatIfOptions { method, ..Default::default() }).map_err(|e| e.to_string())?;
        runs.push(start.elapsed().as_secs_f64() * 1e3);
    }
    runs.sort_by(f64::total_cmp);
    Ok(runs[runs.len() / 2])
}

fn performance() -> Check {
    let start = Instant::now();
    let mut times = Vec::new();
    for d in [10, 100] {
        let spec = WorkloadSpec {
            u: 100,
            m: 1,
            d,
            t: 1,
            i: 0,
            x: 0,
            size: PERF_SIZE,
            seed: SEED,
        };
        let w = generate_workload(&spec).map_err(|e| e.to_string())?;
        let store = VersionedStore::from_history(w.db.clone(), &w.history).map_err(|e| e.to_string())?;
        let mut row = Vec::new();
        for m in Method::REENACTMENT {
            row.push((m, median_ms(&store, &w, m)?));
        }
        times.push((d, row));
    }
    let get = |d: u32, m: Method| {
        times
            .iter()
            .find(|(x, _)| *x == d)
            .and_then(|(_, row)| row.iter().find(|(y, _)| *y == m))
            .map(|(_, t)| *t)
            .unwrap_or(f64::NAN)
    };
    let summary = times
        .iter()
        .map(|(d, row)| {
            let cells: Vec<String> = row.iter().map(|(m, t)| format!("{m}={t:.0}ms")).collect();
            format!("D={d}: {}", cells.join(" "))
        })
        .collect::<Vec<_>>()
        .join("; ");
    let (r, rds, rpsds) = (get(10, Method::R), get(10, Method::RDs), get(10, Method::RPsDs));
    if !at_most(rds, DS_SPEEDUP * r) {
        return Err(format!("r+ds {rds:.0}ms above {DS_SPEEDUP} x r {r:.0}ms ({summary})"));
    }
    if !at_most(rpsds, r) {
        return Err(format!("r+ps+ds {rpsds:.0}ms above r {r:.0}ms ({summary})"));
    }
    let (rds100, rps100) = (get(100, Method::RDs), get(100, Method::RPs));
    if !at_most(rds100, rps100) {
        return Err(format!("D=100 r+ds {rds100:.0}ms above r+ps {rps100:.0}ms ({summary})"));
    }
    if start.elapsed() > PERF_LIMIT {
        return Err(format!("took {:?} ({summary})", start.elapsed()));
    }
    Ok(summary)
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Check); 8] = [
        ("running-example", running_example),
        ("reenactment-equivalence", reenactment),
        ("data-slicing-soundness", data_slicing),
        ("possible-worlds", possible_worlds),
        ("solver-oracle", solver),
        ("program-slicing-soundness", slicing),
        ("method-agreement", method_agreement),
        ("performance-trend", performance),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
