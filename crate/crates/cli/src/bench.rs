//! Benchmark specs: workload parameters as scalars or lists, expanded to
//! their cartesian product and run once per method.

use std::time::Instant;

use serde::Deserialize;

use histif_core::{answer, generate_workload, Method, RunReport, VersionedStore, WhatIfParams, WorkloadSpec};

use crate::CliError;

/// A value or a list of values.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn one<T>(v: T) -> OneOrMany<T> {
    OneOrMany::One(v)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    /// Method names, or `"all"` for the four reenactment-based methods.
    #[serde(default = "all_methods")]
    pub methods: Vec<String>,
    #[serde(rename = "U")]
    pub u: OneOrMany<usize>,
    #[serde(rename = "M", default = "one_mod")]
    pub m: OneOrMany<usize>,
    #[serde(rename = "D", default = "zero")]
    pub d: OneOrMany<u32>,
    #[serde(rename = "T", default = "one_pct")]
    pub t: OneOrMany<u32>,
    #[serde(rename = "I", default = "zero")]
    pub i: OneOrMany<u32>,
    #[serde(rename = "X", default = "zero")]
    pub x: OneOrMany<u32>,
    pub size: OneOrMany<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Timed repetitions per cell after one discarded warm-up run.
    #[serde(default = "three")]
    pub reps: usize,
}

fn all_methods() -> Vec<String> {
    vec!["all".into()]
}

fn one_mod() -> OneOrMany<usize> {
    one(1)
}

fn zero() -> OneOrMany<u32> {
    one(0)
}

fn one_pct() -> OneOrMany<u32> {
    one(1)
}

fn three() -> usize {
    3
}

pub const HEADER: [&str; 18] = [
    "method",
    "U",
    "M",
    "D",
    "T",
    "I",
    "X",
    "size",
    "seed",
    "normalize_ms",
    "snapshot_ms",
    "ps_ms",
    "ds_ms",
    "exe_ms",
    "delta_ms",
    "total_ms",
    "delta_rows",
    "kept",
];

impl BenchSpec {
    pub fn methods(&self) -> Result<Vec<Method>, CliError> {
        let mut out = Vec::new();
        for m in &self.methods {
            if m == "all" {
                out.extend(Method::REENACTMENT);
            } else {
                out.push(m.parse().map_err(|e: histif_core::Error| CliError::Usage(e.to_string()))?);
            }
        }
        out.dedup();
        Ok(out)
    }

    /// Cartesian product of the parameter lists.
    pub fn cells(&self) -> Vec<WorkloadSpec> {
        let mut out = Vec::new();
        for u in self.u.values() {
            for m in self.m.values() {
                for d in self.d.values() {
                    for t in self.t.values() {
                        for i in self.i.values() {
                            for x in self.x.values() {
                                for size in self.size.values() {
                                    out.push(WorkloadSpec {
                                        u,
                                        m,
                                        d,
                                        t,
                                        i,
                                        x,
                                        size,
                                        seed: self.seed,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Runs every (cell, method) pair and returns one CSV row each: the
/// phase timings of the run with the median total time.
pub fn run(spec: &BenchSpec, params: &WhatIfParams) -> Result<Vec<Vec<String>>, CliError> {
    let methods = spec.methods()?;
    let reps = spec.reps.max(1);
    let mut rows = Vec::new();
    for cell in spec.cells() {
        let w = generate_workload(&cell)?;
        let store = VersionedStore::from_history(w.db, &w.history)?;
        for &method in &methods {
            let opts = WhatIfParams {
                method,
                ..params.clone()
            }
            .options(store.base())?;
            answer(&store, &w.mods, &opts)?;
            let mut runs: Vec<(f64, RunReport)> = Vec::with_capacity(reps);
            for _ in 0..reps {
                let t = Instant::now();
                let a = answer(&store, &w.mods, &opts)?;
                runs.push((t.elapsed().as_secs_f64() * 1e3, a.report));
            }
            runs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (_, r) = &runs[runs.len() / 2];
            tracing::info!(%method, U = cell.u, D = cell.d, T = cell.t, total_ms = r.timings.total_ms, "cell done");
            let t = &r.timings;
            let f = |v: f64| format!("{v:.3}");
            rows.push(vec![
                method.to_string(),
                cell.u.to_string(),
                cell.m.to_string(),
                cell.d.to_string(),
                cell.t.to_string(),
                cell.i.to_string(),
                cell.x.to_string(),
                cell.size.to_string(),
                cell.seed.to_string(),
                f(t.normalize_ms),
                f(t.snapshot_ms),
                f(t.ps_ms),
                f(t.ds_ms),
                f(t.exe_ms),
                f(t.delta_ms),
                f(t.total_ms),
                r.delta_rows.to_string(),
                r.slice.as_ref().map(|s| s.kept.len().to_string()).unwrap_or_default(),
            ]);
        }
    }
    Ok(rows)
}
