//! Synthetic workloads: a keyed relation, a history whose first statement
//! is modified, and a controlled share of statements overlapping it.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::parse_statement;
use crate::error::{Error, Result};
use crate::relation::{tuple, Database, Relation};
use crate::statement::{Modification, Statement};
use crate::value::{Schema, Type, Value};

pub const RELATION: &str = "W";
const CATEGORIES: [&str; 5] = ["north", "south", "east", "west", "central"];

/// Generator parameters. Percentages are of the statement count (`d` is of
/// the unmodified updates) and of the relation size (`t`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    #[serde(rename = "U")]
    pub u: usize,
    #[serde(rename = "M", default = "one")]
    pub m: usize,
    #[serde(rename = "D", default)]
    pub d: u32,
    #[serde(rename = "T", default = "one_pct")]
    pub t: u32,
    #[serde(rename = "I", default)]
    pub i: u32,
    #[serde(rename = "X", default)]
    pub x: u32,
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn one_pct() -> u32 {
    1
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            u: 10,
            m: 1,
            d: 10,
            t: 1,
            i: 0,
            x: 0,
            size: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub spec: WorkloadSpec,
    pub db: Database,
    pub history: Vec<Statement>,
    pub mods: Vec<Modification>,
    /// Positions of the unmodified updates built to overlap the modified ones.
    pub dependent: Vec<usize>,
}

pub fn workload_schema() -> Arc<Schema> {
    Arc::new(
        Schema::new(
            RELATION,
            &[
                ("K", Type::Integer),
                ("Cat", Type::Text),
                ("A", Type::Integer),
                ("B", Type::Integer),
                ("C", Type::Integer),
            ],
        )
        .expect("valid schema"),
    )
}

fn pct(p: u32, of: usize) -> usize {
    (p as usize * of + 50) / 100
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("D", self.d), ("T", self.t), ("I", self.i), ("X", self.x)] {
            if v > 100 {
                return Err(Error::Workload(format!("{name} = {v} is not a percentage")));
            }
        }
        if self.i + self.x > 100 {
            return Err(Error::Workload(format!("I + X = {} exceeds 100", self.i + self.x)));
        }
        if self.size == 0 {
            return Err(Error::Workload("size must be positive".into()));
        }
        let (_, _, upd) = self.counts();
        if self.u > 0 && self.m > upd {
            return Err(Error::Workload(format!(
                "M = {} modifications but only {upd} updates",
                self.m
            )));
        }
        Ok(())
    }

    /// (inserts, deletes, updates).
    pub fn counts(&self) -> (usize, usize, usize) {
        let ins = pct(self.i, self.u);
        let del = pct(self.x, self.u).min(self.u - ins);
        (ins, del, self.u - ins - del)
    }

    /// Key range width of one statement.
    pub fn span(&self) -> usize {
        if self.t == 0 {
            (self.size / 1000).max(1)
        } else {
            pct(self.t, self.size).max(1)
        }
    }
}

fn range(lo: usize, hi: usize) -> String {
    format!("K >= {lo} AND K < {hi}")
}

fn set_clause(rng: &mut ChaCha8Rng) -> String {
    let c = rng.gen_range(1..50);
    match rng.gen_range(0..4) {
        0 => format!("A = A + {c}"),
        1 => "B = B + A".to_string(),
        2 => format!("C = {c}"),
        _ => format!("B = B - {c}"),
    }
}

/// Start of a `width` range inside `[0, size)` avoiding `[lo, hi)`, if any.
fn disjoint_start(rng: &mut ChaCha8Rng, size: usize, lo: usize, hi: usize, width: usize) -> Option<(usize, usize)> {
    let left = lo.checked_sub(width).map(|m| (0, m));
    let right = (hi + width <= size).then(|| (hi, size - width));
    let parts: Vec<(usize, usize)> = left.into_iter().chain(right).collect();
    if let Some(&(a, b)) = parts.choose(rng) {
        let s = rng.gen_range(a..=b);
        return Some((s, s + width));
    }
    // shrink to the larger gap
    let (a, b) = if lo >= size - hi { (0, lo) } else { (hi, size) };
    (b > a).then_some((a, b))
}

pub fn generate_workload(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let schema = workload_schema();
    let mut rel = Relation::empty(schema.clone());
    for k in 0..spec.size {
        rel.insert(tuple(vec![
            Value::Integer(k as i64),
            Value::text(CATEGORIES[rng.gen_range(0..CATEGORIES.len())]),
            Value::Integer(rng.gen_range(0..1000)),
            Value::Integer(rng.gen_range(0..1000)),
            Value::Integer(rng.gen_range(0..100)),
        ]));
    }
    let db = Database::new().with(rel);
    if spec.u == 0 {
        return Ok(Workload {
            spec: spec.clone(),
            db,
            history: vec![],
            mods: vec![],
            dependent: vec![],
        });
    }

    let (n_ins, n_del, n_upd) = spec.counts();
    let span = spec.span().min(spec.size);
    let widen = span / 10 + 1;
    let lo0 = rng.gen_range(0..=spec.size - span);
    // tuples either version of a modified statement can touch
    let (dep_lo, dep_hi) = (lo0, (lo0 + span + widen).min(spec.size));

    // (statement, replacement, dependent)
    let mut mods = Vec::new();
    for _ in 0..spec.m {
        let set = set_clause(&mut rng);
        let orig = format!("UPDATE {RELATION} SET {set} WHERE {}", range(lo0, lo0 + span));
        let repl = format!("UPDATE {RELATION} SET {set} WHERE {}", range(lo0, dep_hi));
        mods.push((orig, repl));
    }
    let rest_upd = n_upd.saturating_sub(spec.m);
    let n_dep = pct(spec.d, rest_upd);
    let mut others: Vec<(String, bool)> = Vec::new();
    for _ in 0..n_dep {
        let half = span / 2;
        let s = rng.gen_range(lo0.saturating_sub(half)..=lo0 + half).min(spec.size - span);
        let stmt = format!("UPDATE {RELATION} SET {} WHERE {}", set_clause(&mut rng), range(s, s + span));
        others.push((stmt, true));
    }
    for _ in n_dep..rest_upd {
        let cond = match disjoint_start(&mut rng, spec.size, dep_lo, dep_hi, span) {
            Some((a, b)) => range(a, b),
            None => "K < 0".to_string(),
        };
        others.push((format!("UPDATE {RELATION} SET {} WHERE {cond}", set_clause(&mut rng)), false));
    }
    for _ in 0..n_del {
        let cond = match disjoint_start(&mut rng, spec.size, dep_lo, dep_hi, (span / 10).max(1)) {
            Some((a, b)) => range(a, b),
            None => "K < 0".to_string(),
        };
        others.push((format!("DELETE FROM {RELATION} WHERE {cond}"), false));
    }
    for j in 0..n_ins {
        let stmt = format!(
            "INSERT INTO {RELATION} VALUES ({}, '{}', {}, {}, {})",
            spec.size + j,
            CATEGORIES[rng.gen_range(0..CATEGORIES.len())],
            rng.gen_range(0..1000),
            rng.gen_range(0..1000),
            rng.gen_range(0..100)
        );
        others.push((stmt, false));
    }

    // first modified statement leads; the rest are shuffled together
    let mut tail: Vec<(String, Option<String>, bool)> = others.into_iter().map(|(s, d)| (s, None, d)).collect();
    let mut mods_iter = mods.into_iter();
    let first = mods_iter.next().expect("M >= 1 when U > 0");
    tail.extend(mods_iter.map(|(o, r)| (o, Some(r), false)));
    tail.shuffle(&mut rng);
    let mut history = Vec::with_capacity(spec.u);
    let mut out_mods = Vec::new();
    let mut dependent = Vec::new();
    for (k, (stmt, repl, dep)) in std::iter::once((first.0, Some(first.1), false)).chain(tail).enumerate() {
        history.push(parse_statement(&stmt)?);
        if let Some(r) = repl {
            out_mods.push(Modification::Replace {
                pos: k + 1,
                statement: parse_statement(&r)?,
            });
        }
        if dep {
            dependent.push(k + 1);
        }
    }
    if spec.m == 0 {
        out_mods.clear();
    }
    Ok(Workload {
        spec: spec.clone(),
        db,
        history,
        mods: out_mods,
        dependent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statement::StatementKind;

    #[test]
    fn one_dependent_statement_touching_a_tenth() {
        let w = generate_workload(&WorkloadSpec {
            u: 10,
            m: 1,
            d: 10,
            t: 10,
            size: 1000,
            seed: 42,
            ..WorkloadSpec::default()
        })
        .unwrap();
        assert_eq!(w.history.len(), 10);
        assert_eq!(w.mods.len(), 1);
        assert_eq!(w.dependent.len(), 1);
        let u = &w.history[w.dependent[0] - 1];
        let r = w.db.get(RELATION).unwrap();
        let c = u.condition().bind(&r.schema.names()).unwrap();
        let matched = r.iter().filter(|t| c.eval(t).unwrap()).count();
        assert_eq!(matched, 100);
    }

    #[test]
    fn mixed_counts() {
        let w = generate_workload(&WorkloadSpec {
            u: 100,
            i: 10,
            x: 10,
            ..WorkloadSpec::default()
        })
        .unwrap();
        let count = |k| w.history.iter().filter(|u| u.kind() == k).count();
        assert_eq!(count(StatementKind::InsertTuple), 10);
        assert_eq!(count(StatementKind::Delete), 10);
        assert_eq!(count(StatementKind::Update), 80);
    }

    #[test]
    fn deterministic_and_validated() {
        let s = WorkloadSpec {
            u: 20,
            m: 2,
            seed: 7,
            ..WorkloadSpec::default()
        };
        let (a, b) = (generate_workload(&s).unwrap(), generate_workload(&s).unwrap());
        assert_eq!(a.history, b.history);
        assert_eq!(a.mods, b.mods);
        assert_eq!(a.mods.len(), 2);
        let empty = generate_workload(&WorkloadSpec { u: 0, ..s.clone() }).unwrap();
        assert!(empty.history.is_empty() && empty.mods.is_empty());
        assert!(generate_workload(&WorkloadSpec { i: 60, x: 50, ..s.clone() }).is_err());
        assert!(generate_workload(&WorkloadSpec { u: 2, m: 3, ..s }).is_err());
    }
}
