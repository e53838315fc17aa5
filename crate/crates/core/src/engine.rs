//! Answering historical what-if queries: the naive replay and the
//! reenactment-based method with optional program and data slicing.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::compress::{compress_database, CompressOptions};
use crate::dataslice::{data_slice, filter_database, DataSliceOptions};
use crate::error::{Error, Result};
use crate::expr::Cond;
use crate::progslice::{dependency_slice, greedy_slice, restrict, SliceOptions, SliceReport};
use crate::reenact::{delta, reenact_history, split_inserts, strip_inserts, Delta};
use crate::relation::{Catalog, Database, Relation};
use crate::solver::StatusKind;
use crate::statement::{normalize_mods, Modification, Normalized, Statement, StatementKind};
use crate::store::VersionedStore;
use crate::value::Value;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "naive")]
    Naive,
    #[serde(rename = "r")]
    R,
    #[serde(rename = "r+ds")]
    RDs,
    #[serde(rename = "r+ps")]
    RPs,
    #[default]
    #[serde(rename = "r+ps+ds")]
    RPsDs,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Naive, Method::R, Method::RDs, Method::RPs, Method::RPsDs];
    /// The reenactment-based methods.
    pub const REENACTMENT: [Method; 4] = [Method::R, Method::RDs, Method::RPs, Method::RPsDs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::R => "r",
            Method::RDs => "r+ds",
            Method::RPs => "r+ps",
            Method::RPsDs => "r+ps+ds",
        }
    }

    pub fn program_slicing(self) -> bool {
        matches!(self, Method::RPs | Method::RPsDs)
    }

    pub fn data_slicing(self) -> bool {
        matches!(self, Method::RDs | Method::RPsDs)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Data(format!("unknown method `{s}`, expected one of naive, r, r+ds, r+ps, r+ps+ds")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slicer {
    #[default]
    Dependency,
    Greedy,
}

#[derive(Clone, Debug, Default)]
pub struct WhatIfOptions {
    pub method: Method,
    pub slicer: Slicer,
    pub compress: CompressOptions,
    /// Compile and solver settings; `keep_relations` is filled in per run.
    pub slice: SliceOptions,
    pub data_slice: DataSliceOptions,
    /// Wall-clock limit for the solver calls of one run.
    pub solver_timeout: Option<Duration>,
}

/// User-facing knobs shared by the command line and the HTTP API. Unset
/// fields keep the defaults of [`WhatIfOptions`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfParams {
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub slicer: Slicer,
    /// Compression groups per relation.
    pub groups: Option<usize>,
    /// `ATTR` for every relation having it, or `REL.ATTR`.
    pub group_by: Option<String>,
    /// Lower bound for big-M constants.
    pub big_m: Option<i64>,
    /// Branch-and-bound nodes per solver call.
    pub solver_budget: Option<u64>,
    /// Wall-clock limit for all solver calls of a run.
    pub solver_timeout_ms: Option<u64>,
}

impl WhatIfParams {
    /// Resolves the parameters against the relations of `db`.
    pub fn options(&self, db: &Database) -> Result<WhatIfOptions> {
        let mut o = WhatIfOptions {
            method: self.method,
            slicer: self.slicer,
            ..WhatIfOptions::default()
        };
        if let Some(k) = self.groups {
            if k == 0 {
                return Err(Error::Data("groups must be positive".into()));
            }
            o.compress.groups = k;
        }
        if let Some(g) = &self.group_by {
            let (rel, attr) = match g.split_once('.') {
                Some((r, a)) => (Some(r), a),
                None => (None, g.as_str()),
            };
            for r in db.relations() {
                let name = &r.schema.name;
                if rel.is_none_or(|x| x == name) && r.schema.index_of(attr).is_some() {
                    o.compress.group_by.insert(name.clone(), attr.to_string());
                }
            }
            if o.compress.group_by.is_empty() {
                return Err(Error::Data(format!("no relation has a grouping attribute `{g}`")));
            }
        }
        if let Some(m) = self.big_m {
            o.slice.compile.big_m_floor = i128::from(m.max(1));
        }
        if let Some(n) = self.solver_budget {
            o.slice.solve.node_budget = n;
        }
        o.solver_timeout = self.solver_timeout_ms.map(Duration::from_millis);
        Ok(o)
    }
}

/// Milliseconds per phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub normalize_ms: f64,
    pub snapshot_ms: f64,
    pub ps_ms: f64,
    pub ds_ms: f64,
    pub exe_ms: f64,
    pub delta_ms: f64,
    pub total_ms: f64,
}

/// An optimization that was requested but not (fully) applied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Degradation {
    /// `"ps"` or `"ds"`.
    pub optimization: String,
    pub relation: Option<String>,
    pub reason: String,
}

/// Data-slicing conditions as text, per side and relation.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConditionDump {
    pub original: BTreeMap<String, String>,
    pub modified: BTreeMap<String, String>,
    pub over_budget: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub method: Method,
    pub slicer: Option<Slicer>,
    /// Positions in the padded histories.
    pub modified_positions: Vec<usize>,
    /// Version the suffixes were evaluated over.
    pub snapshot_version: usize,
    pub relations: Vec<String>,
    /// Input rows per relation after data slicing, per side.
    pub input_rows: BTreeMap<String, BTreeMap<String, usize>>,
    /// Positions are those of the padded histories.
    pub slice: Option<SliceReport>,
    pub data_slice: Option<ConditionDump>,
    pub degraded: Vec<Degradation>,
    /// Some solver call ran out of budget or time (its answer was kept
    /// conservative).
    pub solver_unknown: bool,
    pub delta_rows: usize,
    pub timings: PhaseTimings,
}

#[derive(Clone, Debug)]
pub struct Answer {
    pub delta: Delta,
    pub report: RunReport,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Whether an error from an optimization leaves the answer computable
/// without it.
fn degradable(e: &Error) -> bool {
    matches!(
        e,
        Error::Compile(_)
            | Error::Unbounded(_)
            | Error::Unsupported(_)
            | Error::NotApplicable(_)
            | Error::DomainOverflow(_)
            | Error::Overflow(_)
    )
}

/// Dispatches on `opts.method`.
pub fn answer(store: &VersionedStore, mods: &[Modification], opts: &WhatIfOptions) -> Result<Answer> {
    match opts.method {
        Method::Naive => answer_naive(store, mods),
        _ => answer_optimized(store, mods, opts),
    }
}

struct Prepared {
    n: Normalized,
    suffix: Normalized,
    snapshot: Database,
    targets: BTreeSet<String>,
}

fn prepare(store: &VersionedStore, mods: &[Modification], report: &mut RunReport) -> Result<Option<Prepared>> {
    let t = Instant::now();
    let n = normalize_mods(store.log(), mods)?;
    report.modified_positions = n.positions.clone();
    report.timings.normalize_ms = ms(t.elapsed());
    let Some(first) = n.first_modified() else {
        report.snapshot_version = store.len();
        return Ok(None);
    };
    let t = Instant::now();
    let version = n.original_prefix(first);
    let snapshot = store.reconstruct(version)?;
    report.timings.snapshot_ms = ms(t.elapsed());
    report.snapshot_version = version;
    let suffix = n.suffix(first);
    for u in suffix.modified.iter().chain(&suffix.original) {
        u.validate(&snapshot)?;
    }
    let targets: BTreeSet<String> = suffix
        .original
        .iter()
        .chain(&suffix.modified)
        .map(|u| u.relation().to_string())
        .collect();
    report.relations = targets.iter().cloned().collect();
    Ok(Some(Prepared {
        n,
        suffix,
        snapshot,
        targets,
    }))
}

/// Replays the modified suffix over the snapshot before the first
/// modification and diffs it against the current state.
pub fn answer_naive(store: &VersionedStore, mods: &[Modification]) -> Result<Answer> {
    let start = Instant::now();
    let mut report = RunReport {
        method: Method::Naive,
        ..RunReport::default()
    };
    let mut out = Delta::default();
    if let Some(p) = prepare(store, mods, &mut report)? {
        let t = Instant::now();
        // only the relations the suffix touches need copying
        let mut copy = Database::new();
        let touched: BTreeSet<String> = p
            .suffix
            .modified
            .iter()
            .flat_map(|u| u.reads())
            .chain(p.targets.iter().cloned())
            .collect();
        for rel in &touched {
            copy.add(p.snapshot.get(rel)?.clone());
        }
        for u in &p.suffix.modified {
            u.apply(&mut copy)?;
        }
        report.timings.exe_ms = ms(t.elapsed());
        let t = Instant::now();
        for rel in &p.targets {
            let cur = store.current().get(rel)?;
            out.push_relation(cur.schema.clone(), delta(cur, copy.get(rel)?));
        }
        report.timings.delta_ms = ms(t.elapsed());
    }
    report.delta_rows = out.len();
    report.timings.total_ms = ms(start.elapsed());
    Ok(Answer { delta: out, report })
}

/// Why the per-tuple arguments behind slicing may fail for `rel`: set
/// semantics can merge distinct input tuples unless a stable key keeps
/// them apart.
fn key_guard(rel: &str, suffix: &Normalized, snapshot: &Database) -> Option<String> {
    let stmts: Vec<&Statement> = suffix
        .original
        .iter()
        .chain(&suffix.modified)
        .filter(|u| u.relation() == rel)
        .collect();
    if stmts.iter().any(|u| u.kind() == StatementKind::InsertQuery) {
        return Some("target of an insert-query".into());
    }
    let r = snapshot.get(rel).ok()?;
    let written: BTreeSet<String> = stmts.iter().flat_map(|u| u.written_attrs()).collect();
    let key: Vec<usize> = (0..r.schema.arity())
        .filter(|&i| !written.contains(&r.schema.attributes[i].name))
        .collect();
    if key.is_empty() {
        return Some("every attribute is written by an update, no stable key".into());
    }
    let project = |t: &[Value]| -> Vec<Value> { key.iter().map(|&i| t[i].clone()).collect() };
    let mut seen: HashSet<Vec<Value>> = HashSet::with_capacity(r.len());
    for t in r.iter() {
        if !seen.insert(project(t)) {
            return Some("unwritten attributes do not form a key of the snapshot".into());
        }
    }
    for u in stmts {
        if let Statement::InsertTuple { values, .. } = u {
            if values.len() == r.schema.arity() && seen.contains(&project(values)) {
                return Some("an inserted tuple reuses a key of the snapshot".into());
            }
        }
    }
    None
}

fn has_nulls(r: &Relation) -> bool {
    r.iter().any(|t| t.iter().any(Value::is_null))
}

fn differing(original: Vec<Statement>, modified: Vec<Statement>, origin: Vec<Option<usize>>) -> Normalized {
    let positions = (1..=original.len())
        .filter(|&p| original[p - 1] != modified[p - 1])
        .collect();
    Normalized {
        original,
        modified,
        positions,
        origin,
    }
}

fn shift(report: &mut SliceReport, by: usize) {
    for p in report.kept.iter_mut().chain(report.removed.iter_mut()) {
        *p += by;
    }
    for c in &mut report.calls {
        c.position += by;
    }
}

/// Reenactment-based answering: suffixes from the first modification are
/// reenacted over its snapshot, after optional program slicing (which
/// statements matter) and data slicing (which input tuples matter).
pub fn answer_optimized(store: &VersionedStore, mods: &[Modification], opts: &WhatIfOptions) -> Result<Answer> {
    let start = Instant::now();
    let method = opts.method;
    let mut report = RunReport {
        method,
        slicer: method.program_slicing().then_some(opts.slicer),
        ..RunReport::default()
    };
    let mut out = Delta::default();
    let Some(p) = prepare(store, mods, &mut report)? else {
        report.timings.total_ms = ms(start.elapsed());
        return Ok(Answer { delta: out, report });
    };
    let offset = p.n.first_modified().expect("modified") - 1;
    let cat = &p.snapshot;
    let sx = &p.suffix;
    let has_iq = sx
        .original
        .iter()
        .chain(&sx.modified)
        .any(|u| u.kind() == StatementKind::InsertQuery);
    let guards: BTreeMap<String, Option<String>> = if method.program_slicing() || method.data_slicing() {
        p.targets.iter().map(|r| (r.clone(), key_guard(r, sx, cat))).collect()
    } else {
        BTreeMap::new()
    };

    // tuple inserts move to a separate branch unless insert-queries forbid it
    let (mut left_h, mut left_m) = if has_iq {
        (sx.original.clone(), sx.modified.clone())
    } else {
        (strip_inserts(&sx.original), strip_inserts(&sx.modified))
    };

    if method.program_slicing() {
        let t = Instant::now();
        if has_iq {
            report.degraded.push(Degradation {
                optimization: "ps".into(),
                relation: None,
                reason: "insert-query in the history suffix".into(),
            });
        } else {
            let mut sopts = opts.slice.clone();
            for (rel, g) in &guards {
                let reason = match g {
                    Some(reason) => Some(reason.clone()),
                    None if has_nulls(cat.get(rel)?) => Some("relation holds nulls".into()),
                    None => None,
                };
                if let Some(reason) = reason {
                    sopts.keep_relations.insert(rel.clone());
                    report.degraded.push(Degradation {
                        optimization: "ps".into(),
                        relation: Some(rel.clone()),
                        reason,
                    });
                }
            }
            if let Some(limit) = opts.solver_timeout {
                sopts.solve.deadline = Some(t + limit);
            }
            let ns = differing(left_h.clone(), left_m.clone(), sx.origin.clone());
            let rels: BTreeSet<String> = p
                .targets
                .iter()
                .filter(|r| !sopts.keep_relations.contains(*r))
                .cloned()
                .collect();
            let sliced = compress_database(cat, &rels, &opts.compress).and_then(|chi| match opts.slicer {
                Slicer::Dependency => dependency_slice(&ns, &chi, cat, &sopts),
                Slicer::Greedy => greedy_slice(&ns, &chi, cat, &sopts),
            });
            match sliced {
                Ok(mut rep) => {
                    let i = rep.slice();
                    left_h = restrict(&left_h, &i);
                    left_m = restrict(&left_m, &i);
                    report.solver_unknown = rep.calls.iter().any(|c| c.status == Some(StatusKind::Unknown));
                    shift(&mut rep, offset);
                    report.slice = Some(rep);
                }
                Err(e) if degradable(&e) => report.degraded.push(Degradation {
                    optimization: "ps".into(),
                    relation: None,
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
        report.timings.ps_ms = ms(t.elapsed());
    }

    let (mut db_h, mut db_m) = (None, None);
    if method.data_slicing() {
        let t = Instant::now();
        let nd = differing(left_h.clone(), left_m.clone(), sx.origin.clone());
        match data_slice(&nd, cat, opts.data_slice) {
            Ok(mut conds) => {
                // merges through insert-queries cannot be ruled out statically
                let mut unguarded: BTreeMap<String, String> = guards
                    .iter()
                    .filter_map(|(r, g)| g.clone().map(|g| (r.clone(), g)))
                    .collect();
                for u in sx.original.iter().chain(&sx.modified) {
                    if u.kind() == StatementKind::InsertQuery {
                        for r in u.reads() {
                            unguarded
                                .entry(r)
                                .or_insert_with(|| format!("read by an insert-query into `{}`", u.relation()));
                        }
                    }
                }
                for (rel, reason) in unguarded {
                    conds.original.insert(rel.clone(), Cond::True);
                    conds.modified.insert(rel.clone(), Cond::True);
                    report.degraded.push(Degradation {
                        optimization: "ds".into(),
                        relation: Some(rel),
                        reason,
                    });
                }
                report.data_slice = Some(ConditionDump {
                    original: conds.original.iter().map(|(r, c)| (r.clone(), c.to_string())).collect(),
                    modified: conds.modified.iter().map(|(r, c)| (r.clone(), c.to_string())).collect(),
                    over_budget: conds.over_budget.iter().cloned().collect(),
                });
                db_h = Some(filter_database(cat, &conds.original)?);
                db_m = Some(filter_database(cat, &conds.modified)?);
            }
            Err(e) if degradable(&e) => report.degraded.push(Degradation {
                optimization: "ds".into(),
                relation: None,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
        report.timings.ds_ms = ms(t.elapsed());
    }
    let db_h = db_h.as_ref().unwrap_or(cat);
    let db_m = db_m.as_ref().unwrap_or(cat);
    for (side, db) in [("original", db_h), ("modified", db_m)] {
        report.input_rows.insert(
            side.into(),
            p.targets
                .iter()
                .filter_map(|r| db.get(r).ok().map(|x| (r.clone(), x.len())))
                .collect(),
        );
    }

    let t = Instant::now();
    let eval_side = |left: &[Statement], full: &[Statement], db: &Database| -> Result<BTreeMap<String, Relation>> {
        let mut res = BTreeMap::new();
        for rel in &p.targets {
            let mut r = reenact_history(left, rel, cat)?.eval(db)?;
            if !has_iq {
                let (_, right) = split_inserts(full, rel, cat)?;
                let extra = right.eval(cat)?;
                if !extra.is_empty() {
                    let mut rows = r.into_rows();
                    rows.extend(extra.into_rows());
                    r = Relation::from_rows(cat.require(rel)?, rows);
                }
            }
            res.insert(rel.clone(), r);
        }
        Ok(res)
    };
    let (res_h, res_m) = std::thread::scope(|s| {
        let h = s.spawn(|| eval_side(&left_h, &sx.original, db_h));
        let m = eval_side(&left_m, &sx.modified, db_m);
        (h.join().expect("evaluation thread panicked"), m)
    });
    let (res_h, res_m) = (res_h?, res_m?);
    report.timings.exe_ms = ms(t.elapsed());

    let t = Instant::now();
    for rel in &p.targets {
        out.push_relation(cat.require(rel)?, delta(&res_h[rel], &res_m[rel]));
    }
    report.timings.delta_ms = ms(t.elapsed());
    report.delta_rows = out.len();
    report.timings.total_ms = ms(start.elapsed());
    Ok(Answer { delta: out, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{order_db, order_history, order_mods};

    #[test]
    fn params_resolve_against_the_database() {
        let db = order_db();
        let p = WhatIfParams {
            group_by: Some("Country".into()),
            groups: Some(2),
            big_m: Some(100),
            ..WhatIfParams::default()
        };
        let o = p.options(&db).unwrap();
        assert_eq!(o.compress.group_by["Order"], "Country");
        assert_eq!(o.compress.groups, 2);
        assert_eq!(o.slice.compile.big_m_floor, 100);
        let bad = WhatIfParams {
            group_by: Some("Order.Nope".into()),
            ..WhatIfParams::default()
        };
        assert!(bad.options(&db).is_err());
        let p: WhatIfParams = serde_json::from_str(r#"{"method": "r+ds", "groups": 3}"#).unwrap();
        assert_eq!(p.method, Method::RDs);
        assert!(serde_json::from_str::<WhatIfParams>(r#"{"grups": 3}"#).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.name());
        }
        assert!("fast".parse::<Method>().is_err());
        assert_eq!(Method::default(), Method::RPsDs);
    }

    #[test]
    fn running_example_all_methods() {
        let store = VersionedStore::from_history(order_db(), &order_history()).unwrap();
        for m in Method::ALL {
            let opts = WhatIfOptions {
                method: m,
                ..WhatIfOptions::default()
            };
            let a = answer(&store, &order_mods(), &opts).unwrap();
            assert_eq!(a.delta.to_string(), "- Order(12, Alex, UK, 50, 5)\n+ Order(12, Alex, UK, 50, 10)\n", "{m}");
            assert!(a.report.degraded.is_empty(), "{m}: {:?}", a.report.degraded);
        }
    }

    #[test]
    fn empty_modifications_give_an_empty_delta() {
        let store = VersionedStore::from_history(order_db(), &order_history()).unwrap();
        for m in Method::ALL {
            let opts = WhatIfOptions {
                method: m,
                ..WhatIfOptions::default()
            };
            assert!(answer(&store, &[], &opts).unwrap().delta.is_empty());
        }
    }
}
