//! Random oracle cases shared by the property tests and the acceptance
//! target. Each case draws one instance from `rng` and returns a message
//! describing the first mismatch.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use histif_core::compress::{compress_database, CompressOptions};
use histif_core::dataslice::{data_slice, filter_database, DataSliceOptions, Side};
use histif_core::engine::{answer, Method, WhatIfOptions};
use histif_core::expr::Cond;
use histif_core::milp::{CompileOptions, Domains, VarDomain};
use histif_core::progslice::{
    build_slice_test, check_slice, dependency_slice, greedy_slice, restrict, SliceIndexSet, SliceOptions, Verdict,
};
use histif_core::random::{Gen, GenConfig};
use histif_core::reenact::{delta, reenact_history};
use histif_core::sat::{brute_force_sat, check_sat, Sat};
use histif_core::solver::SolveOptions;
use histif_core::statement::{apply_mods, normalize_mods, run_history};
use histif_core::symbolic::{instantiate, sym_apply, VcDatabase};
use histif_core::{CmpOp, Database, Expr, Statement, Type, Value, VersionedStore};

pub type CaseResult = Result<(), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn show(h: &[Statement]) -> String {
    histif_core::dsl::print_history(h)
}

/// Reenactment query of every relation equals running the history.
pub fn reenactment_case(rng: &mut impl Rng) -> CaseResult {
    let mut g = Gen::new(GenConfig {
        keyed: rng.gen_bool(0.5),
        inserts: true,
        insert_queries: rng.gen_bool(0.5),
        max_statements: 8,
        ..GenConfig::default()
    });
    let db = g.database(rng);
    let h = g.history(rng);
    let want = run_history(&h, &db).map_err(err)?;
    let cat = db.catalog();
    for rel in g.relations() {
        let q = reenact_history(&h, rel, &cat).map_err(err)?;
        let got = q.eval(&db).map_err(err)?;
        if !got.same_rows(want.get(rel).map_err(err)?) {
            return Err(format!("relation {rel} differs after\n{}", show(&h)));
        }
    }
    Ok(())
}

fn relation_deltas(a: &Database, b: &Database, rels: &[&str]) -> Result<BTreeMap<String, Vec<String>>, String> {
    let mut out = BTreeMap::new();
    for rel in rels {
        let d = delta(a.get(rel).map_err(err)?, b.get(rel).map_err(err)?);
        out.insert(
            rel.to_string(),
            d.iter().map(|(s, t)| format!("{}{:?}", s.symbol(), t)).collect(),
        );
    }
    Ok(out)
}

/// Filtering the snapshot by the pushed conditions keeps the delta of the
/// suffixes.
pub fn data_slicing_case(rng: &mut impl Rng) -> CaseResult {
    let mut g = Gen::new(GenConfig {
        structural_mods: rng.gen_bool(0.5),
        max_statements: 6,
        ..GenConfig::default()
    });
    let db = g.database(rng);
    let h = g.history(rng);
    let k = rng.gen_range(1..=3);
    let mods = g.modifications(rng, &h, k);
    let n = normalize_mods(&h, &mods).map_err(err)?;
    let Some(first) = n.first_modified() else {
        return Ok(());
    };
    let cat = db.catalog();
    let snap = run_history(&n.original[..first - 1], &db).map_err(err)?;
    let (ho, hm) = (&n.original[first - 1..], &n.modified[first - 1..]);
    let s = data_slice(&n, &cat, DataSliceOptions::default()).map_err(err)?;
    let full = relation_deltas(
        &run_history(ho, &snap).map_err(err)?,
        &run_history(hm, &snap).map_err(err)?,
        &g.relations(),
    )?;
    let sliced = relation_deltas(
        &run_history(ho, &filter_database(&snap, s.side(Side::Original)).map_err(err)?).map_err(err)?,
        &run_history(hm, &filter_database(&snap, s.side(Side::Modified)).map_err(err)?).map_err(err)?,
        &g.relations(),
    )?;
    if full != sliced {
        return Err(format!(
            "delta {full:?} became {sliced:?}\nhistory\n{}mods {mods:?}\nconditions\n{}",
            show(&h),
            s.dump()
        ));
    }
    Ok(())
}

fn product(vars: &[String], doms: &BTreeMap<String, Vec<Value>>) -> Vec<BTreeMap<String, Value>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        let mut next = Vec::new();
        for partial in &out {
            for x in &doms[v] {
                let mut m = partial.clone();
                m.insert(v.clone(), x.clone());
                next.push(m);
            }
        }
        out = next;
    }
    out
}

fn small_domain(rng: &mut impl Rng, domain: i64) -> Vec<Value> {
    let n = rng.gen_range(1..=4);
    let mut vals: BTreeSet<i64> = BTreeSet::new();
    while vals.len() < n {
        vals.insert(rng.gen_range(-1..=domain));
    }
    vals.into_iter().map(Value::Integer).collect()
}

/// Symbolic execution of one statement on a one-tuple VC-table yields,
/// per assignment of the input variables, the world that concrete
/// execution produces.
pub fn possible_worlds_case(rng: &mut impl Rng) -> CaseResult {
    let mut g = Gen::new(GenConfig {
        keyed: false,
        inserts: false,
        ..GenConfig::default()
    });
    let db = g.database(rng);
    let cat = db.catalog();
    let rels: BTreeSet<String> = ["R".to_string()].into();
    let vdb = VcDatabase::single_tuple(&cat, &rels).map_err(err)?;
    let kind = if rng.gen_bool(0.7) { 0 } else { 1 };
    let u = g.statement(rng, Some(kind));
    let out = sym_apply(&u, &vdb, "h", 1).map_err(err)?;
    let inputs: Vec<String> = vdb.free_variables().into_iter().collect();
    let doms: BTreeMap<String, Vec<Value>> = inputs.iter().map(|v| (v.clone(), small_domain(rng, 5))).collect();
    for lambda in product(&inputs, &doms) {
        let world = instantiate(&vdb, &lambda).map_err(err)?.ok_or("input world is empty")?;
        let want = run_history(std::slice::from_ref(&u), &world).map_err(err)?;
        let full = out.complete(&lambda).map_err(err)?;
        let got = instantiate(&out, &full)
            .map_err(err)?
            .ok_or_else(|| format!("no output world for {lambda:?} under {u}"))?;
        if !got.get("R").map_err(err)?.same_rows(want.get("R").map_err(err)?) {
            return Err(format!("world for {lambda:?} differs under {u}"));
        }
    }
    Ok(())
}

/// The compiled program and exhaustive search agree on satisfiability.
pub fn solver_case(rng: &mut impl Rng) -> CaseResult {
    let g = Gen::new(GenConfig::default());
    let nvars = rng.gen_range(1..=3);
    let names: Vec<String> = ["x", "y", "z"][..nvars].iter().map(|s| s.to_string()).collect();
    let attrs: Vec<&str> = names.iter().map(String::as_str).collect();
    let f = if rng.gen_bool(0.3) {
        let e = g.expr(rng, &attrs, 1);
        let op = [CmpOp::Eq, CmpOp::Lt, CmpOp::Ge][rng.gen_range(0..3)];
        Cond::and(vec![e.cmp(op, Expr::int(rng.gen_range(0..6))), g.cond(rng, &attrs, 1)])
    } else {
        g.cond(rng, &attrs, 2)
    };
    let mut bf = BTreeMap::new();
    let mut doms = Domains::new();
    for v in &names {
        let lo = rng.gen_range(-2..3);
        let hi = lo + rng.gen_range(0..4);
        bf.insert(v.clone(), (lo..=hi).map(Value::Integer).collect::<Vec<_>>());
        doms.insert(v.clone(), VarDomain::numeric(Type::Integer, Value::Integer(lo), Value::Integer(hi)));
    }
    let want = brute_force_sat(&f, &bf).map_err(err)?;
    let got = check_sat(&f, &doms, &CompileOptions::default(), &SolveOptions::default()).map_err(err)?;
    let ok = matches!(
        (&want, &got.sat),
        (Sat::Feasible(_), Sat::Feasible(_)) | (Sat::Infeasible, Sat::Infeasible)
    );
    if !ok {
        return Err(format!("`{f}` over {bf:?}: exhaustive {want:?}, solver {:?}", got.sat));
    }
    Ok(())
}

/// Slices returned by both methods are proven slices and keep the delta
/// on the database the compression was taken from.
pub fn slice_soundness_case(rng: &mut impl Rng) -> CaseResult {
    let mut g = Gen::new(GenConfig {
        max_statements: 6,
        ..GenConfig::default()
    });
    let db = g.database(rng);
    let h = g.history(rng);
    let mods = g.modifications(rng, &h, 1);
    let n = normalize_mods(&h, &mods).map_err(err)?;
    if n.positions.is_empty() {
        return Ok(());
    }
    let cat = db.catalog();
    let rels: BTreeSet<String> = g.relations().into_iter().map(String::from).collect();
    let chi = compress_database(&db, &rels, &CompressOptions { groups: rng.gen_range(1..=3), ..Default::default() })
        .map_err(err)?;
    let opts = SliceOptions::default();
    let full = relation_deltas(
        &run_history(&n.original, &db).map_err(err)?,
        &run_history(&n.modified, &db).map_err(err)?,
        &g.relations(),
    )?;
    let reports = [
        ("greedy", greedy_slice(&n, &chi, &cat, &opts).map_err(err)?),
        ("dependency", dependency_slice(&n, &chi, &cat, &opts).map_err(err)?),
    ];
    for (name, rep) in reports {
        let i: SliceIndexSet = rep.slice();
        if name == "greedy" {
            let t = build_slice_test(&n, &i, &chi, &cat).map_err(err)?;
            let (v, _, _) = check_slice(&t, &opts).map_err(err)?;
            if v != Verdict::IsSlice {
                return Err(format!("greedy result {:?} is not proven\n{}", i.to_vec(), show(&h)));
            }
        }
        let sliced = relation_deltas(
            &run_history(&restrict(&n.original, &i), &db).map_err(err)?,
            &run_history(&restrict(&n.modified, &i), &db).map_err(err)?,
            &g.relations(),
        )?;
        if sliced != full {
            return Err(format!(
                "{name} slice {:?} changes the delta\nhistory\n{}mods {mods:?}",
                i.to_vec(),
                show(&h)
            ));
        }
    }
    Ok(())
}

/// Every version reconstructed from checkpoints equals direct replay.
pub fn store_case(rng: &mut impl Rng) -> CaseResult {
    let mut g = Gen::new(GenConfig {
        keyed: false,
        inserts: true,
        insert_queries: true,
        max_statements: 25,
        ..GenConfig::default()
    });
    let db = g.database(rng);
    let h = g.history(rng);
    let mut s = VersionedStore::with_checkpoints(db.clone(), rng.gen_range(1..=6));
    for u in &h {
        s.append(u.clone()).map_err(err)?;
    }
    for i in 0..=h.len() {
        let direct = run_history(&h[..i], &db).map_err(err)?;
        if !s.reconstruct(i).map_err(err)?.same_content(&direct) {
            return Err(format!("version {i} differs"));
        }
    }
    Ok(())
}

/// All methods return the delta of running both histories from scratch.
pub fn method_agreement_case(rng: &mut impl Rng) -> CaseResult {
    let mut g = Gen::new(GenConfig {
        keyed: rng.gen_bool(0.7),
        inserts: rng.gen_bool(0.5),
        insert_queries: rng.gen_bool(0.3),
        structural_mods: rng.gen_bool(0.5),
        max_statements: 8,
        ..GenConfig::default()
    });
    let db = g.database(rng);
    let h = g.history(rng);
    let k = rng.gen_range(0..=2);
    let mods = g.modifications(rng, &h, k);
    let hm = apply_mods(&h, &mods).map_err(err)?;
    let want = relation_deltas(
        &run_history(&h, &db).map_err(err)?,
        &run_history(&hm, &db).map_err(err)?,
        &g.relations(),
    )?;
    let want: BTreeSet<String> = want
        .into_iter()
        .flat_map(|(r, rows)| rows.into_iter().map(move |x| format!("{r}{x}")))
        .collect();
    let store = VersionedStore::from_history(db, &h).map_err(err)?;
    for method in Method::ALL {
        let a = answer(&store, &mods, &WhatIfOptions { method, ..Default::default() }).map_err(err)?;
        let got: BTreeSet<String> = a
            .delta
            .rows
            .iter()
            .map(|r| format!("{}{}{:?}", r.relation, r.sign.symbol(), r.tuple))
            .collect();
        if got != want {
            return Err(format!(
                "{method} returned {got:?}, expected {want:?}\nhistory\n{}mods {mods:?}",
                show(&h)
            ));
        }
    }
    Ok(())
}
