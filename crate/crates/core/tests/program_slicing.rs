use std::collections::BTreeSet;

use histif_core::compress::{compress, compress_database, CompressOptions, Compressed};
use histif_core::dsl::parse_statement;
use histif_core::fixtures::{order_db, order_history, order_mods};
use histif_core::progslice::{
    build_slice_test, check_slice, greedy_slice, restrict, single_mod_dependency, SliceIndexSet, SliceOptions, Verdict,
};
use histif_core::reenact::delta;
use histif_core::solver::SolveOptions;
use histif_core::statement::{normalize_mods, run_history, Normalized};
use histif_core::{Database, Modification, Relation, Schema, Statement, Type, Value};

fn chi_by_country() -> Vec<Compressed> {
    vec![compress(order_db().get("Order").unwrap(), Some("Country"), 2).unwrap()]
}

fn running() -> Normalized {
    normalize_mods(&order_history(), &order_mods()).unwrap()
}

fn set(v: &[usize]) -> SliceIndexSet {
    v.iter().copied().collect()
}

fn verdict(n: &Normalized, i: &[usize], chi: &[Compressed], cat: &dyn histif_core::Catalog) -> Verdict {
    let t = build_slice_test(n, &set(i), chi, cat).unwrap();
    check_slice(&t, &SliceOptions::default()).unwrap().0
}

#[test]
fn two_update_formula_has_the_expected_shape() {
    let n = normalize_mods(&order_history()[..2], &order_mods()).unwrap();
    let cat = order_db().catalog();
    let t = build_slice_test(&n, &set(&[1]), &chi_by_country(), &cat).unwrap();
    let f = "\"Order.ShippingFee@h2\" = \"Order.ShippingFee@m2\" AND \"Order.ShippingFee@hs1\" = \"Order.ShippingFee@ms1\" \
             OR NOT \"Order.ShippingFee@h2\" = \"Order.ShippingFee@m2\" AND \
             (\"Order.ShippingFee@h2\" = \"Order.ShippingFee@hs1\" AND \"Order.ShippingFee@m2\" = \"Order.ShippingFee@ms1\" \
             OR \"Order.ShippingFee@h2\" = \"Order.ShippingFee@ms1\" AND \"Order.ShippingFee@m2\" = \"Order.ShippingFee@hs1\")";
    assert_eq!(t.body.to_string(), f);
    let vars: Vec<&str> = t.defs.iter().map(|d| d.var.as_str()).collect();
    assert_eq!(
        vars,
        [
            "Order.ShippingFee@h1",
            "Order.ShippingFee@h2",
            "Order.ShippingFee@m1",
            "Order.ShippingFee@m2",
            "Order.ShippingFee@hs1",
            "Order.ShippingFee@ms1"
        ]
    );
    assert_eq!(
        check_slice(&t, &SliceOptions::default()).unwrap().0,
        Verdict::NotProven
    );
}

#[test]
fn running_example_candidates() {
    let n = running();
    let cat = order_db().catalog();
    let chi = chi_by_country();
    assert_eq!(verdict(&n, &[1], &chi, &cat), Verdict::NotProven);
    assert_eq!(verdict(&n, &[1, 2], &chi, &cat), Verdict::IsSlice);
    assert_eq!(verdict(&n, &[1, 2, 3], &chi, &cat), Verdict::IsSlice);
    assert_eq!(verdict(&n, &[1, 3], &chi, &cat), Verdict::NotProven);
}

#[test]
fn greedy_and_dependency_agree_on_running_example() {
    let n = running();
    let cat = order_db().catalog();
    let chi = chi_by_country();
    let g = greedy_slice(&n, &chi, &cat, &SliceOptions::default()).unwrap();
    assert_eq!(g.kept, vec![1, 2]);
    assert_eq!(g.removed, vec![3]);
    assert_eq!(g.solver_calls, 2);
    let d = single_mod_dependency(&n, &chi, &cat, &SliceOptions::default()).unwrap();
    assert_eq!(d.kept, vec![1, 2]);
    assert_eq!(verdict(&n, &d.kept, &chi, &cat), Verdict::IsSlice);
    let json = serde_json::to_value(&g).unwrap();
    assert_eq!(json["kept"], serde_json::json!([1, 2]));
    assert_eq!(json["calls"][0]["status"], "feasible");
}

#[test]
fn sliced_histories_keep_the_delta() {
    let n = running();
    let db = order_db();
    let full = delta(
        run_history(&n.original, &db).unwrap().get("Order").unwrap(),
        run_history(&n.modified, &db).unwrap().get("Order").unwrap(),
    );
    let i = set(&[1, 2]);
    let sliced = delta(
        run_history(&restrict(&n.original, &i), &db).unwrap().get("Order").unwrap(),
        run_history(&restrict(&n.modified, &i), &db).unwrap().get("Order").unwrap(),
    );
    assert_eq!(full, sliced);
}

#[test]
fn exhausted_budget_keeps_everything() {
    let n = running();
    let cat = order_db().catalog();
    let opts = SliceOptions {
        solve: SolveOptions::with_budget(1),
        ..SliceOptions::default()
    };
    let g = greedy_slice(&n, &chi_by_country(), &cat, &opts).unwrap();
    assert_eq!(g.kept, vec![1, 2, 3]);
}

#[test]
fn disjoint_later_statements_are_dropped() {
    let h = vec![
        parse_statement("UPDATE Order SET ShippingFee = 0 WHERE Price >= 50").unwrap(),
        parse_statement("UPDATE Order SET ShippingFee = ShippingFee + 1 WHERE Price < 10").unwrap(),
        parse_statement("DELETE FROM Order WHERE Price > 1000").unwrap(),
    ];
    let n = normalize_mods(&h, &order_mods()).unwrap();
    let cat = order_db().catalog();
    let chi = chi_by_country();
    assert_eq!(greedy_slice(&n, &chi, &cat, &SliceOptions::default()).unwrap().kept, vec![1]);
    assert_eq!(single_mod_dependency(&n, &chi, &cat, &SliceOptions::default()).unwrap().kept, vec![1]);
}

#[test]
fn false_condition_is_excluded_and_single_statement_is_kept() {
    let h = vec![
        parse_statement("UPDATE Order SET ShippingFee = 0 WHERE Price >= 50").unwrap(),
        parse_statement("UPDATE Order SET ShippingFee = 1 WHERE 1 = 2").unwrap(),
    ];
    let n = normalize_mods(&h, &order_mods()).unwrap();
    let cat = order_db().catalog();
    let d = single_mod_dependency(&n, &chi_by_country(), &cat, &SliceOptions::default()).unwrap();
    assert_eq!(d.kept, vec![1]);
    let n = normalize_mods(&h[..1], &order_mods()).unwrap();
    assert_eq!(
        greedy_slice(&n, &chi_by_country(), &cat, &SliceOptions::default()).unwrap().kept,
        vec![1]
    );
}

#[test]
fn insert_queries_are_not_applicable() {
    let mut h = order_history();
    h.push(parse_statement("INSERT INTO Order SELECT * FROM Order").unwrap());
    let n = normalize_mods(&h, &order_mods()).unwrap();
    let cat = order_db().catalog();
    let err = greedy_slice(&n, &chi_by_country(), &cat, &SliceOptions::default()).unwrap_err();
    assert!(matches!(err, histif_core::Error::NotApplicable(_)));
}

// Oracle: with every integer in the domain enumerated, the slice test is
// valid exactly when no single-tuple input yields differing deltas per the
// four-case characterization.
fn grid_db(schema: &std::sync::Arc<Schema>, vals: &[i64]) -> Vec<Vec<Value>> {
    let mut out = vec![vec![]];
    for _ in 0..schema.arity() {
        out = out
            .into_iter()
            .flat_map(|p: Vec<Value>| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(Value::Integer(v));
                    q
                })
            })
            .collect();
    }
    out
}

fn tuple_level_slice(n: &Normalized, i: &SliceIndexSet, schema: &std::sync::Arc<Schema>, vals: &[i64]) -> bool {
    let (hs, ms) = (restrict(&n.original, i), restrict(&n.modified, i));
    grid_db(schema, vals).into_iter().all(|row| {
        let db = Database::new().with(Relation::checked(schema.clone(), vec![row]).unwrap());
        let out = |h: &[Statement]| run_history(h, &db).unwrap().get("R").unwrap().clone();
        let (a, b, c, d) = (out(&n.original), out(&n.modified), out(&hs), out(&ms));
        delta(&a, &b) == delta(&c, &d)
    })
}

#[test]
fn delete_only_history_matches_enumeration() {
    let schema: std::sync::Arc<Schema> = Schema::new("R", &[("A", Type::Integer), ("B", Type::Integer)]).unwrap().into();
    let vals = [0, 1, 2, 3];
    let rows = grid_db(&schema, &vals);
    let db = Database::new().with(Relation::checked(schema.clone(), rows).unwrap());
    let chi = compress_database(&db, &BTreeSet::from(["R".to_string()]), &CompressOptions::default()).unwrap();
    let cat = db.catalog();
    let stmts = [
        "DELETE FROM R WHERE A >= 2",
        "DELETE FROM R WHERE B = 1",
        "DELETE FROM R WHERE A = 0 AND B = 0",
        "DELETE FROM R WHERE A + B > 5",
    ];
    let h: Vec<Statement> = stmts.iter().map(|s| parse_statement(s).unwrap()).collect();
    let mods = vec![Modification::Replace {
        pos: 1,
        statement: parse_statement("DELETE FROM R WHERE A >= 1").unwrap(),
    }];
    let n = normalize_mods(&h, &mods).unwrap();
    let mut agree = 0;
    for mask in 0u32..16 {
        let i: SliceIndexSet = (1..=4).filter(|p| mask & (1 << (p - 1)) != 0 || *p == 1).collect();
        let t = build_slice_test(&n, &i, &chi, &cat).unwrap();
        let proven = check_slice(&t, &SliceOptions::default()).unwrap().0 == Verdict::IsSlice;
        assert_eq!(proven, tuple_level_slice(&n, &i, &schema, &vals), "I = {:?}", i.to_vec());
        agree += 1;
    }
    assert_eq!(agree, 16);
}

#[test]
fn statements_before_the_modification_are_kept() {
    // u1 rewrites every A = 5, so the modified u2 never fires in the full
    // history; dropping u1 would let it fire
    let schema: std::sync::Arc<Schema> = Schema::new("R", &[("A", Type::Integer), ("B", Type::Integer)]).unwrap().into();
    let db = Database::new().with(Relation::checked(schema, vec![vec![5.into(), 0.into()], vec![1.into(), 0.into()]]).unwrap());
    let h = vec![
        parse_statement("UPDATE R SET A = 0 WHERE A = 5").unwrap(),
        parse_statement("UPDATE R SET B = 1 WHERE A = 5").unwrap(),
        parse_statement("UPDATE R SET B = B + 1 WHERE A = 1").unwrap(),
    ];
    let mods = vec![Modification::Replace {
        pos: 2,
        statement: parse_statement("UPDATE R SET B = 2 WHERE A = 5").unwrap(),
    }];
    let n = normalize_mods(&h, &mods).unwrap();
    let chi = compress_database(&db, &BTreeSet::from(["R".to_string()]), &CompressOptions::default()).unwrap();
    let d = single_mod_dependency(&n, &chi, &db.catalog(), &SliceOptions::default()).unwrap();
    assert_eq!(d.kept, vec![1, 2]);
    let g = greedy_slice(&n, &chi, &db.catalog(), &SliceOptions::default()).unwrap();
    assert_eq!(g.kept, vec![1, 2]);
}
