use histif_core::dsl::{parse_cond, parse_statement};
use histif_core::fixtures::{order_db, order_history, order_mods, order_row, U1_PRIME};
use histif_core::reenact::{delta, delta_by_query, reenact_history, reenact_statement, split_inserts};
use histif_core::statement::{apply_mods, apply_statement, normalize_mods, run_history};
use histif_core::{Database, Modification, Relation, Sign, Statement, Value};

fn fees(db: &Database) -> Vec<i64> {
    db.get("Order")
        .unwrap()
        .sorted()
        .iter()
        .map(|t| match &t[4] {
            Value::Integer(v) => *v,
            v => panic!("unexpected fee {v}"),
        })
        .collect()
}

#[test]
fn original_and_modified_histories() {
    let d = order_db();
    let h = order_history();
    assert_eq!(fees(&run_history(&h, &d).unwrap()), vec![8, 5, 0, 4]);
    let hm = apply_mods(&h, &order_mods()).unwrap();
    assert_eq!(fees(&run_history(&hm, &d).unwrap()), vec![8, 10, 0, 4]);
    assert_eq!(fees(&run_history(&[], &d).unwrap()), vec![5, 5, 3, 4]);
}

#[test]
fn first_update_zeroes_expensive_orders() {
    let d = apply_statement(&order_history()[0], &order_db()).unwrap();
    assert_eq!(fees(&d), vec![5, 0, 0, 4]);
    let u3 = &order_history()[2];
    let same = apply_statement(u3, &order_db()).unwrap();
    assert!(same.same_content(&order_db()));
}

#[test]
fn delta_of_running_example() {
    let d = order_db();
    let h = order_history();
    let hm = apply_mods(&h, &order_mods()).unwrap();
    let cur = run_history(&h, &d).unwrap();
    let new = run_history(&hm, &d).unwrap();
    let (r1, r2) = (cur.get("Order").unwrap(), new.get("Order").unwrap());
    let got = delta(r1, r2);
    let want = vec![
        (Sign::Minus, histif_core::relation::tuple(order_row(12, "Alex", "UK", 50, 5))),
        (Sign::Plus, histif_core::relation::tuple(order_row(12, "Alex", "UK", 50, 10))),
    ];
    assert_eq!(got, want);
    assert_eq!(delta_by_query(r1, r2).unwrap(), want);
    assert!(delta(r1, r1).is_empty());
}

#[test]
fn reenactment_matches_execution() {
    let d = order_db();
    let h = order_history();
    let cat = d.catalog();
    let q = reenact_history(&h, "Order", &cat).unwrap();
    let got = q.eval(&d).unwrap();
    assert!(got.same_rows(run_history(&h, &d).unwrap().get("Order").unwrap()));
    let u1 = reenact_statement(&h[0], &cat).unwrap();
    assert_eq!(
        u1.to_string(),
        reenact_statement(&parse_statement("UPDATE Order SET ShippingFee = 0 WHERE Price >= 50").unwrap(), &cat)
            .unwrap()
            .to_string()
    );
    assert!(u1.to_string().contains("CASE WHEN Price >= 50 THEN 0 ELSE ShippingFee END"));
}

#[test]
fn normalization_examples() {
    let h = order_history();
    let n = normalize_mods(&h, &order_mods()).unwrap();
    assert_eq!(n.original, h);
    assert_eq!(n.modified[0], parse_statement(U1_PRIME).unwrap());
    assert_eq!(n.positions, vec![1]);

    let n = normalize_mods(&h, &[]).unwrap();
    assert_eq!(n.original, n.modified);
    assert!(n.positions.is_empty());

    let n = normalize_mods(&h[..2], &[Modification::Delete { pos: 2 }]).unwrap();
    assert_eq!(n.original, h[..2].to_vec());
    assert_eq!(n.modified, vec![h[0].clone(), Statement::noop("Order")]);
    let d = order_db();
    let direct = run_history(&h[..1], &d).unwrap();
    assert!(run_history(&n.modified, &d).unwrap().same_content(&direct));
}

#[test]
fn cross_type_replace_is_split() {
    let h = order_history();
    let del = parse_statement("DELETE FROM Order WHERE Price < 25").unwrap();
    let n = normalize_mods(&h, &[Modification::Replace { pos: 2, statement: del.clone() }]).unwrap();
    assert_eq!(n.len(), 4);
    assert_eq!(n.positions, vec![2, 3]);
    let d = order_db();
    let direct = run_history(&apply_mods(&h, &[Modification::Replace { pos: 2, statement: del }]).unwrap(), &d).unwrap();
    assert!(run_history(&n.modified, &d).unwrap().same_content(&direct));
    assert!(run_history(&n.original, &d).unwrap().same_content(&run_history(&h, &d).unwrap()));
}

#[test]
fn tuple_independence_classification() {
    for u in order_history() {
        assert!(u.is_tuple_independent());
    }
    assert!(Statement::noop("R").is_tuple_independent());
    assert!(parse_statement("INSERT INTO R VALUES (1, 'a')").unwrap().is_tuple_independent());
    let iq = parse_statement("INSERT INTO R SELECT B AS A, B FROM R JOIN S ON A = C").unwrap();
    assert!(!iq.is_tuple_independent());
}

#[test]
fn insert_split_with_tuple_insert() {
    let d = order_db();
    let mut h = vec![parse_statement("INSERT INTO Order VALUES (15, 'Ann', 'UK', 70, 6)").unwrap()];
    h.extend(order_history());
    let cat = d.catalog();
    let (l, r) = split_inserts(&h, "Order", &cat).unwrap();
    let mut got: Relation = l.eval(&d).unwrap();
    for t in r.eval(&d).unwrap().iter() {
        got.insert(t.clone());
    }
    assert!(got.same_rows(run_history(&h, &d).unwrap().get("Order").unwrap()));
    assert_eq!(r.eval(&d).unwrap().len(), 1);
    let c = parse_cond("Price >= 50").unwrap();
    assert_eq!(c.to_string(), "Price >= 50");
}
