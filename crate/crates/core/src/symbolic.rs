//! Virtual C-tables: symbolic tuples over variables, local conditions and a
//! global condition, with possible-world instantiation and symbolic
//! statement execution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{simplify_cond, simplify_expr, Cond, Expr};
use crate::relation::{tuple, Catalog, Database, Relation};
use crate::statement::Statement;
use crate::value::{Schema, Value};

/// Version-0 variable for `rel.attr`, shared by every symbolic run.
pub fn input_var(rel: &str, attr: &str) -> String {
    format!("{rel}.{attr}")
}

/// Fresh variable for `attr` of tuple `k` after statement `step` of run `tag`.
pub fn fresh_var(rel: &str, attr: &str, tag: &str, step: usize, k: usize) -> String {
    if k == 0 {
        format!("{rel}.{attr}@{tag}{step}")
    } else {
        format!("{rel}.{attr}@{tag}{step}#{k}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VcTuple {
    pub values: Vec<Expr>,
    pub local: Cond,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VcTable {
    pub schema: Arc<Schema>,
    pub tuples: Vec<VcTuple>,
}

/// Global conjunct `var = expr` introduced by a symbolic update.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Definition {
    pub var: String,
    pub expr: Expr,
}

impl Definition {
    pub fn as_cond(&self) -> Cond {
        Expr::attr(&self.var).eq(self.expr.clone())
    }
}

/// A VC-database. The global condition is the conjunction of `defs` and
/// `constraints`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VcDatabase {
    pub tables: BTreeMap<String, VcTable>,
    pub defs: Vec<Definition>,
    pub constraints: Vec<Cond>,
}

impl VcDatabase {
    /// One tuple of version-0 variables per relation, local condition true.
    pub fn single_tuple(cat: &dyn Catalog, rels: &BTreeSet<String>) -> Result<VcDatabase> {
        let mut tables = BTreeMap::new();
        for r in rels {
            let schema = cat.require(r)?;
            let values = schema.attributes.iter().map(|a| Expr::attr(input_var(r, &a.name))).collect();
            tables.insert(
                r.clone(),
                VcTable {
                    schema,
                    tuples: vec![VcTuple { values, local: Cond::True }],
                },
            );
        }
        Ok(VcDatabase {
            tables,
            ..VcDatabase::default()
        })
    }

    pub fn constrain(&mut self, c: Cond) {
        if !c.is_true() {
            self.constraints.push(c);
        }
    }

    /// `Φ` as a single condition.
    pub fn global(&self) -> Cond {
        Cond::and(
            self.defs
                .iter()
                .map(Definition::as_cond)
                .chain(self.constraints.iter().cloned())
                .collect(),
        )
    }

    pub fn table(&self, rel: &str) -> Result<&VcTable> {
        self.tables
            .get(rel)
            .ok_or_else(|| Error::schema(format!("no symbolic table `{rel}`")))
    }

    /// Every variable mentioned anywhere.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for t in self.tables.values() {
            for tup in &t.tuples {
                for v in &tup.values {
                    v.collect_attrs(&mut out);
                }
                tup.local.collect_attrs(&mut out);
            }
        }
        for d in &self.defs {
            out.insert(d.var.clone());
            d.expr.collect_attrs(&mut out);
        }
        for c in &self.constraints {
            c.collect_attrs(&mut out);
        }
        out
    }

    /// Variables not defined by a global definition.
    pub fn free_variables(&self) -> BTreeSet<String> {
        let defined: BTreeSet<&str> = self.defs.iter().map(|d| d.var.as_str()).collect();
        self.variables()
            .into_iter()
            .filter(|v| !defined.contains(v.as_str()))
            .collect()
    }

    /// Extends an assignment of the free variables with the values forced
    /// by the definitions.
    pub fn complete(&self, free: &BTreeMap<String, Value>) -> Result<BTreeMap<String, Value>> {
        let mut env = free.clone();
        for d in &self.defs {
            let v = d.expr.eval(&env)?;
            env.insert(d.var.clone(), v);
        }
        Ok(env)
    }
}

/// The world for assignment `lambda`, or `None` when `Φ` is false under it.
///
/// A definition holds when the variable's value equals its expression's
/// value, with Null equal to Null.
pub fn instantiate(vdb: &VcDatabase, lambda: &BTreeMap<String, Value>) -> Result<Option<Database>> {
    for d in &vdb.defs {
        let want = d.expr.eval(lambda)?;
        let got = lambda
            .get(&d.var)
            .ok_or_else(|| Error::schema(format!("unassigned variable `{}`", d.var)))?;
        if *got != want {
            return Ok(None);
        }
    }
    for c in &vdb.constraints {
        if !c.eval(lambda)? {
            return Ok(None);
        }
    }
    let mut db = Database::new();
    for t in vdb.tables.values() {
        let mut rel = Relation::empty(t.schema.clone());
        for tup in &t.tuples {
            if tup.local.eval(lambda)? {
                let vals = tup.values.iter().map(|e| e.eval(lambda)).collect::<Result<Vec<_>>>()?;
                rel.insert(tuple(vals));
            }
        }
        db.add(rel);
    }
    Ok(Some(db))
}

/// Applies `u` symbolically as statement `step` of run `tag`.
pub fn sym_apply(u: &Statement, vdb: &VcDatabase, tag: &str, step: usize) -> Result<VcDatabase> {
    let mut out = vdb.clone();
    let rel = u.relation();
    if matches!(u, Statement::Noop { .. }) {
        return Ok(out);
    }
    let table = out
        .tables
        .get_mut(rel)
        .ok_or_else(|| Error::schema(format!("no symbolic table `{rel}`")))?;
    let names = table.schema.names();
    match u {
        Statement::Update { cond, .. } => {
            let written = u.written_attrs();
            for (k, tup) in table.tuples.iter_mut().enumerate() {
                let prev = tup.values.clone();
                let bind = bind_tuple(&names, &prev);
                let theta = simplify_cond(&cond.subst_attrs(&bind));
                if theta.is_false() {
                    continue;
                }
                let mut next = tup.values.clone();
                for (i, a) in names.iter().enumerate() {
                    if !written.contains(a) {
                        continue;
                    }
                    let set = u.set_expr(a).subst_attrs(&bind);
                    let def = simplify_expr(&Expr::case(theta.clone(), set, prev[i].clone()));
                    next[i] = match def {
                        Expr::Const { .. } | Expr::Attr { .. } => def,
                        def => {
                            let var = fresh_var(rel, a, tag, step, k);
                            out.defs.push(Definition { var: var.clone(), expr: def });
                            Expr::attr(var)
                        }
                    };
                }
                tup.values = next;
            }
        }
        Statement::Delete { cond, .. } => {
            for tup in table.tuples.iter_mut() {
                let theta = cond.subst_attrs(&bind_tuple(&names, &tup.values));
                tup.local = simplify_cond(&tup.local.clone().and2(Cond::not(theta)));
            }
        }
        Statement::InsertTuple { values, .. } => table.tuples.push(VcTuple {
            values: values.iter().cloned().map(Expr::lit).collect(),
            local: Cond::True,
        }),
        Statement::InsertQuery { .. } => {
            return Err(Error::Unsupported("symbolic execution of insert-queries".into()))
        }
        Statement::Noop { .. } => {}
    }
    Ok(out)
}

/// Runs a history symbolically; statement `i` (1-based) gets step `i`.
pub fn sym_run(h: &[Statement], vdb: &VcDatabase, tag: &str) -> Result<VcDatabase> {
    let mut cur = vdb.clone();
    for (i, u) in h.iter().enumerate() {
        cur = sym_apply(u, &cur, tag, i + 1)?;
    }
    Ok(cur)
}

fn bind_tuple<'a>(names: &'a [String], values: &'a [Expr]) -> impl Fn(&str) -> Option<Expr> + 'a {
    move |a| names.iter().position(|n| n == a).map(|i| values[i].clone())
}

impl fmt::Display for VcDatabase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, t) in &self.tables {
            writeln!(f, "{name}({}):", t.schema.names().join(", "))?;
            for tup in &t.tuples {
                let vals: Vec<String> = tup.values.iter().map(|e| e.to_string()).collect();
                writeln!(f, "  ({}) | {}", vals.join(", "), tup.local)?;
            }
        }
        writeln!(f, "global:")?;
        for d in &self.defs {
            writeln!(f, "  {}", d.as_cond())?;
        }
        for c in &self.constraints {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_statement;
    use crate::fixtures::{order_db, order_history};

    fn init() -> VcDatabase {
        let cat = order_db().catalog();
        VcDatabase::single_tuple(&cat, &["Order".to_string()].into()).unwrap()
    }

    fn lambda(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn updates_reuse_untouched_variables() {
        let h = order_history();
        let v = sym_run(&h[..2], &init(), "h").unwrap();
        let t = &v.tables["Order"].tuples[0];
        assert_eq!(t.values[3], Expr::attr("Order.Price"));
        assert_eq!(t.values[4], Expr::attr("Order.ShippingFee@h2"));
        assert_eq!(v.defs.len(), 2);
        assert_eq!(
            v.defs[0].as_cond().to_string(),
            "\"Order.ShippingFee@h1\" = CASE WHEN \"Order.Price\" >= 50 THEN 0 ELSE \"Order.ShippingFee\" END"
        );
    }

    #[test]
    fn definitions_force_fees() {
        let h = order_history();
        let v = sym_run(&h[..2], &init(), "h").unwrap();
        let free = lambda(&[
            ("Order.ID", 1.into()),
            ("Order.Customer", "c".into()),
            ("Order.Country", "UK".into()),
            ("Order.Price", 60.into()),
            ("Order.ShippingFee", 7.into()),
        ]);
        let full = v.complete(&free).unwrap();
        assert_eq!(full["Order.ShippingFee@h1"], 0.into());
        assert_eq!(full["Order.ShippingFee@h2"], 5.into());
        let world = instantiate(&v, &full).unwrap().unwrap();
        let rows = world.get("Order").unwrap().sorted();
        assert_eq!(rows[0][4], 5.into());
        let mut wrong = full.clone();
        wrong.insert("Order.ShippingFee@h2".into(), 6.into());
        assert!(instantiate(&v, &wrong).unwrap().is_none());
    }

    #[test]
    fn deletes_strengthen_the_local_condition() {
        let u = parse_statement("DELETE FROM Order WHERE Price >= 50").unwrap();
        let v = sym_apply(&u, &init(), "h", 1).unwrap();
        assert_eq!(v.tables["Order"].tuples[0].local.to_string(), "NOT \"Order.Price\" >= 50");
        let noop = sym_apply(&Statement::noop("Order"), &v, "h", 2).unwrap();
        assert_eq!(noop, v);
    }

    #[test]
    fn insert_queries_are_rejected() {
        let u = parse_statement("INSERT INTO Order SELECT * FROM Order").unwrap();
        assert!(matches!(sym_apply(&u, &init(), "h", 1), Err(Error::Unsupported(_))));
    }
}
