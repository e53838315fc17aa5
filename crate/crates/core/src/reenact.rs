//! Reenactment of histories as queries, signed deltas and the insert split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Cond, Expr};
use crate::query::{ProjItem, Query};
use crate::relation::{Catalog, Database, Relation, Tuple};
use crate::statement::Statement;
use crate::value::{Schema, Value};

/// Query computing `u(R)` from `R` (and, for insert-queries, other relations).
pub fn reenact_statement(u: &Statement, cat: &dyn Catalog) -> Result<Query> {
    let rel = u.relation();
    let base = Query::base(rel);
    Ok(match u {
        Statement::Update { cond, .. } => {
            let schema = cat.require(rel)?;
            let items = schema
                .attributes
                .iter()
                .map(|a| {
                    let set = u.set_expr(&a.name);
                    let expr = if set.as_attr() == Some(a.name.as_str()) || cond.is_false() {
                        Expr::attr(&a.name)
                    } else if cond.is_true() {
                        set
                    } else {
                        Expr::case(cond.clone(), set, Expr::attr(&a.name))
                    };
                    ProjItem::new(&a.name, expr)
                })
                .collect();
            Query::project(items, base)
        }
        Statement::Delete { cond, .. } => Query::select(Cond::not(cond.clone()), base),
        Statement::InsertTuple { values, .. } => Query::union(base, Query::Singleton { values: values.clone() }),
        Statement::InsertQuery { query, .. } => Query::union(base, query.clone()),
        Statement::Noop { .. } => base,
    })
}

/// Per-relation reenactment queries for the whole history, starting from
/// the given input queries (base relations when absent).
pub fn reenact_all_from(
    h: &[Statement],
    cat: &dyn Catalog,
    inputs: &BTreeMap<String, Query>,
) -> Result<BTreeMap<String, Query>> {
    let mut current = inputs.clone();
    for u in h {
        let q = reenact_statement(u, cat)?;
        let composed = q.substitute_bases(&|name| Some(current.get(name).cloned().unwrap_or_else(|| Query::base(name))));
        current.insert(u.relation().to_string(), composed);
    }
    Ok(current)
}

pub fn reenact_all(h: &[Statement], cat: &dyn Catalog) -> Result<BTreeMap<String, Query>> {
    reenact_all_from(h, cat, &BTreeMap::new())
}

/// `R(H)`: the query whose result over `D` equals `H(D).R`.
pub fn reenact_history(h: &[Statement], rel: &str, cat: &dyn Catalog) -> Result<Query> {
    Ok(reenact_all(h, cat)?.remove(rel).unwrap_or_else(|| Query::base(rel)))
}

/// Replaces tuple inserts by no-ops so positions stay aligned.
pub fn strip_inserts(h: &[Statement]) -> Vec<Statement> {
    h.iter()
        .map(|u| match u {
            Statement::InsertTuple { relation, .. } => Statement::noop(relation),
            u => u.clone(),
        })
        .collect()
}

/// Splits `R(H)` into a branch over the stored relation without tuple
/// inserts and a branch that only carries the inserted tuples.
///
/// Requires a history without insert-queries; with none, `left ∪ right`
/// equals `R(H)` by tuple independence.
pub fn split_inserts(h: &[Statement], rel: &str, cat: &dyn Catalog) -> Result<(Query, Query)> {
    if h.iter().any(|u| matches!(u, Statement::InsertQuery { .. })) {
        return Err(Error::NotApplicable("insert split with insert-queries in the history".into()));
    }
    let left = reenact_history(&strip_inserts(h), rel, cat)?;
    let has_inserts = h
        .iter()
        .any(|u| matches!(u, Statement::InsertTuple { relation, .. } if relation == rel));
    let right = if has_inserts {
        let empty: BTreeMap<String, Query> = h
            .iter()
            .map(|u| (u.relation().to_string(), Query::empty_of(u.relation())))
            .collect();
        reenact_all_from(h, cat, &empty)?
            .remove(rel)
            .unwrap_or_else(|| Query::empty_of(rel))
    } else {
        Query::empty_of(rel)
    };
    Ok((left, right))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

impl Sign {
    pub fn negate(self) -> Sign {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Minus => "-",
            Sign::Plus => "+",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DeltaRow {
    pub relation: String,
    pub sign: Sign,
    pub tuple: Tuple,
}

/// Signed symmetric difference of two database states, kept sorted by
/// relation, sign (`-` first) and tuple.
#[derive(Clone, Debug, Default)]
pub struct Delta {
    pub schemas: BTreeMap<String, Arc<Schema>>,
    pub rows: Vec<DeltaRow>,
}

/// Native `Δ(r1, r2)`: `-t` for `t ∈ r1 ∖ r2`, `+t` for `t ∈ r2 ∖ r1`.
pub fn delta(r1: &Relation, r2: &Relation) -> Vec<(Sign, Tuple)> {
    let mut out: Vec<(Sign, Tuple)> = r1
        .iter()
        .filter(|t| !r2.contains(t))
        .map(|t| (Sign::Minus, t.clone()))
        .chain(r2.iter().filter(|t| !r1.contains(t)).map(|t| (Sign::Plus, t.clone())))
        .collect();
    out.sort();
    out
}

/// `Δ` computed by the algebra query `(R1 − R2) ∪ (R2 − R1)` with sign tags.
pub fn delta_by_query(r1: &Relation, r2: &Relation) -> Result<Vec<(Sign, Tuple)>> {
    if r1.schema.arity() != r2.schema.arity() {
        return Err(Error::schema("delta over relations of different arity"));
    }
    let cur = Schema {
        name: "cur".into(),
        ..(*r1.schema).clone()
    };
    let new = Schema {
        name: "new".into(),
        ..(*r1.schema).clone()
    };
    let db = Database::new()
        .with(Relation::from_rows(Arc::new(cur), r1.rows().iter().cloned()))
        .with(Relation::from_rows(Arc::new(new), r2.rows().iter().cloned()));
    let minus = Query::difference(Query::base("cur"), Query::base("new")).eval(&db)?;
    let plus = Query::difference(Query::base("new"), Query::base("cur")).eval(&db)?;
    let mut out: Vec<(Sign, Tuple)> = minus
        .into_rows()
        .into_iter()
        .map(|t| (Sign::Minus, t))
        .chain(plus.into_rows().into_iter().map(|t| (Sign::Plus, t)))
        .collect();
    out.sort();
    Ok(out)
}

impl Delta {
    pub fn push_relation(&mut self, schema: Arc<Schema>, rows: Vec<(Sign, Tuple)>) {
        let name = schema.name.clone();
        self.rows.extend(rows.into_iter().map(|(sign, tuple)| DeltaRow {
            relation: name.clone(),
            sign,
            tuple,
        }));
        self.schemas.insert(name, schema);
        self.rows.sort();
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Same signed rows (schemas are ignored).
    pub fn same_rows(&self, other: &Delta) -> bool {
        self.rows == other.rows
    }

    pub fn relations(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.relation.as_str()).collect()
    }

    fn rendered(&self, row: &DeltaRow) -> Vec<String> {
        match self.schemas.get(&row.relation) {
            Some(s) => row
                .tuple
                .iter()
                .zip(&s.attributes)
                .map(|(v, a)| v.render(a.ty))
                .collect(),
            None => row.tuple.iter().map(|v| v.to_string()).collect(),
        }
    }

    /// CSV: per relation a `# relation: R` line, a `sign,...` header, then rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for rel in self.relations() {
            out.push_str(&format!("# relation: {rel}\n"));
            let mut w = csv::WriterBuilder::new().from_writer(vec![]);
            let mut header = vec!["sign".to_string()];
            if let Some(s) = self.schemas.get(rel) {
                header.extend(s.names());
            }
            w.write_record(&header)?;
            for row in self.rows.iter().filter(|r| r.relation == rel) {
                let mut rec = vec![row.sign.symbol().to_string()];
                rec.extend(self.rendered(row));
                w.write_record(&rec)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
            out.push_str(&String::from_utf8_lossy(&bytes));
        }
        Ok(out)
    }

    /// One JSON object per line: `{"relation", "sign", "tuple"}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let obj = self.row_json(row);
            out.push_str(&obj.to_string());
            out.push('\n');
        }
        out
    }

    pub fn row_json(&self, row: &DeltaRow) -> serde_json::Value {
        let tuple: Vec<serde_json::Value> = match self.schemas.get(&row.relation) {
            Some(s) => row
                .tuple
                .iter()
                .zip(&s.attributes)
                .map(|(v, a)| match v {
                    Value::Decimal(_) | Value::Integer(_) if matches!(a.ty, crate::value::Type::Decimal(_)) => {
                        serde_json::Value::String(v.render(a.ty))
                    }
                    v => v.to_json(),
                })
                .collect(),
            None => row.tuple.iter().map(Value::to_json).collect(),
        };
        serde_json::json!({
            "relation": row.relation,
            "sign": row.sign.symbol(),
            "tuple": tuple,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.rows.iter().map(|r| self.row_json(r)).collect())
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(f, "{} {}({})", r.sign, r.relation, self.rendered(r).join(", "))?;
        }
        Ok(())
    }
}
