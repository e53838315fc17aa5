//! Relational algebra queries and a set-semantics evaluator.

use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{fmt_ident, fmt_value, BoundCond, BoundExpr, Cond, Expr};
use crate::relation::{tuple, Catalog, Database, Relation, Tuple};
use crate::value::{ArithOp, Attribute, Schema, Type, Value, DEFAULT_SCALE};

/// Output column of a generalized projection.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProjItem {
    pub name: String,
    pub expr: Expr,
}

impl ProjItem {
    pub fn new(name: impl Into<String>, expr: Expr) -> ProjItem {
        ProjItem {
            name: name.into(),
            expr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Query {
    Base {
        relation: String,
    },
    /// One constant tuple; columns are named `column1..n`.
    Singleton {
        values: Vec<Value>,
    },
    Select {
        cond: Cond,
        input: Box<Query>,
    },
    Project {
        items: Vec<ProjItem>,
        input: Box<Query>,
    },
    Union {
        left: Box<Query>,
        right: Box<Query>,
    },
    Difference {
        left: Box<Query>,
        right: Box<Query>,
    },
    /// Equi-join; attribute names of the two inputs must be disjoint.
    Join {
        left: Box<Query>,
        right: Box<Query>,
        on: Vec<(String, String)>,
    },
}

impl Query {
    pub fn base(rel: impl Into<String>) -> Query {
        Query::Base {
            relation: rel.into(),
        }
    }

    pub fn select(cond: Cond, input: Query) -> Query {
        Query::Select {
            cond,
            input: Box::new(input),
        }
    }

    pub fn project(items: Vec<ProjItem>, input: Query) -> Query {
        Query::Project {
            items,
            input: Box::new(input),
        }
    }

    pub fn union(l: Query, r: Query) -> Query {
        Query::Union {
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    pub fn difference(l: Query, r: Query) -> Query {
        Query::Difference {
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    pub fn join(l: Query, r: Query, on: Vec<(String, String)>) -> Query {
        Query::Join {
            left: Box::new(l),
            right: Box::new(r),
            on,
        }
    }

    /// The empty relation with the schema of `rel`.
    pub fn empty_of(rel: &str) -> Query {
        Query::select(Cond::False, Query::base(rel))
    }

    /// Base relations read anywhere in the query.
    pub fn base_relations(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_bases(&mut out);
        out
    }

    fn collect_bases(&self, out: &mut BTreeSet<String>) {
        match self {
            Query::Base { relation } => {
                out.insert(relation.clone());
            }
            Query::Singleton { .. } => {}
            Query::Select { input, .. } | Query::Project { input, .. } => input.collect_bases(out),
            Query::Union { left, right }
            | Query::Difference { left, right }
            | Query::Join { left, right, .. } => {
                left.collect_bases(out);
                right.collect_bases(out);
            }
        }
    }

    /// Replaces base relation references for which `f` returns a query.
    pub fn substitute_bases(&self, f: &dyn Fn(&str) -> Option<Query>) -> Query {
        match self {
            Query::Base { relation } => f(relation).unwrap_or_else(|| self.clone()),
            Query::Singleton { .. } => self.clone(),
            Query::Select { cond, input } => Query::select(cond.clone(), input.substitute_bases(f)),
            Query::Project { items, input } => Query::project(items.clone(), input.substitute_bases(f)),
            Query::Union { left, right } => Query::union(left.substitute_bases(f), right.substitute_bases(f)),
            Query::Difference { left, right } => {
                Query::difference(left.substitute_bases(f), right.substitute_bases(f))
            }
            Query::Join { left, right, on } => {
                Query::join(left.substitute_bases(f), right.substitute_bases(f), on.clone())
            }
        }
    }

    /// Number of operator nodes.
    pub fn size(&self) -> usize {
        match self {
            Query::Base { .. } | Query::Singleton { .. } => 1,
            Query::Select { input, .. } | Query::Project { input, .. } => 1 + input.size(),
            Query::Union { left, right }
            | Query::Difference { left, right }
            | Query::Join { left, right, .. } => 1 + left.size() + right.size(),
        }
    }

    /// Output schema. Derived relations are named after their operator.
    pub fn schema(&self, cat: &dyn Catalog) -> Result<Arc<Schema>> {
        match self {
            Query::Base { relation } => cat.require(relation),
            Query::Singleton { values } => Ok(Arc::new(Schema {
                name: "values".into(),
                attributes: values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| Attribute {
                        name: format!("column{}", i + 1),
                        ty: value_type(v),
                    })
                    .collect(),
            })),
            Query::Select { input, .. } => input.schema(cat),
            Query::Project { items, input } => {
                let s = input.schema(cat)?;
                let attrs = items
                    .iter()
                    .map(|it| {
                        Ok(Attribute {
                            name: it.name.clone(),
                            ty: infer_type(&it.expr, &s)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let out = Schema {
                    name: s.name.clone(),
                    attributes: attrs,
                };
                out.validate()?;
                Ok(Arc::new(out))
            }
            Query::Union { left, right } | Query::Difference { left, right } => {
                let (l, r) = (left.schema(cat)?, right.schema(cat)?);
                if l.arity() != r.arity() {
                    return Err(Error::schema(format!(
                        "set operation over arities {} and {}",
                        l.arity(),
                        r.arity()
                    )));
                }
                Ok(l)
            }
            Query::Join { left, right, on } => {
                let (l, r) = (left.schema(cat)?, right.schema(cat)?);
                let mut attrs = l.attributes.clone();
                attrs.extend(r.attributes.iter().cloned());
                let out = Schema {
                    name: format!("{}_{}", l.name, r.name),
                    attributes: attrs,
                };
                out.validate()?;
                for (a, b) in on {
                    if l.index_of(a).is_none() || r.index_of(b).is_none() {
                        return Err(Error::schema(format!("join attributes `{a}` = `{b}` not found")));
                    }
                }
                Ok(Arc::new(out))
            }
        }
    }

    pub fn eval(&self, db: &Database) -> Result<Relation> {
        Ok(self.eval_ref(db)?.into_owned())
    }

    /// Evaluates a stack of selections and projections in one pass per
    /// input tuple. Deduplicating only at the top is equivalent because
    /// each layer maps tuples independently.
    fn eval_chain<'a>(&self, db: &'a Database) -> Result<Cow<'a, Relation>> {
        let mut layers = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Query::Select { cond, input } => {
                    if cond.is_false() {
                        return Ok(Cow::Owned(Relation::empty(self.schema(db)?)));
                    }
                    if !cond.is_true() {
                        layers.push(cur);
                    }
                    cur = input;
                }
                Query::Project { input, .. } => {
                    layers.push(cur);
                    cur = input;
                }
                _ => break,
            }
        }
        let inp = cur.eval_ref(db)?;
        if layers.is_empty() {
            return Ok(inp);
        }
        let schema = self.schema(db)?;
        let mut names = inp.schema.names();
        let mut bound = Vec::with_capacity(layers.len());
        for q in layers.iter().rev() {
            match q {
                Query::Select { cond, .. } => bound.push(Layer::Select(cond.bind(&names)?)),
                Query::Project { items, .. } => {
                    let b = items.iter().map(|it| it.expr.bind(&names)).collect::<Result<Vec<_>>>()?;
                    names = items.iter().map(|it| it.name.clone()).collect();
                    bound.push(Layer::Project(b));
                }
                _ => unreachable!("only unary layers are collected"),
            }
        }
        let mut rows = IndexSet::with_capacity(inp.len());
        let (mut a, mut b): (Vec<Value>, Vec<Value>) = (Vec::new(), Vec::new());
        'tuples: for t in inp.iter() {
            a.clear();
            a.extend_from_slice(t);
            for l in &bound {
                match l {
                    Layer::Select(c) => {
                        if !c.eval(&a)? {
                            continue 'tuples;
                        }
                    }
                    Layer::Project(items) => {
                        b.clear();
                        for it in items {
                            b.push(it.eval(&a)?);
                        }
                        std::mem::swap(&mut a, &mut b);
                    }
                }
            }
            // reuse the input allocation when nothing changed
            if a.as_slice() == &t[..] && exact_same(&a, t) {
                rows.insert(t.clone());
            } else {
                rows.insert(tuple(a.clone()));
            }
        }
        Ok(Cow::Owned(Relation::from_rows(schema, rows)))
    }

    fn eval_ref<'a>(&self, db: &'a Database) -> Result<Cow<'a, Relation>> {
        match self {
            Query::Base { relation } => Ok(Cow::Borrowed(db.get(relation)?)),
            Query::Singleton { values } => {
                let schema = self.schema(db)?;
                Ok(Cow::Owned(Relation::from_rows(schema, [tuple(values.clone())])))
            }
            Query::Select { .. } | Query::Project { .. } => self.eval_chain(db),
            Query::Union { left, right } => {
                let schema = self.schema(db)?;
                let l = left.eval_ref(db)?;
                let r = right.eval_ref(db)?;
                if r.is_empty() {
                    return Ok(match l {
                        Cow::Borrowed(b) if b.schema == schema => Cow::Borrowed(b),
                        other => Cow::Owned(Relation::from_rows(schema, other.into_owned().into_rows())),
                    });
                }
                let mut rows = l.into_owned().into_rows();
                for t in r.iter() {
                    rows.insert(t.clone());
                }
                Ok(Cow::Owned(Relation::from_rows(schema, rows)))
            }
            Query::Difference { left, right } => {
                let schema = self.schema(db)?;
                let l = left.eval_ref(db)?;
                let r = right.eval_ref(db)?;
                let rows = l.iter().filter(|t| !r.contains(t)).cloned();
                Ok(Cow::Owned(Relation::from_rows(schema, rows)))
            }
            Query::Join { left, right, on } => {
                let schema = self.schema(db)?;
                let l = left.eval_ref(db)?;
                let r = right.eval_ref(db)?;
                let li: Vec<usize> = on.iter().filter_map(|(a, _)| l.schema.index_of(a)).collect();
                let ri: Vec<usize> = on.iter().filter_map(|(_, b)| r.schema.index_of(b)).collect();
                let mut index: HashMap<Vec<Value>, Vec<&Tuple>> = HashMap::new();
                for t in r.iter() {
                    let key: Vec<Value> = ri.iter().map(|&i| t[i].clone()).collect();
                    if key.iter().any(Value::is_null) {
                        continue;
                    }
                    index.entry(key).or_default().push(t);
                }
                let mut rows = IndexSet::new();
                for t in l.iter() {
                    let key: Vec<Value> = li.iter().map(|&i| t[i].clone()).collect();
                    if let Some(ms) = index.get(&key) {
                        for m in ms {
                            let mut v: Vec<Value> = t.to_vec();
                            v.extend(m.iter().cloned());
                            rows.insert(tuple(v));
                        }
                    }
                }
                Ok(Cow::Owned(Relation::from_rows(schema, rows)))
            }
        }
    }
}

/// Structural identity, stricter than numeric equality (`5` vs `5.00`).
enum Layer {
    Select(BoundCond),
    Project(Vec<BoundExpr>),
}

fn exact_same(a: &[Value], b: &[Value]) -> bool {
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (Value::Integer(_), Value::Integer(_)) => true,
        (Value::Decimal(p), Value::Decimal(q)) => p.scale() == q.scale(),
        (Value::Integer(_), _) | (Value::Decimal(_), _) => false,
        _ => true,
    })
}

fn value_type(v: &Value) -> Type {
    match v {
        Value::Boolean(_) => Type::Boolean,
        Value::Decimal(d) => Type::Decimal(d.scale()),
        Value::Text(_) => Type::Text,
        Value::Integer(_) | Value::Null => Type::Integer,
    }
}

/// Best-effort static type of an expression; only used for output schemas.
pub fn infer_type(e: &Expr, s: &Schema) -> Result<Type> {
    Ok(match e {
        Expr::Attr { name } => s
            .type_of(name)
            .ok_or_else(|| Error::schema(format!("unknown attribute `{name}` in `{}`", s.name)))?,
        Expr::Const { value } => value_type(value),
        Expr::Arith { op, left, right } => {
            let (a, b) = (infer_type(left, s)?, infer_type(right, s)?);
            let scale = |t: Type| match t {
                Type::Decimal(k) => Some(k),
                Type::Integer => Some(0),
                _ => None,
            };
            match (scale(a), scale(b)) {
                (Some(0), Some(0)) => Type::Integer,
                (Some(x), Some(y)) => Type::Decimal(match op {
                    ArithOp::Add | ArithOp::Sub => x.max(y),
                    ArithOp::Mul => x + y,
                    ArithOp::Div => x.max(y).max(DEFAULT_SCALE),
                }),
                _ => a,
            }
        }
        Expr::Case { then, otherwise, .. } => match then.as_const() {
            Some(Value::Null) => infer_type(otherwise, s)?,
            _ => infer_type(then, s)?,
        },
    })
}

// ---------------------------------------------------------------------------
// DSL printing; the parser lives in `dsl`.
// ---------------------------------------------------------------------------

impl Query {
    fn is_set_op(&self) -> bool {
        matches!(self, Query::Union { .. } | Query::Difference { .. })
    }

    fn fmt_source(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Base { relation } => fmt_ident(f, relation),
            Query::Join { left, right, on } => {
                left.fmt_source(f)?;
                f.write_str(" JOIN ")?;
                if matches!(**right, Query::Join { .. }) {
                    write!(f, "({right})")?;
                } else {
                    right.fmt_source(f)?;
                }
                f.write_str(" ON ")?;
                for (i, (a, b)) in on.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" AND ")?;
                    }
                    fmt_ident(f, a)?;
                    f.write_str(" = ")?;
                    fmt_ident(f, b)?;
                }
                Ok(())
            }
            q => write!(f, "({q})"),
        }
    }

    fn fmt_term(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Base { .. } | Query::Join { .. } => {
                f.write_str("SELECT * FROM ")?;
                self.fmt_source(f)
            }
            Query::Singleton { values } => {
                f.write_str("VALUES (")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    fmt_value(f, v)?;
                }
                f.write_str(")")
            }
            Query::Select { cond, input } => {
                f.write_str("SELECT * FROM ")?;
                input.fmt_source(f)?;
                write!(f, " WHERE {cond}")
            }
            Query::Project { items, input } => {
                f.write_str("SELECT ")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", it.expr)?;
                    if it.expr.as_attr() != Some(it.name.as_str()) {
                        f.write_str(" AS ")?;
                        fmt_ident(f, &it.name)?;
                    }
                }
                f.write_str(" FROM ")?;
                match &**input {
                    Query::Select { cond, input } => {
                        input.fmt_source(f)?;
                        write!(f, " WHERE {cond}")
                    }
                    q => q.fmt_source(f),
                }
            }
            q => write!(f, "({q})"),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Union { left, right } | Query::Difference { left, right } => {
                if left.is_set_op() {
                    write!(f, "{left}")?;
                } else {
                    left.fmt_term(f)?;
                }
                f.write_str(if matches!(self, Query::Union { .. }) {
                    " UNION "
                } else {
                    " EXCEPT "
                })?;
                if right.is_set_op() {
                    write!(f, "({right})")
                } else {
                    right.fmt_term(f)
                }
            }
            q => q.fmt_term(f),
        }
    }
}
