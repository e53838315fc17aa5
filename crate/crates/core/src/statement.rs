//! Update statements, histories, modifications and direct execution.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{fmt_ident, fmt_value, Cond, Expr};
use crate::query::Query;
use crate::relation::{check_tuple, tuple, Catalog, Database};
use crate::value::{Schema, Value};

/// `A ← e` inside an update.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetClause {
    pub attr: String,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Statement {
    /// Attributes not listed in `set` keep their value.
    Update {
        relation: String,
        set: Vec<SetClause>,
        #[serde(rename = "where", default = "cond_true")]
        cond: Cond,
    },
    Delete {
        relation: String,
        #[serde(rename = "where", default = "cond_true")]
        cond: Cond,
    },
    InsertTuple {
        relation: String,
        values: Vec<Value>,
    },
    InsertQuery {
        relation: String,
        query: Query,
    },
    /// Behaves as `Delete(False)`.
    Noop {
        relation: String,
    },
}

fn cond_true() -> Cond {
    Cond::True
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StatementKind {
    Update,
    Delete,
    InsertTuple,
    InsertQuery,
    Noop,
}

impl Statement {
    pub fn update(rel: &str, set: Vec<(&str, Expr)>, cond: Cond) -> Statement {
        Statement::Update {
            relation: rel.to_string(),
            set: set
                .into_iter()
                .map(|(a, e)| SetClause {
                    attr: a.to_string(),
                    expr: e,
                })
                .collect(),
            cond,
        }
    }

    pub fn delete(rel: &str, cond: Cond) -> Statement {
        Statement::Delete {
            relation: rel.to_string(),
            cond,
        }
    }

    pub fn insert(rel: &str, values: Vec<Value>) -> Statement {
        Statement::InsertTuple {
            relation: rel.to_string(),
            values,
        }
    }

    pub fn insert_query(rel: &str, query: Query) -> Statement {
        Statement::InsertQuery {
            relation: rel.to_string(),
            query,
        }
    }

    pub fn noop(rel: &str) -> Statement {
        Statement::Noop {
            relation: rel.to_string(),
        }
    }

    pub fn relation(&self) -> &str {
        match self {
            Statement::Update { relation, .. }
            | Statement::Delete { relation, .. }
            | Statement::InsertTuple { relation, .. }
            | Statement::InsertQuery { relation, .. }
            | Statement::Noop { relation } => relation,
        }
    }

    pub fn kind(&self) -> StatementKind {
        match self {
            Statement::Update { .. } => StatementKind::Update,
            Statement::Delete { .. } => StatementKind::Delete,
            Statement::InsertTuple { .. } => StatementKind::InsertTuple,
            Statement::InsertQuery { .. } => StatementKind::InsertQuery,
            Statement::Noop { .. } => StatementKind::Noop,
        }
    }

    /// Whether `u(D) = ⋃ u({t})` holds for every database.
    pub fn is_tuple_independent(&self) -> bool {
        !matches!(self, Statement::InsertQuery { .. })
    }

    /// The selection condition (`False` for no-ops, `True` for inserts).
    pub fn condition(&self) -> Cond {
        match self {
            Statement::Update { cond, .. } | Statement::Delete { cond, .. } => cond.clone(),
            Statement::Noop { .. } => Cond::False,
            Statement::InsertTuple { .. } | Statement::InsertQuery { .. } => Cond::True,
        }
    }

    /// `Set(A)` of an update: the assigned expression, or the attribute itself.
    pub fn set_expr(&self, attr: &str) -> Expr {
        if let Statement::Update { set, .. } = self {
            if let Some(c) = set.iter().rev().find(|c| c.attr == attr) {
                return c.expr.clone();
            }
        }
        Expr::attr(attr)
    }

    /// Attributes an update may change (identity assignments excluded).
    pub fn written_attrs(&self) -> BTreeSet<String> {
        match self {
            Statement::Update { set, .. } => set
                .iter()
                .filter(|c| c.expr.as_attr() != Some(c.attr.as_str()))
                .map(|c| c.attr.clone())
                .collect(),
            _ => BTreeSet::new(),
        }
    }

    /// Relations read by the statement (target included).
    pub fn reads(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::from([self.relation().to_string()]);
        if let Statement::InsertQuery { query, .. } = self {
            s.extend(query.base_relations());
        }
        s
    }

    /// Static checks against the catalog: known relation, attributes and arity.
    pub fn validate(&self, cat: &dyn Catalog) -> Result<()> {
        let schema = cat.require(self.relation())?;
        let known = |names: BTreeSet<String>| -> Result<()> {
            match names.iter().find(|n| schema.index_of(n).is_none()) {
                Some(n) => Err(Error::schema(format!(
                    "unknown attribute `{n}` in `{}`",
                    schema.name
                ))),
                None => Ok(()),
            }
        };
        match self {
            Statement::Update { set, cond, .. } => {
                let mut names = cond.attrs();
                for c in set {
                    names.insert(c.attr.clone());
                    c.expr.collect_attrs(&mut names);
                }
                known(names)
            }
            Statement::Delete { cond, .. } => known(cond.attrs()),
            Statement::InsertTuple { values, .. } => check_tuple(&schema, values),
            Statement::InsertQuery { query, .. } => {
                let q = query.schema(cat)?;
                if q.arity() != schema.arity() {
                    return Err(Error::schema(format!(
                        "insert of arity {} into `{}` of arity {}",
                        q.arity(),
                        schema.name,
                        schema.arity()
                    )));
                }
                Ok(())
            }
            Statement::Noop { .. } => Ok(()),
        }
    }

    /// The update as a full generalized projection over `schema`.
    pub fn update_items(&self, schema: &Schema) -> Vec<(String, Expr)> {
        schema
            .attributes
            .iter()
            .map(|a| (a.name.clone(), self.set_expr(&a.name)))
            .collect()
    }

    /// Executes the statement in place.
    pub fn apply(&self, db: &mut Database) -> Result<()> {
        match self {
            Statement::Noop { relation } => {
                db.get(relation)?;
                Ok(())
            }
            Statement::Update { relation, cond, .. } => {
                let rel = db.get(relation)?;
                let schema = rel.schema.clone();
                let names = schema.names();
                let c = cond.bind(&names)?;
                let items: Vec<Option<_>> = schema
                    .attributes
                    .iter()
                    .map(|a| {
                        let e = self.set_expr(&a.name);
                        if e.as_attr() == Some(a.name.as_str()) {
                            Ok(None)
                        } else {
                            e.bind(&names).map(Some)
                        }
                    })
                    .collect::<Result<_>>()?;
                let mut rows = IndexSet::with_capacity(rel.len());
                for t in rel.iter() {
                    if !c.eval(t)? {
                        rows.insert(t.clone());
                        continue;
                    }
                    let mut v = Vec::with_capacity(items.len());
                    for (i, it) in items.iter().enumerate() {
                        v.push(match it {
                            Some(b) => b.eval(t)?,
                            None => t[i].clone(),
                        });
                    }
                    check_tuple(&schema, &v)?;
                    rows.insert(tuple(v));
                }
                *db.get_mut(relation)? = crate::relation::Relation::from_rows(schema, rows);
                Ok(())
            }
            Statement::Delete { relation, cond } => {
                let rel = db.get(relation)?;
                let c = cond.bind(&rel.schema.names())?;
                let mut rows = IndexSet::with_capacity(rel.len());
                for t in rel.iter() {
                    if !c.eval(t)? {
                        rows.insert(t.clone());
                    }
                }
                let schema = rel.schema.clone();
                *db.get_mut(relation)? = crate::relation::Relation::from_rows(schema, rows);
                Ok(())
            }
            Statement::InsertTuple { relation, values } => {
                db.get_mut(relation)?.insert_checked(tuple(values.clone()))?;
                Ok(())
            }
            Statement::InsertQuery { relation, query } => {
                let rows = query.eval(db)?;
                let target = db.get_mut(relation)?;
                if rows.schema.arity() != target.schema.arity() {
                    return Err(Error::schema(format!(
                        "insert of arity {} into `{relation}`",
                        rows.schema.arity()
                    )));
                }
                for t in rows.into_rows() {
                    target.insert_checked(t)?;
                }
                Ok(())
            }
        }
    }
}

pub fn apply_statement(u: &Statement, db: &Database) -> Result<Database> {
    let mut out = db.clone();
    u.apply(&mut out)?;
    Ok(out)
}

pub fn run_history(h: &[Statement], db: &Database) -> Result<Database> {
    let mut out = db.clone();
    for u in h {
        u.apply(&mut out)?;
    }
    Ok(out)
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Update {
                relation,
                set,
                cond,
            } => {
                f.write_str("UPDATE ")?;
                fmt_ident(f, relation)?;
                f.write_str(" SET ")?;
                for (i, c) in set.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    fmt_ident(f, &c.attr)?;
                    write!(f, " = {}", c.expr)?;
                }
                if !cond.is_true() {
                    write!(f, " WHERE {cond}")?;
                }
                Ok(())
            }
            Statement::Delete { relation, cond } => {
                f.write_str("DELETE FROM ")?;
                fmt_ident(f, relation)?;
                if !cond.is_true() {
                    write!(f, " WHERE {cond}")?;
                }
                Ok(())
            }
            Statement::InsertTuple { relation, values } => {
                f.write_str("INSERT INTO ")?;
                fmt_ident(f, relation)?;
                f.write_str(" VALUES (")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    fmt_value(f, v)?;
                }
                f.write_str(")")
            }
            Statement::InsertQuery { relation, query } => {
                f.write_str("INSERT INTO ")?;
                fmt_ident(f, relation)?;
                // a bare VALUES query would read back as a tuple insert
                if matches!(query, Query::Singleton { .. }) {
                    write!(f, " ({query})")
                } else {
                    write!(f, " {query}")
                }
            }
            Statement::Noop { relation } => {
                f.write_str("NOOP ")?;
                fmt_ident(f, relation)
            }
        }
    }
}

/// A named, ordered statement sequence. Positions are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    pub id: String,
    pub statements: Vec<Statement>,
}

impl History {
    pub fn new(id: impl Into<String>, statements: Vec<Statement>) -> History {
        History {
            id: id.into(),
            statements,
        }
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Statement at 1-based position `i`.
    pub fn at(&self, i: usize) -> Option<&Statement> {
        i.checked_sub(1).and_then(|k| self.statements.get(k))
    }
}

/// One edit of a history. Positions are 1-based and refer to the history
/// as it stands after all earlier edits of the same list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Modification {
    Replace { pos: usize, statement: Statement },
    Insert { pos: usize, statement: Statement },
    Delete { pos: usize },
}

/// Padded histories of equal length plus the positions where they differ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub original: Vec<Statement>,
    pub modified: Vec<Statement>,
    /// Sorted 1-based positions with `original[p-1] != modified[p-1]`.
    pub positions: Vec<usize>,
    /// 1-based position in the unpadded original history per slot; `None`
    /// for padding.
    pub origin: Vec<Option<usize>>,
}

impl Normalized {
    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    pub fn first_modified(&self) -> Option<usize> {
        self.positions.first().copied()
    }

    /// Number of unpadded original statements before slot `p`.
    pub fn original_prefix(&self, p: usize) -> usize {
        self.origin[..p.saturating_sub(1).min(self.origin.len())]
            .iter()
            .filter(|o| o.is_some())
            .count()
    }

    /// Slots from `p` on, renumbered from 1.
    pub fn suffix(&self, p: usize) -> Normalized {
        let k = p.saturating_sub(1).min(self.len());
        Normalized {
            original: self.original[k..].to_vec(),
            modified: self.modified[k..].to_vec(),
            positions: self.positions.iter().filter(|&&q| q > k).map(|q| q - k).collect(),
            origin: self.origin[k..].to_vec(),
        }
    }
}

/// Same kind on the same relation, where a no-op pairs with anything.
pub fn same_type(a: &Statement, b: &Statement) -> bool {
    a.relation() == b.relation()
        && (a.kind() == b.kind()
            || a.kind() == StatementKind::Noop
            || b.kind() == StatementKind::Noop)
}

/// Pads both histories with no-ops so every edit becomes a same-type replace.
pub fn normalize_mods(h: &[Statement], mods: &[Modification]) -> Result<Normalized> {
    // slot = (original, modified); `None` marks a padding no-op
    let mut slots: Vec<(Option<Statement>, Option<Statement>, Option<usize>)> = h
        .iter()
        .enumerate()
        .map(|(i, u)| (Some(u.clone()), Some(u.clone()), Some(i + 1)))
        .collect();
    let visible = |slots: &[(Option<Statement>, Option<Statement>, Option<usize>)], pos: usize| {
        slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.1.is_some())
            .nth(pos.wrapping_sub(1))
            .map(|(i, _)| i)
    };
    for (k, m) in mods.iter().enumerate() {
        let len = slots.iter().filter(|s| s.1.is_some()).count();
        let bad = |pos: usize, max: usize| {
            Error::Modification(format!(
                "modification {} refers to position {pos}, valid range is 1..={max}",
                k + 1
            ))
        };
        match m {
            Modification::Replace { pos, statement } => {
                let i = visible(&slots, *pos).ok_or_else(|| bad(*pos, len))?;
                slots[i].1 = Some(statement.clone());
            }
            Modification::Delete { pos } => {
                let i = visible(&slots, *pos).ok_or_else(|| bad(*pos, len))?;
                slots[i].1 = None;
            }
            Modification::Insert { pos, statement } => {
                if *pos == 0 || *pos > len + 1 {
                    return Err(bad(*pos, len + 1));
                }
                let i = if *pos == len + 1 {
                    slots.len()
                } else {
                    visible(&slots, *pos).expect("position checked")
                };
                slots.insert(i, (None, Some(statement.clone()), None));
            }
        }
    }
    let mut out = Normalized {
        original: vec![],
        modified: vec![],
        positions: vec![],
        origin: vec![],
    };
    for (o, n, src) in slots {
        let pair = match (o, n) {
            (None, None) => continue,
            (Some(o), None) => {
                let r = o.relation().to_string();
                (o, Statement::noop(&r))
            }
            (None, Some(n)) => (Statement::noop(n.relation()), n),
            (Some(o), Some(n)) => (o, n),
        };
        let (o, n) = pair;
        if same_type(&o, &n) {
            out.original.push(o);
            out.modified.push(n);
            out.origin.push(src);
        } else {
            let (ro, rn) = (o.relation().to_string(), n.relation().to_string());
            out.original.push(o);
            out.modified.push(Statement::noop(&ro));
            out.origin.push(src);
            out.original.push(Statement::noop(&rn));
            out.modified.push(n);
            out.origin.push(None);
        }
    }
    out.positions = (1..=out.original.len())
        .filter(|&p| out.original[p - 1] != out.modified[p - 1])
        .collect();
    Ok(out)
}

/// Applies edits directly, without padding.
pub fn apply_mods(h: &[Statement], mods: &[Modification]) -> Result<Vec<Statement>> {
    let mut out = h.to_vec();
    for m in mods {
        match m {
            Modification::Replace { pos, statement } if (1..=out.len()).contains(pos) => {
                out[pos - 1] = statement.clone()
            }
            Modification::Delete { pos } if (1..=out.len()).contains(pos) => {
                out.remove(pos - 1);
            }
            Modification::Insert { pos, statement } if (1..=out.len() + 1).contains(pos) => {
                out.insert(pos - 1, statement.clone())
            }
            _ => return Err(Error::Modification(format!("position out of range in {m:?}"))),
        }
    }
    Ok(out)
}
