//! Data slicing: per-relation selection conditions that drop input tuples
//! which cannot contribute to the delta.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{simplify_cond, Cond, Expr};
use crate::query::Query;
use crate::relation::{Catalog, Database, Relation};
use crate::statement::{Normalized, Statement, StatementKind};

/// Conditions beyond this many AST nodes degrade to `True`.
pub const DEFAULT_NODE_BUDGET: usize = 10_000;

/// Which of the two histories a condition filters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Original,
    Modified,
}

/// Per-relation filter conditions for both histories.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SliceConditions {
    pub original: BTreeMap<String, Cond>,
    pub modified: BTreeMap<String, Cond>,
    /// Relations whose condition hit the node budget.
    pub over_budget: BTreeSet<String>,
}

impl SliceConditions {
    pub fn side(&self, s: Side) -> &BTreeMap<String, Cond> {
        match s {
            Side::Original => &self.original,
            Side::Modified => &self.modified,
        }
    }

    /// Condition for `rel`; relations without an entry are not filtered.
    pub fn get(&self, s: Side, rel: &str) -> Cond {
        self.side(s).get(rel).cloned().unwrap_or(Cond::True)
    }

    /// Human-readable dump, one line per relation and side.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (side, map) in [("H", &self.original), ("H[M]", &self.modified)] {
            for (rel, c) in map {
                out.push_str(&format!("{side} {rel}: {c}\n"));
            }
        }
        out
    }
}

/// Unpushed per-relation conditions for one same-type pair at its position.
///
/// Relations other than those touched by the pair get `False`: their tuples
/// evolve identically in both histories.
pub fn mod_condition(
    orig: &Statement,
    modi: &Statement,
    side: Side,
    cat: &dyn Catalog,
) -> Result<BTreeMap<String, Cond>> {
    if !crate::statement::same_type(orig, modi) {
        return Err(Error::Modification(format!(
            "pair `{orig}` / `{modi}` is not normalized"
        )));
    }
    let rel = orig.relation().to_string();
    let kind = if orig.kind() == StatementKind::Noop {
        modi.kind()
    } else {
        orig.kind()
    };
    let mut out = BTreeMap::new();
    match kind {
        StatementKind::Update | StatementKind::Noop => {
            out.insert(rel, simplify_cond(&orig.condition().or2(modi.condition())));
        }
        StatementKind::Delete => {
            // a tuple can only differ if the other side deletes it
            let c = match side {
                Side::Original => modi.condition(),
                Side::Modified => orig.condition(),
            };
            out.insert(rel, simplify_cond(&c));
        }
        StatementKind::InsertTuple => {
            out.insert(rel, Cond::False);
        }
        StatementKind::InsertQuery => {
            out.insert(rel, Cond::False);
            for u in [orig, modi] {
                if let Statement::InsertQuery { query, .. } = u {
                    for s in query.base_relations() {
                        let q = qpush(&Cond::True, query, &s, cat)?;
                        let e = out.entry(s).or_insert(Cond::False);
                        *e = simplify_cond(&e.clone().or2(q));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Pushes the per-relation conditions `c` (stated over the output of `u`)
/// to conditions over the input of `u`.
pub fn push_through_statement(
    c: &mut BTreeMap<String, Cond>,
    u: &Statement,
    cat: &dyn Catalog,
) -> Result<()> {
    let rel = u.relation();
    match u {
        Statement::Update { cond, .. } => {
            let Some(cur) = c.get(rel) else {
                return Ok(());
            };
            if cur.is_true() || cur.is_false() {
                return Ok(());
            }
            let written = u.written_attrs();
            let map: HashMap<String, Expr> = written
                .iter()
                .map(|a| {
                    let e = if cond.is_true() {
                        u.set_expr(a)
                    } else {
                        Expr::case(cond.clone(), u.set_expr(a), Expr::attr(a))
                    };
                    (a.clone(), e)
                })
                .collect();
            let pushed = simplify_cond(&cur.subst_map(&map));
            c.insert(rel.to_string(), pushed);
        }
        Statement::InsertQuery { query, .. } => {
            let cur = c.get(rel).cloned().unwrap_or(Cond::False);
            if cur.is_false() {
                return Ok(());
            }
            let target = cat.require(rel)?;
            let qschema = query.schema(cat)?;
            // target attributes → query output columns (positional)
            let rename: HashMap<String, Expr> = target
                .names()
                .into_iter()
                .zip(qschema.names())
                .map(|(a, b)| (a, Expr::attr(b)))
                .collect();
            let over_q = cur.subst_map(&rename);
            let mut adds = Vec::new();
            for s in query.base_relations() {
                adds.push((s.clone(), qpush(&over_q, query, &s, cat)?));
            }
            for (s, q) in adds {
                let e = c.entry(s).or_insert(Cond::False);
                *e = simplify_cond(&e.clone().or2(q));
            }
        }
        Statement::Delete { .. } | Statement::InsertTuple { .. } | Statement::Noop { .. } => {}
    }
    Ok(())
}

/// A condition over base relation `rel` that every `rel` tuple contributing
/// to an output tuple of `q` satisfying `c` fulfills.
///
/// Queries that do not read `rel` give `False`.
pub fn qpush(c: &Cond, q: &Query, rel: &str, cat: &dyn Catalog) -> Result<Cond> {
    Ok(match q {
        Query::Base { relation } => {
            if relation == rel {
                simplify_cond(c)
            } else {
                Cond::False
            }
        }
        Query::Singleton { .. } => Cond::False,
        Query::Select { cond, input } => qpush(&c.clone().and2(cond.clone()), input, rel, cat)?,
        Query::Project { items, input } => {
            let map: HashMap<String, Expr> = items
                .iter()
                .map(|it| (it.name.clone(), it.expr.clone()))
                .collect();
            qpush(&c.subst_map(&map), input, rel, cat)?
        }
        Query::Union { left, right } | Query::Difference { left, right } => {
            let (ls, rs) = (left.schema(cat)?, right.schema(cat)?);
            let rename: HashMap<String, Expr> = ls
                .names()
                .into_iter()
                .zip(rs.names())
                .map(|(a, b)| (a, Expr::attr(b)))
                .collect();
            let l = qpush(c, left, rel, cat)?;
            let r = qpush(&c.subst_map(&rename), right, rel, cat)?;
            simplify_cond(&l.or2(r))
        }
        Query::Join { left, right, on } => {
            let (ls, rs) = (left.schema(cat)?, right.schema(cat)?);
            let classes = EqClasses::new(on);
            let part = |side_names: Vec<String>| -> Cond {
                let side: BTreeSet<String> = side_names.into_iter().collect();
                let kept: Vec<Cond> = c
                    .conjuncts()
                    .into_iter()
                    .filter_map(|k| classes.map_onto(&k, &side))
                    .collect();
                Cond::and(kept)
            };
            let l = qpush(&part(ls.names()), left, rel, cat)?;
            let r = qpush(&part(rs.names()), right, rel, cat)?;
            simplify_cond(&l.or2(r))
        }
    })
}

/// Attribute equivalence classes induced by join equalities.
struct EqClasses {
    parent: HashMap<String, String>,
    members: HashMap<String, Vec<String>>,
}

impl EqClasses {
    fn new(on: &[(String, String)]) -> EqClasses {
        let mut ec = EqClasses {
            parent: HashMap::new(),
            members: HashMap::new(),
        };
        for (a, b) in on {
            let (ra, rb) = (ec.find(a), ec.find(b));
            if ra != rb {
                ec.parent.insert(ra, rb);
            }
        }
        let keys: Vec<String> = ec.parent.keys().cloned().collect();
        let mut all: BTreeSet<String> = keys.into_iter().collect();
        for (a, b) in on {
            all.insert(a.clone());
            all.insert(b.clone());
        }
        for a in all {
            let r = ec.find(&a);
            ec.members.entry(r).or_default().push(a);
        }
        ec
    }

    fn find(&self, a: &str) -> String {
        let mut cur = a.to_string();
        while let Some(p) = self.parent.get(&cur) {
            cur = p.clone();
        }
        cur
    }

    /// Rewrites `c` to mention only `side` attributes, if possible.
    fn map_onto(&self, c: &Cond, side: &BTreeSet<String>) -> Option<Cond> {
        let attrs = c.attrs();
        let mut map = HashMap::new();
        for a in &attrs {
            if side.contains(a) {
                continue;
            }
            let root = self.find(a);
            let alt = self.members.get(&root)?.iter().find(|m| side.contains(*m))?;
            map.insert(a.clone(), Expr::attr(alt));
        }
        Some(c.subst_map(&map))
    }
}

/// Options for [`data_slice`].
#[derive(Clone, Copy, Debug)]
pub struct DataSliceOptions {
    pub node_budget: usize,
}

impl Default for DataSliceOptions {
    fn default() -> Self {
        DataSliceOptions {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Fully pushed conditions for the suffixes starting at the first modified
/// position. Relations mapped to `False` need no input tuples.
pub fn data_slice(
    n: &Normalized,
    cat: &dyn Catalog,
    opts: DataSliceOptions,
) -> Result<SliceConditions> {
    match n.first_modified() {
        Some(first) => data_slice_from(n, cat, opts, first),
        None => data_slice_from(n, cat, opts, 1),
    }
}

/// Like [`data_slice`], but for inputs taken before position `start`
/// (1-based), which must not exceed the first modified position.
pub fn data_slice_from(
    n: &Normalized,
    cat: &dyn Catalog,
    opts: DataSliceOptions,
    start: usize,
) -> Result<SliceConditions> {
    let mut out = SliceConditions::default();
    if let Some(first) = n.first_modified() {
        if start == 0 || start > first {
            return Err(Error::Modification(format!(
                "slice start {start} lies after the first modification at {first}"
            )));
        }
    }
    let first = start;
    let rels: BTreeSet<String> = n
        .original
        .iter()
        .chain(&n.modified)
        .flat_map(|u| u.reads())
        .collect();
    for side in [Side::Original, Side::Modified] {
        let hist = match side {
            Side::Original => &n.original,
            Side::Modified => &n.modified,
        };
        let mut total: BTreeMap<String, Cond> =
            rels.iter().map(|r| (r.clone(), Cond::False)).collect();
        for &p in &n.positions {
            let mut c = mod_condition(&n.original[p - 1], &n.modified[p - 1], side, cat)?;
            for j in (first..p).rev() {
                push_through_statement(&mut c, &hist[j - 1], cat)?;
                for (rel, cond) in c.iter_mut() {
                    if cond.size() > opts.node_budget {
                        *cond = Cond::True;
                        out.over_budget.insert(rel.clone());
                    }
                }
            }
            for (rel, cond) in c {
                let e = total.entry(rel).or_insert(Cond::False);
                *e = simplify_cond(&e.clone().or2(cond));
            }
        }
        for (rel, cond) in total.iter_mut() {
            if cond.size() > opts.node_budget {
                *cond = Cond::True;
                out.over_budget.insert(rel.clone());
            }
        }
        match side {
            Side::Original => out.original = total,
            Side::Modified => out.modified = total,
        }
    }
    Ok(out)
}

/// `σ_θ(R)` for every relation with a condition; other relations are copied.
pub fn filter_database(db: &Database, conds: &BTreeMap<String, Cond>) -> Result<Database> {
    let mut out = Database::new();
    for r in db.relations() {
        let c = conds.get(&r.schema.name).cloned().unwrap_or(Cond::True);
        if c.is_true() {
            out.add(r.clone());
            continue;
        }
        let bound = c.bind(&r.schema.names())?;
        let mut kept = Relation::empty(r.schema.clone());
        for t in r.iter() {
            if bound.eval(t)? {
                kept.insert(t.clone());
            }
        }
        out.add(kept);
    }
    Ok(out)
}
