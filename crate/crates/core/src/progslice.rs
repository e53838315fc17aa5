//! Program slicing: slice-test formulas over four symbolic runs, the greedy
//! slicing loop and the single-modification dependency check.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::compress::{AttrConstraint, Compressed};
use crate::error::{Error, Result};
use crate::expr::{simplify_cond, Cond, Expr};
use crate::milp::{extend_domains, CompileOptions, Domains, VarDomain};
use crate::relation::Catalog;
use crate::sat::{check_sat, Sat};
use crate::solver::{SolveOptions, StatusKind};
use crate::statement::{Normalized, Statement};
use crate::symbolic::{input_var, sym_apply, Definition, VcDatabase, VcTuple};
use crate::value::Value;

/// Sorted 1-based positions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SliceIndexSet(pub BTreeSet<usize>);

impl SliceIndexSet {
    pub fn full(n: usize) -> SliceIndexSet {
        SliceIndexSet((1..=n).collect())
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn without(&self, i: usize) -> SliceIndexSet {
        let mut s = self.0.clone();
        s.remove(&i);
        SliceIndexSet(s)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.0.iter().copied().collect()
    }
}

impl FromIterator<usize> for SliceIndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        SliceIndexSet(iter.into_iter().collect())
    }
}

/// `H|_I`: statements outside `i` replaced by no-ops.
pub fn restrict(h: &[Statement], i: &SliceIndexSet) -> Vec<Statement> {
    h.iter()
        .enumerate()
        .map(|(k, u)| {
            if i.contains(k + 1) {
                u.clone()
            } else {
                Statement::noop(u.relation())
            }
        })
        .collect()
}

/// Tags of the four symbolic runs.
pub const TAG_H: &str = "h";
pub const TAG_M: &str = "m";
pub const TAG_HS: &str = "hs";
pub const TAG_MS: &str = "ms";

/// `Γ` in parts: the slice is proven when `chi ∧ defs ∧ constraints`
/// implies `body` for every assignment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceTest {
    pub relations: BTreeSet<String>,
    pub chi: Vec<Compressed>,
    pub defs: Vec<Definition>,
    pub constraints: Vec<Cond>,
    pub body: Cond,
    pub domains: Domains,
}

impl SliceTest {
    fn premise(&self, chi: Cond) -> Cond {
        Cond::and(
            std::iter::once(chi)
                .chain(self.defs.iter().map(Definition::as_cond))
                .chain(self.constraints.iter().cloned())
                .collect(),
        )
    }

    fn chi_cond(&self) -> Cond {
        Cond::and(self.chi.iter().map(Compressed::to_cond).collect())
    }

    /// The formula handed to the solver: premise and negated body.
    pub fn negation(&self) -> Cond {
        self.premise(self.chi_cond()).and2(Cond::not(self.body.clone()))
    }
}

impl fmt::Display for SliceTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "chi: {}", simplify_cond(&self.chi_cond()))?;
        for d in &self.defs {
            writeln!(f, "def: {}", d.as_cond())?;
        }
        for c in &self.constraints {
            writeln!(f, "constraint: {c}")?;
        }
        write!(f, "body: {}", self.body)
    }
}

/// Runs the statements of `h` on relations in `scope` and positions in
/// `keep` (all when `None`); step numbers are the original positions.
fn run(
    h: &[Statement],
    keep: Option<&SliceIndexSet>,
    scope: &BTreeSet<String>,
    init: &VcDatabase,
    tag: &str,
) -> Result<VcDatabase> {
    let mut cur = init.clone();
    for (k, u) in h.iter().enumerate() {
        if !scope.contains(u.relation()) || keep.is_some_and(|i| !i.contains(k + 1)) {
            continue;
        }
        check_sliceable(u)?;
        cur = sym_apply(u, &cur, tag, k + 1)?;
    }
    Ok(cur)
}

fn check_sliceable(u: &Statement) -> Result<()> {
    match u {
        Statement::InsertQuery { .. } => Err(Error::NotApplicable(format!(
            "program slicing over the insert-query on `{}`",
            u.relation()
        ))),
        Statement::InsertTuple { .. } => Err(Error::NotApplicable(
            "tuple inserts must be split off before program slicing".into(),
        )),
        _ => Ok(()),
    }
}

/// `X(D_t) = Y(D_t)` for the single result tuples of two runs, comparing
/// only the attributes in `attrs`.
fn same_result(x: &VcTuple, y: &VcTuple, attrs: &[usize]) -> Cond {
    let vals = Cond::and(
        attrs
            .iter()
            .filter(|&&a| x.values[a] != y.values[a])
            .map(|&a| x.values[a].clone().eq(y.values[a].clone()))
            .collect(),
    );
    let c = if x.local == y.local {
        vals.or2(Cond::not(x.local.clone()))
    } else {
        Cond::or(vec![
            Cond::and(vec![vals, x.local.clone(), y.local.clone()]),
            Cond::and(vec![Cond::not(x.local.clone()), Cond::not(y.local.clone())]),
        ])
    };
    simplify_cond(&c)
}

/// Relations whose statement sequence differs between `h` and `h|_I`.
pub fn affected_relations(n: &Normalized, i: &SliceIndexSet) -> BTreeSet<String> {
    (1..=n.len())
        .filter(|&p| !i.contains(p))
        .flat_map(|p| [n.original[p - 1].relation(), n.modified[p - 1].relation()])
        .map(str::to_string)
        .collect()
}

/// Attributes of `rel` written by some update in either history.
fn written(n: &Normalized, rel: &str) -> BTreeSet<String> {
    n.original
        .iter()
        .chain(&n.modified)
        .filter(|u| u.relation() == rel)
        .flat_map(|u| u.written_attrs())
        .collect()
}

/// Domains of the version-0 variables, read off the compression.
pub fn input_domains(chi: &[Compressed], cat: &dyn Catalog) -> Result<Domains> {
    let mut doms = Domains::new();
    for c in chi {
        let schema = cat.require(&c.relation)?;
        for (k, a) in schema.attributes.iter().enumerate() {
            let var = input_var(&c.relation, &a.name);
            if !a.ty.is_ordered() {
                doms.insert(var, VarDomain::of_type(a.ty));
                continue;
            }
            let mut lo: Option<Value> = None;
            let mut hi: Option<Value> = None;
            for g in &c.groups {
                let (l, h) = match &g.attrs[k].constraint {
                    AttrConstraint::Eq { value } => (value, value),
                    AttrConstraint::Range { lo, hi } => (lo, hi),
                    _ => continue,
                };
                lo = Some(lo.map_or(l.clone(), |x| x.min(l.clone())));
                hi = Some(hi.map_or(h.clone(), |x| x.max(h.clone())));
            }
            let zero = Value::Integer(0);
            doms.insert(
                var,
                VarDomain::numeric(a.ty, lo.unwrap_or(zero.clone()), hi.unwrap_or(zero)),
            );
        }
    }
    Ok(doms)
}

/// Builds `Γ(H, I, χ)` over the relations of the removed positions.
pub fn build_slice_test(
    n: &Normalized,
    i: &SliceIndexSet,
    chi: &[Compressed],
    cat: &dyn Catalog,
) -> Result<SliceTest> {
    let rels = affected_relations(n, i);
    build_slice_test_for(n, i, chi, cat, &rels)
}

/// Like [`build_slice_test`] for an explicit set of relations.
pub fn build_slice_test_for(
    n: &Normalized,
    i: &SliceIndexSet,
    chi: &[Compressed],
    cat: &dyn Catalog,
    rels: &BTreeSet<String>,
) -> Result<SliceTest> {
    if let Some(&p) = i.0.iter().find(|&&p| p == 0 || p > n.len()) {
        return Err(Error::Modification(format!(
            "slice position {p} outside 1..={}",
            n.len()
        )));
    }
    let init = VcDatabase::single_tuple(cat, rels)?;
    let runs = [
        run(&n.original, None, rels, &init, TAG_H)?,
        run(&n.modified, None, rels, &init, TAG_M)?,
        run(&n.original, Some(i), rels, &init, TAG_HS)?,
        run(&n.modified, Some(i), rels, &init, TAG_MS)?,
    ];
    let mut body = Vec::new();
    for r in rels {
        let schema = cat.require(r)?;
        let w = written(n, r);
        let attrs: Vec<usize> = (0..schema.arity())
            .filter(|&k| w.contains(&schema.attributes[k].name))
            .collect();
        let t = |k: usize| &runs[k].tables[r].tuples[0];
        let (h, m, hs, ms) = (t(0), t(1), t(2), t(3));
        let eq = |x, y| same_result(x, y, &attrs);
        let unchanged = eq(h, m);
        body.push(Cond::or(vec![
            Cond::and(vec![unchanged.clone(), eq(hs, ms)]),
            Cond::and(vec![
                Cond::not(unchanged),
                Cond::or(vec![
                    Cond::and(vec![eq(h, hs), eq(m, ms)]),
                    Cond::and(vec![eq(h, ms), eq(m, hs)]),
                ]),
            ]),
        ]));
    }
    let chi: Vec<Compressed> = chi.iter().filter(|c| rels.contains(&c.relation)).cloned().collect();
    let mut domains = input_domains(&chi, cat)?;
    for r in rels {
        if !chi.iter().any(|c| &c.relation == r) {
            return Err(Error::Data(format!("no compression for `{r}`")));
        }
    }
    let mut defs = Vec::new();
    let mut constraints = Vec::new();
    for v in runs {
        extend_domains(&mut domains, &v.defs)?;
        defs.extend(v.defs);
        constraints.extend(v.constraints);
    }
    Ok(SliceTest {
        relations: rels.clone(),
        chi,
        defs,
        constraints,
        body: if body.len() == 1 { body.pop().expect("one conjunct") } else { Cond::and(body) },
        domains,
    })
}

/// Reduces a slice test before solving.
///
/// Definitions with the same right-hand side (after earlier merges) are
/// merged, the body is simplified, definitions outside its cone of influence
/// are dropped and `χ` is projected onto the remaining input variables.
/// Dropping conjuncts only adds worlds, so a proof for the reduced formula
/// carries over.
pub fn presolve(t: &SliceTest) -> SliceTest {
    let mut rename: HashMap<String, Expr> = HashMap::new();
    let mut seen: HashMap<Expr, String> = HashMap::new();
    let mut defs = Vec::new();
    for d in &t.defs {
        let e = d.expr.subst_attrs(&|a: &str| rename.get(a).cloned());
        if let Some(v) = seen.get(&e) {
            rename.insert(d.var.clone(), Expr::attr(v.clone()));
        } else {
            seen.insert(e.clone(), d.var.clone());
            defs.push(Definition { var: d.var.clone(), expr: e });
        }
    }
    let sub = |c: &Cond| simplify_cond(&c.subst_attrs(&|a: &str| rename.get(a).cloned()));
    let body = sub(&t.body);
    let constraints: Vec<Cond> = t.constraints.iter().map(sub).collect();

    let mut live = body.attrs();
    for c in &constraints {
        c.collect_attrs(&mut live);
    }
    let mut kept = Vec::new();
    for d in defs.into_iter().rev() {
        if live.contains(&d.var) {
            d.expr.collect_attrs(&mut live);
            kept.push(d);
        }
    }
    kept.reverse();

    let chi = t
        .chi
        .iter()
        .map(|c| project(c, &live))
        .collect();
    SliceTest {
        relations: t.relations.clone(),
        chi,
        defs: kept,
        constraints,
        body,
        domains: t.domains.clone(),
    }
}

/// Keeps only the summaries of live variables, then drops duplicate groups.
fn project(c: &Compressed, live: &BTreeSet<String>) -> Compressed {
    let mut groups: Vec<crate::compress::Group> = Vec::new();
    for g in &c.groups {
        let mut g = g.clone();
        g.attrs.retain(|a| live.contains(&input_var(&c.relation, &a.attr)));
        if let Some(same) = groups.iter_mut().find(|h| h.attrs == g.attrs) {
            same.rows += g.rows;
        } else {
            groups.push(g);
        }
    }
    Compressed {
        relation: c.relation.clone(),
        group_by: c.group_by.clone(),
        groups,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    IsSlice,
    NotProven,
}

#[derive(Clone, Debug, Default)]
pub struct SliceOptions {
    pub compile: CompileOptions,
    pub solve: SolveOptions,
    /// Skip [`presolve`].
    pub raw: bool,
    /// Relations whose statements are never removed.
    pub keep_relations: BTreeSet<String>,
}

/// One solver call (or a call avoided because the formula simplified away).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverCall {
    /// Position whose removal or dependency was tested.
    pub position: usize,
    pub relations: Vec<String>,
    /// `None` when no solver call was needed.
    pub status: Option<StatusKind>,
    pub nodes: u64,
    pub verdict: Verdict,
    /// Whether the position left the slice because of this call.
    pub removed: bool,
}

/// Decides `Γ` by refuting its negation.
pub fn check_slice(t: &SliceTest, opts: &SliceOptions) -> Result<(Verdict, Option<StatusKind>, u64)> {
    let t = if opts.raw { t.clone() } else { presolve(t) };
    if t.body.is_true() {
        return Ok((Verdict::IsSlice, None, 0));
    }
    let run = check_sat(&t.negation(), &t.domains, &opts.compile, &opts.solve)?;
    let (verdict, status) = match run.sat {
        Sat::Infeasible => (Verdict::IsSlice, StatusKind::Infeasible),
        Sat::Feasible(_) => (Verdict::NotProven, StatusKind::Feasible),
        Sat::Unknown => (Verdict::NotProven, StatusKind::Unknown),
    };
    Ok((verdict, Some(status), run.nodes))
}

/// Outcome of a slicing method.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceReport {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub solver_calls: usize,
    pub calls: Vec<SolverCall>,
}

impl SliceReport {
    pub fn slice(&self) -> SliceIndexSet {
        self.kept.iter().copied().collect()
    }

    fn new(n: usize, kept: &SliceIndexSet, calls: Vec<SolverCall>) -> SliceReport {
        SliceReport {
            kept: kept.to_vec(),
            removed: (1..=n).filter(|&p| !kept.contains(p)).collect(),
            solver_calls: calls.iter().filter(|c| c.status.is_some()).count(),
            calls,
        }
    }
}

fn is_noop(u: &Statement) -> bool {
    matches!(u, Statement::Noop { .. })
}

/// Greedy slicing: starting from all positions, tries to drop each
/// unmodified position in ascending order and keeps the drop when the
/// candidate is proven to be a slice.
pub fn greedy_slice(
    n: &Normalized,
    chi: &[Compressed],
    cat: &dyn Catalog,
    opts: &SliceOptions,
) -> Result<SliceReport> {
    for u in n.original.iter().chain(&n.modified) {
        check_sliceable(u)?;
    }
    let pinned: BTreeSet<usize> = n.positions.iter().copied().collect();
    let mut cur = SliceIndexSet::full(n.len());
    let mut calls = Vec::new();
    for p in 1..=n.len() {
        if pinned.contains(&p) {
            continue;
        }
        let cand = cur.without(p);
        let (o, m) = (&n.original[p - 1], &n.modified[p - 1]);
        if opts.keep_relations.contains(o.relation()) || opts.keep_relations.contains(m.relation()) {
            continue;
        }
        if is_noop(o) && is_noop(m) {
            cur = cand;
            continue;
        }
        let rels: BTreeSet<String> = [o.relation().to_string(), m.relation().to_string()].into();
        let t = build_slice_test_for(n, &cand, chi, cat, &rels)?;
        let (verdict, status, nodes) = check_slice(&t, opts)?;
        calls.push(SolverCall {
            position: p,
            relations: rels.into_iter().collect(),
            status,
            nodes,
            verdict,
            removed: verdict == Verdict::IsSlice,
        });
        if verdict == Verdict::IsSlice {
            cur = cand;
        }
    }
    Ok(SliceReport::new(n.len(), &cur, calls))
}

/// Symbolic states of the single tuple of `rel` before each position.
fn states_before(h: &[Statement], rel: &str, init: &VcDatabase, tag: &str) -> Result<(Vec<VcTuple>, VcDatabase)> {
    let mut cur = init.clone();
    let mut out = Vec::with_capacity(h.len());
    for (k, u) in h.iter().enumerate() {
        out.push(cur.table(rel)?.tuples[0].clone());
        if u.relation() == rel {
            check_sliceable(u)?;
            cur = sym_apply(u, &cur, tag, k + 1)?;
        }
    }
    Ok((out, cur))
}

/// `θ(t) ∧ φ(t)` for statement `u` on symbolic tuple `t`.
fn fires(u: &Statement, t: &VcTuple, names: &[String]) -> Cond {
    let bind = |a: &str| names.iter().position(|n| n == a).map(|k| t.values[k].clone());
    simplify_cond(&t.local.clone().and2(u.condition().subst_attrs(&bind)))
}

/// Dependency slicing for the single modified position of `n`.
pub fn single_mod_dependency(
    n: &Normalized,
    chi: &[Compressed],
    cat: &dyn Catalog,
    opts: &SliceOptions,
) -> Result<SliceReport> {
    if n.positions.len() != 1 {
        return Err(Error::Modification(format!(
            "dependency slicing of a single modification got {} modified positions",
            n.positions.len()
        )));
    }
    dependency_slice(n, chi, cat, opts)
}

/// Dependency slicing: position `q` after the last modification of its
/// relation is dropped when no world has a tuple that some modified
/// statement (either version) touches and that `q` touches, in either
/// history. Positions up to that modification are kept, as are all
/// modified positions; relations without modifications lose every
/// statement.
pub fn dependency_slice(
    n: &Normalized,
    chi: &[Compressed],
    cat: &dyn Catalog,
    opts: &SliceOptions,
) -> Result<SliceReport> {
    for u in n.original.iter().chain(&n.modified) {
        check_sliceable(u)?;
    }
    let mut by_rel: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for &p in &n.positions {
        let (uo, um) = (&n.original[p - 1], &n.modified[p - 1]);
        if uo.relation() != um.relation() {
            return Err(Error::Modification(format!("position {p} changes the relation")));
        }
        by_rel.entry(uo.relation().to_string()).or_default().push(p);
    }
    let mut kept = BTreeSet::new();
    let mut calls = Vec::new();
    for (rel, mods) in &by_rel {
        if opts.keep_relations.contains(rel) {
            kept.extend((1..=n.len()).filter(|&q| n.original[q - 1].relation() == rel));
            continue;
        }
        let last = *mods.last().expect("non-empty");
        kept.extend((1..=last).filter(|&q| n.original[q - 1].relation() == rel));
        let schema = cat.require(rel)?;
        let names = schema.names();
        let init = VcDatabase::single_tuple(cat, &BTreeSet::from([rel.clone()]))?;
        let (hs, hv) = states_before(&n.original, rel, &init, TAG_H)?;
        let (ms, mv) = states_before(&n.modified, rel, &init, TAG_M)?;
        let touched = simplify_cond(&Cond::or(
            mods.iter()
                .flat_map(|&p| {
                    [
                        fires(&n.original[p - 1], &hs[p - 1], &names),
                        fires(&n.modified[p - 1], &ms[p - 1], &names),
                    ]
                })
                .collect(),
        ));
        let chi: Vec<Compressed> = chi.iter().filter(|c| &c.relation == rel).cloned().collect();
        if chi.is_empty() {
            return Err(Error::Data(format!("no compression for `{rel}`")));
        }
        let mut domains = input_domains(&chi, cat)?;
        extend_domains(&mut domains, &hv.defs)?;
        extend_domains(&mut domains, &mv.defs)?;
        let defs: Vec<Definition> = hv.defs.iter().chain(&mv.defs).cloned().collect();
        let constraints: Vec<Cond> = hv.constraints.iter().chain(&mv.constraints).cloned().collect();
        for q in last + 1..=n.len() {
            let (o, m) = (&n.original[q - 1], &n.modified[q - 1]);
            if o.relation() != rel || (is_noop(o) && is_noop(m)) {
                continue;
            }
            let here = simplify_cond(&fires(o, &hs[q - 1], &names).or2(fires(m, &ms[q - 1], &names)));
            let t = SliceTest {
                relations: BTreeSet::from([rel.clone()]),
                chi: chi.clone(),
                defs: defs.clone(),
                constraints: constraints.clone(),
                body: Cond::not(Cond::and(vec![touched.clone(), here])),
                domains: domains.clone(),
            };
            let (verdict, status, nodes) = check_slice(&t, opts)?;
            // IsSlice here means no tuple is touched by both, so `q` is excluded
            if verdict == Verdict::NotProven {
                kept.insert(q);
            }
            calls.push(SolverCall {
                position: q,
                relations: vec![rel.clone()],
                status,
                nodes,
                verdict,
                removed: verdict == Verdict::IsSlice,
            });
        }
    }
    Ok(SliceReport::new(n.len(), &SliceIndexSet(kept), calls))
}
