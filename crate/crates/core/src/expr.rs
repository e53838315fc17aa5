//! Scalar expressions and conditions: construction, evaluation, substitution
//! and simplification.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::{ArithOp, CmpOp, Schema, Value};

/// Scalar expression `e`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    Attr {
        name: String,
    },
    Const {
        value: Value,
    },
    Arith {
        op: ArithOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Case {
        when: Box<Cond>,
        then: Box<Expr>,
        #[serde(rename = "else")]
        otherwise: Box<Expr>,
    },
}

/// Boolean condition `θ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cond {
    Cmp {
        op: CmpOp,
        left: Expr,
        right: Expr,
    },
    And {
        args: Vec<Cond>,
    },
    Or {
        args: Vec<Cond>,
    },
    Not {
        arg: Box<Cond>,
    },
    IsNull {
        arg: Expr,
    },
    True,
    False,
}

impl Expr {
    pub fn attr(name: impl Into<String>) -> Expr {
        Expr::Attr { name: name.into() }
    }

    pub fn lit(value: impl Into<Value>) -> Expr {
        Expr::Const {
            value: value.into(),
        }
    }

    pub fn int(v: i64) -> Expr {
        Expr::lit(Value::Integer(v))
    }

    pub fn arith(op: ArithOp, l: Expr, r: Expr) -> Expr {
        Expr::Arith {
            op,
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, r: Expr) -> Expr {
        Expr::arith(ArithOp::Add, self, r)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, r: Expr) -> Expr {
        Expr::arith(ArithOp::Sub, self, r)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, r: Expr) -> Expr {
        Expr::arith(ArithOp::Mul, self, r)
    }

    pub fn case(when: Cond, then: Expr, otherwise: Expr) -> Expr {
        Expr::Case {
            when: Box::new(when),
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }

    pub fn as_attr(&self) -> Option<&str> {
        match self {
            Expr::Attr { name } => Some(name),
            _ => None,
        }
    }

    pub fn as_const(&self) -> Option<&Value> {
        match self {
            Expr::Const { value } => Some(value),
            _ => None,
        }
    }

    pub fn cmp(self, op: CmpOp, r: Expr) -> Cond {
        Cond::Cmp {
            op,
            left: self,
            right: r,
        }
    }

    pub fn eq(self, r: Expr) -> Cond {
        self.cmp(CmpOp::Eq, r)
    }

    /// Number of AST nodes, counting nested conditions.
    pub fn size(&self) -> usize {
        match self {
            Expr::Attr { .. } | Expr::Const { .. } => 1,
            Expr::Arith { left, right, .. } => 1 + left.size() + right.size(),
            Expr::Case {
                when,
                then,
                otherwise,
            } => 1 + when.size() + then.size() + otherwise.size(),
        }
    }

    pub fn collect_attrs(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Attr { name } => {
                out.insert(name.clone());
            }
            Expr::Const { .. } => {}
            Expr::Arith { left, right, .. } => {
                left.collect_attrs(out);
                right.collect_attrs(out);
            }
            Expr::Case {
                when,
                then,
                otherwise,
            } => {
                when.collect_attrs(out);
                then.collect_attrs(out);
                otherwise.collect_attrs(out);
            }
        }
    }

    pub fn attrs(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.collect_attrs(&mut s);
        s
    }

    /// Replaces attribute references for which `f` returns a replacement.
    /// Replacements are not revisited, so the substitution is simultaneous.
    pub fn subst_attrs(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Attr { name } => f(name).unwrap_or_else(|| self.clone()),
            Expr::Const { .. } => self.clone(),
            Expr::Arith { op, left, right } => {
                Expr::arith(*op, left.subst_attrs(f), right.subst_attrs(f))
            }
            Expr::Case {
                when,
                then,
                otherwise,
            } => Expr::case(
                when.subst_attrs(f),
                then.subst_attrs(f),
                otherwise.subst_attrs(f),
            ),
        }
    }

    /// Simultaneous substitution of arbitrary sub-expressions.
    pub fn substitute(&self, pairs: &[(Expr, Expr)]) -> Expr {
        if let Some((_, r)) = pairs.iter().find(|(t, _)| t == self) {
            return r.clone();
        }
        match self {
            Expr::Attr { .. } | Expr::Const { .. } => self.clone(),
            Expr::Arith { op, left, right } => {
                Expr::arith(*op, left.substitute(pairs), right.substitute(pairs))
            }
            Expr::Case {
                when,
                then,
                otherwise,
            } => Expr::case(
                when.substitute(pairs),
                then.substitute(pairs),
                otherwise.substitute(pairs),
            ),
        }
    }

    pub fn eval(&self, env: &dyn Env) -> Result<Value> {
        match self {
            Expr::Attr { name } => env.lookup(name),
            Expr::Const { value } => Ok(value.clone()),
            Expr::Arith { op, left, right } => {
                Value::arith(*op, &left.eval(env)?, &right.eval(env)?)
            }
            Expr::Case {
                when,
                then,
                otherwise,
            } => {
                if when.eval(env)? {
                    then.eval(env)
                } else {
                    otherwise.eval(env)
                }
            }
        }
    }

    pub fn bind(&self, names: &[String]) -> Result<BoundExpr> {
        Ok(match self {
            Expr::Attr { name } => BoundExpr::Col(
                names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::schema(format!("unknown attribute `{name}`")))?,
            ),
            Expr::Const { value } => BoundExpr::Const(value.clone()),
            Expr::Arith { op, left, right } => BoundExpr::Arith(
                *op,
                Box::new(left.bind(names)?),
                Box::new(right.bind(names)?),
            ),
            Expr::Case {
                when,
                then,
                otherwise,
            } => BoundExpr::Case(
                Box::new(when.bind(names)?),
                Box::new(then.bind(names)?),
                Box::new(otherwise.bind(names)?),
            ),
        })
    }
}

impl Cond {
    pub fn and(args: Vec<Cond>) -> Cond {
        Cond::And { args }
    }

    pub fn or(args: Vec<Cond>) -> Cond {
        Cond::Or { args }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(c: Cond) -> Cond {
        Cond::Not { arg: Box::new(c) }
    }

    pub fn is_null(e: Expr) -> Cond {
        Cond::IsNull { arg: e }
    }

    pub fn and2(self, other: Cond) -> Cond {
        Cond::and(vec![self, other])
    }

    pub fn or2(self, other: Cond) -> Cond {
        Cond::or(vec![self, other])
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Cond::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Cond::False)
    }

    pub fn size(&self) -> usize {
        match self {
            Cond::Cmp { left, right, .. } => 1 + left.size() + right.size(),
            Cond::And { args } | Cond::Or { args } => 1 + args.iter().map(Cond::size).sum::<usize>(),
            Cond::Not { arg } => 1 + arg.size(),
            Cond::IsNull { arg } => 1 + arg.size(),
            Cond::True | Cond::False => 1,
        }
    }

    pub fn collect_attrs(&self, out: &mut BTreeSet<String>) {
        match self {
            Cond::Cmp { left, right, .. } => {
                left.collect_attrs(out);
                right.collect_attrs(out);
            }
            Cond::And { args } | Cond::Or { args } => {
                args.iter().for_each(|a| a.collect_attrs(out))
            }
            Cond::Not { arg } => arg.collect_attrs(out),
            Cond::IsNull { arg } => arg.collect_attrs(out),
            Cond::True | Cond::False => {}
        }
    }

    pub fn attrs(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.collect_attrs(&mut s);
        s
    }

    pub fn subst_attrs(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Cond {
        match self {
            Cond::Cmp { op, left, right } => Cond::Cmp {
                op: *op,
                left: left.subst_attrs(f),
                right: right.subst_attrs(f),
            },
            Cond::And { args } => Cond::and(args.iter().map(|a| a.subst_attrs(f)).collect()),
            Cond::Or { args } => Cond::or(args.iter().map(|a| a.subst_attrs(f)).collect()),
            Cond::Not { arg } => Cond::not(arg.subst_attrs(f)),
            Cond::IsNull { arg } => Cond::is_null(arg.subst_attrs(f)),
            Cond::True | Cond::False => self.clone(),
        }
    }

    /// Substitutes attributes through a name map (simultaneous).
    pub fn subst_map(&self, map: &HashMap<String, Expr>) -> Cond {
        self.subst_attrs(&|n| map.get(n).cloned())
    }

    pub fn substitute(&self, pairs: &[(Expr, Expr)]) -> Cond {
        match self {
            Cond::Cmp { op, left, right } => Cond::Cmp {
                op: *op,
                left: left.substitute(pairs),
                right: right.substitute(pairs),
            },
            Cond::And { args } => Cond::and(args.iter().map(|a| a.substitute(pairs)).collect()),
            Cond::Or { args } => Cond::or(args.iter().map(|a| a.substitute(pairs)).collect()),
            Cond::Not { arg } => Cond::not(arg.substitute(pairs)),
            Cond::IsNull { arg } => Cond::is_null(arg.substitute(pairs)),
            Cond::True | Cond::False => self.clone(),
        }
    }

    pub fn eval(&self, env: &dyn Env) -> Result<bool> {
        match self {
            Cond::Cmp { op, left, right } => Value::compare(*op, &left.eval(env)?, &right.eval(env)?),
            Cond::And { args } => {
                for a in args {
                    if !a.eval(env)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Cond::Or { args } => {
                for a in args {
                    if a.eval(env)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Cond::Not { arg } => Ok(!arg.eval(env)?),
            Cond::IsNull { arg } => Ok(arg.eval(env)?.is_null()),
            Cond::True => Ok(true),
            Cond::False => Ok(false),
        }
    }

    pub fn bind(&self, names: &[String]) -> Result<BoundCond> {
        Ok(match self {
            Cond::Cmp { op, left, right } => BoundCond::Cmp(*op, left.bind(names)?, right.bind(names)?),
            Cond::And { args } => {
                BoundCond::And(args.iter().map(|a| a.bind(names)).collect::<Result<_>>()?)
            }
            Cond::Or { args } => {
                BoundCond::Or(args.iter().map(|a| a.bind(names)).collect::<Result<_>>()?)
            }
            Cond::Not { arg } => BoundCond::Not(Box::new(arg.bind(names)?)),
            Cond::IsNull { arg } => BoundCond::IsNull(arg.bind(names)?),
            Cond::True => BoundCond::Const(true),
            Cond::False => BoundCond::Const(false),
        })
    }

    /// Top-level conjuncts (a non-`And` condition is its own single conjunct).
    pub fn conjuncts(&self) -> Vec<Cond> {
        match self {
            Cond::And { args } => args.iter().flat_map(|a| a.conjuncts()).collect(),
            Cond::True => vec![],
            c => vec![c.clone()],
        }
    }
}

/// Variable lookup for evaluation.
pub trait Env {
    fn lookup(&self, name: &str) -> Result<Value>;
}

/// A tuple viewed through its schema.
pub struct TupleEnv<'a> {
    pub schema: &'a Schema,
    pub tuple: &'a [Value],
}

impl Env for TupleEnv<'_> {
    fn lookup(&self, name: &str) -> Result<Value> {
        self.schema
            .index_of(name)
            .and_then(|i| self.tuple.get(i).cloned())
            .ok_or_else(|| Error::schema(format!("unknown attribute `{name}` in `{}`", self.schema.name)))
    }
}

impl<S: std::hash::BuildHasher> Env for HashMap<String, Value, S> {
    fn lookup(&self, name: &str) -> Result<Value> {
        self.get(name)
            .cloned()
            .ok_or_else(|| Error::schema(format!("unassigned variable `{name}`")))
    }
}

impl Env for std::collections::BTreeMap<String, Value> {
    fn lookup(&self, name: &str) -> Result<Value> {
        self.get(name)
            .cloned()
            .ok_or_else(|| Error::schema(format!("unassigned variable `{name}`")))
    }
}

pub fn eval_expr(e: &Expr, t: &[Value], s: &Schema) -> Result<Value> {
    e.eval(&TupleEnv { schema: s, tuple: t })
}

pub fn eval_cond(c: &Cond, t: &[Value], s: &Schema) -> Result<bool> {
    c.eval(&TupleEnv { schema: s, tuple: t })
}

/// Expression with attribute references resolved to column positions.
#[derive(Clone, Debug)]
pub enum BoundExpr {
    Col(usize),
    Const(Value),
    Arith(ArithOp, Box<BoundExpr>, Box<BoundExpr>),
    Case(Box<BoundCond>, Box<BoundExpr>, Box<BoundExpr>),
}

#[derive(Clone, Debug)]
pub enum BoundCond {
    Cmp(CmpOp, BoundExpr, BoundExpr),
    And(Vec<BoundCond>),
    Or(Vec<BoundCond>),
    Not(Box<BoundCond>),
    IsNull(BoundExpr),
    Const(bool),
}

impl BoundExpr {
    pub fn eval(&self, t: &[Value]) -> Result<Value> {
        match self {
            BoundExpr::Col(i) => Ok(t[*i].clone()),
            BoundExpr::Const(v) => Ok(v.clone()),
            BoundExpr::Arith(op, l, r) => Value::arith(*op, &l.eval(t)?, &r.eval(t)?),
            BoundExpr::Case(c, a, b) => {
                if c.eval(t)? {
                    a.eval(t)
                } else {
                    b.eval(t)
                }
            }
        }
    }
}

impl BoundCond {
    pub fn eval(&self, t: &[Value]) -> Result<bool> {
        match self {
            BoundCond::Cmp(op, l, r) => match (l, r) {
                (BoundExpr::Col(i), BoundExpr::Const(v)) => Value::compare(*op, &t[*i], v),
                _ => Value::compare(*op, &l.eval(t)?, &r.eval(t)?),
            },
            BoundCond::And(args) => {
                for a in args {
                    if !a.eval(t)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            BoundCond::Or(args) => {
                for a in args {
                    if a.eval(t)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            BoundCond::Not(c) => Ok(!c.eval(t)?),
            BoundCond::IsNull(e) => Ok(e.eval(t)?.is_null()),
            BoundCond::Const(b) => Ok(*b),
        }
    }
}

// ---------------------------------------------------------------------------
// Simplification
// ---------------------------------------------------------------------------

/// Knobs for [`simplify_cond_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct SimplifyOptions {
    /// Enables rewrites that are only valid when no operand is Null
    /// (`x = x` → true, `¬(a < b)` → `a ≥ b`). Used for symbolic formulas.
    pub assume_non_null: bool,
}

pub fn simplify_expr(e: &Expr) -> Expr {
    simplify_expr_with(e, SimplifyOptions::default())
}

pub fn simplify_cond(c: &Cond) -> Cond {
    simplify_cond_with(c, SimplifyOptions::default())
}

pub fn simplify_expr_with(e: &Expr, o: SimplifyOptions) -> Expr {
    match e {
        Expr::Attr { .. } | Expr::Const { .. } => e.clone(),
        Expr::Arith { op, left, right } => {
            let (l, r) = (simplify_expr_with(left, o), simplify_expr_with(right, o));
            if let (Some(a), Some(b)) = (l.as_const(), r.as_const()) {
                if let Ok(v) = Value::arith(*op, a, b) {
                    return Expr::lit(v);
                }
            }
            Expr::arith(*op, l, r)
        }
        Expr::Case {
            when,
            then,
            otherwise,
        } => {
            let c = simplify_cond_with(when, o);
            match c {
                Cond::True => simplify_expr_with(then, o),
                Cond::False => simplify_expr_with(otherwise, o),
                c => {
                    let (t, f) = (simplify_expr_with(then, o), simplify_expr_with(otherwise, o));
                    if t == f {
                        t
                    } else {
                        Expr::case(c, t, f)
                    }
                }
            }
        }
    }
}

pub fn simplify_cond_with(c: &Cond, o: SimplifyOptions) -> Cond {
    match c {
        Cond::True | Cond::False => c.clone(),
        Cond::Cmp { op, left, right } => {
            let (l, r) = (simplify_expr_with(left, o), simplify_expr_with(right, o));
            if let (Some(a), Some(b)) = (l.as_const(), r.as_const()) {
                if let Ok(v) = Value::compare(*op, a, b) {
                    return if v { Cond::True } else { Cond::False };
                }
            }
            if o.assume_non_null && l == r {
                return match op {
                    CmpOp::Eq | CmpOp::Le | CmpOp::Ge => Cond::True,
                    _ => Cond::False,
                };
            }
            if l.as_const().is_some() && r.as_const().is_none() {
                return Cond::Cmp {
                    op: op.flip(),
                    left: r,
                    right: l,
                };
            }
            Cond::Cmp {
                op: *op,
                left: l,
                right: r,
            }
        }
        Cond::IsNull { arg } => {
            let a = simplify_expr_with(arg, o);
            match a.as_const() {
                Some(v) if v.is_null() => Cond::True,
                Some(_) => Cond::False,
                None => Cond::IsNull { arg: a },
            }
        }
        Cond::Not { arg } => match simplify_cond_with(arg, o) {
            Cond::True => Cond::False,
            Cond::False => Cond::True,
            Cond::Not { arg } => *arg,
            Cond::Cmp { op, left, right } if o.assume_non_null => Cond::Cmp {
                op: op.negate(),
                left,
                right,
            },
            inner => Cond::not(inner),
        },
        Cond::And { args } => {
            let mut out: Vec<Cond> = Vec::new();
            for a in args {
                match simplify_cond_with(a, o) {
                    Cond::True => {}
                    Cond::False => return Cond::False,
                    Cond::And { args } => push_unique_all(&mut out, args),
                    s => push_unique(&mut out, s),
                }
            }
            prune_conjuncts(out)
        }
        Cond::Or { args } => {
            let mut out: Vec<Cond> = Vec::new();
            for a in args {
                match simplify_cond_with(a, o) {
                    Cond::False => {}
                    Cond::True => return Cond::True,
                    Cond::Or { args } => push_unique_all(&mut out, args),
                    s => push_unique(&mut out, s),
                }
            }
            prune_disjuncts(out)
        }
    }
}

fn push_unique(out: &mut Vec<Cond>, c: Cond) {
    if !out.contains(&c) {
        out.push(c);
    }
}

fn push_unique_all(out: &mut Vec<Cond>, cs: Vec<Cond>) {
    for c in cs {
        push_unique(out, c);
    }
}

/// Drops conjuncts implied by others and detects contradictory bound pairs.
fn prune_conjuncts(mut cs: Vec<Cond>) -> Cond {
    let mut i = 0;
    while i < cs.len() {
        let mut drop_i = false;
        for j in 0..cs.len() {
            if i == j {
                continue;
            }
            if disjoint(&cs[i], &cs[j]) {
                return Cond::False;
            }
            // keep the first of two equivalent atoms
            if implies(&cs[j], &cs[i]) && (!implies(&cs[i], &cs[j]) || j < i) {
                drop_i = true;
                break;
            }
        }
        if drop_i {
            cs.remove(i);
        } else {
            i += 1;
        }
    }
    match cs.len() {
        0 => Cond::True,
        1 => cs.pop().unwrap(),
        _ => Cond::And { args: cs },
    }
}

/// Drops disjuncts that imply another disjunct (subsumption).
fn prune_disjuncts(mut ds: Vec<Cond>) -> Cond {
    let conj: Vec<Vec<Cond>> = ds.iter().map(Cond::conjuncts).collect();
    let mut keep = vec![true; ds.len()];
    for i in 0..ds.len() {
        for j in 0..ds.len() {
            if i == j || !keep[j] {
                continue;
            }
            if conj_implies(&conj[i], &conj[j]) && (!conj_implies(&conj[j], &conj[i]) || j < i) {
                keep[i] = false;
                break;
            }
        }
    }
    let mut k = keep.iter();
    ds.retain(|_| *k.next().unwrap());
    match ds.len() {
        0 => Cond::False,
        1 => ds.pop().unwrap(),
        _ => Cond::Or { args: ds },
    }
}

/// Whether the conjunction `a` implies the conjunction `b` (sound, incomplete).
fn conj_implies(a: &[Cond], b: &[Cond]) -> bool {
    b.iter().all(|cb| a.iter().any(|ca| implies(ca, cb)))
}

/// The set of values an atom `e op const` admits for `e`.
#[derive(Debug)]
enum AtomSet<'a> {
    Range {
        lo: Option<(&'a Value, bool)>,
        hi: Option<(&'a Value, bool)>,
    },
    NotEq(&'a Value),
}

fn atom(c: &Cond) -> Option<(&Expr, AtomSet<'_>)> {
    let Cond::Cmp { op, left, right } = c else {
        return None;
    };
    let v = right.as_const()?;
    if v.is_null() || left.as_const().is_some() {
        return None;
    }
    let set = match op {
        CmpOp::Eq => AtomSet::Range {
            lo: Some((v, true)),
            hi: Some((v, true)),
        },
        CmpOp::Ne => AtomSet::NotEq(v),
        CmpOp::Lt => AtomSet::Range {
            lo: None,
            hi: Some((v, false)),
        },
        CmpOp::Le => AtomSet::Range {
            lo: None,
            hi: Some((v, true)),
        },
        CmpOp::Gt => AtomSet::Range {
            lo: Some((v, false)),
            hi: None,
        },
        CmpOp::Ge => AtomSet::Range {
            lo: Some((v, true)),
            hi: None,
        },
    };
    Some((left, set))
}

fn comparable(a: &Value, b: &Value) -> bool {
    (a.is_numeric() && b.is_numeric())
        || matches!((a, b), (Value::Text(_), Value::Text(_)) | (Value::Boolean(_), Value::Boolean(_)))
}

fn in_range(v: &Value, lo: Option<(&Value, bool)>, hi: Option<(&Value, bool)>) -> Option<bool> {
    let lo_ok = match lo {
        None => true,
        Some((l, inc)) => {
            if !comparable(v, l) {
                return None;
            }
            if inc {
                v >= l
            } else {
                v > l
            }
        }
    };
    let hi_ok = match hi {
        None => true,
        Some((h, inc)) => {
            if !comparable(v, h) {
                return None;
            }
            if inc {
                v <= h
            } else {
                v < h
            }
        }
    };
    Some(lo_ok && hi_ok)
}

/// Whether `a` implies `b`. Null-safe: both atoms are false on a Null operand.
fn implies(a: &Cond, b: &Cond) -> bool {
    if a == b {
        return true;
    }
    let (Some((ea, sa)), Some((eb, sb))) = (atom(a), atom(b)) else {
        return false;
    };
    if ea != eb {
        return false;
    }
    match (sa, sb) {
        (AtomSet::NotEq(x), AtomSet::NotEq(y)) => x == y && comparable(x, y),
        (AtomSet::NotEq(_), AtomSet::Range { .. }) => false,
        (AtomSet::Range { lo, hi }, AtomSet::NotEq(v)) => {
            // range excludes v
            match (lo, hi) {
                (Some((l, _)), _) if !comparable(l, v) => false,
                (_, Some((h, _))) if !comparable(h, v) => false,
                _ => in_range(v, lo, hi) == Some(false),
            }
        }
        (AtomSet::Range { lo: l1, hi: h1 }, AtomSet::Range { lo: l2, hi: h2 }) => {
            lower_within(l1, l2) == Some(true) && upper_within(h1, h2) == Some(true)
        }
    }
}

/// Whether lower bound `a` is at least as tight as `b`.
fn lower_within(a: Option<(&Value, bool)>, b: Option<(&Value, bool)>) -> Option<bool> {
    match (a, b) {
        (_, None) => Some(true),
        (None, Some(_)) => Some(false),
        (Some((va, ia)), Some((vb, ib))) => {
            if !comparable(va, vb) {
                return None;
            }
            Some(va > vb || (va == vb && (ib || !ia)))
        }
    }
}

fn upper_within(a: Option<(&Value, bool)>, b: Option<(&Value, bool)>) -> Option<bool> {
    match (a, b) {
        (_, None) => Some(true),
        (None, Some(_)) => Some(false),
        (Some((va, ia)), Some((vb, ib))) => {
            if !comparable(va, vb) {
                return None;
            }
            Some(va < vb || (va == vb && (ib || !ia)))
        }
    }
}

/// Whether `a ∧ b` is unsatisfiable for every value of the shared operand.
fn disjoint(a: &Cond, b: &Cond) -> bool {
    let (Some((ea, sa)), Some((eb, sb))) = (atom(a), atom(b)) else {
        return false;
    };
    if ea != eb {
        return false;
    }
    match (sa, sb) {
        (AtomSet::NotEq(_), AtomSet::NotEq(_)) => false,
        (AtomSet::NotEq(v), AtomSet::Range { lo, hi }) | (AtomSet::Range { lo, hi }, AtomSet::NotEq(v)) => {
            matches!((lo, hi), (Some((l, true)), Some((h, true))) if l == h && h == v && comparable(h, v))
        }
        (AtomSet::Range { lo: l1, hi: h1 }, AtomSet::Range { lo: l2, hi: h2 }) => {
            let lo = tighter_lower(l1, l2);
            let hi = tighter_upper(h1, h2);
            match (lo, hi) {
                (Some(Some((l, li))), Some(Some((h, hi)))) => {
                    comparable(l, h) && (l > h || (l == h && !(li && hi)))
                }
                _ => false,
            }
        }
    }
}

type Bound<'a> = Option<(&'a Value, bool)>;

fn tighter_lower<'a>(a: Bound<'a>, b: Bound<'a>) -> Option<Bound<'a>> {
    match lower_within(a, b)? {
        true => Some(a),
        false => Some(b),
    }
}

fn tighter_upper<'a>(a: Bound<'a>, b: Bound<'a>) -> Option<Bound<'a>> {
    match upper_within(a, b)? {
        true => Some(a),
        false => Some(b),
    }
}

// ---------------------------------------------------------------------------
// Printing (DSL surface syntax)
// ---------------------------------------------------------------------------

const KEYWORDS: &[&str] = &[
    "select", "from", "where", "and", "or", "not", "case", "when", "then", "else", "end", "update",
    "set", "delete", "insert", "into", "values", "true", "false", "null", "is", "union", "except",
    "join", "on", "as", "noop",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s.to_ascii_lowercase().as_str())
}

/// Writes an identifier, quoting it when it is not a plain word.
pub fn fmt_ident(f: &mut impl fmt::Write, name: &str) -> fmt::Result {
    let plain = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_keyword(name);
    if plain {
        f.write_str(name)
    } else {
        write!(f, "\"{}\"", name.replace('"', "\"\""))
    }
}

pub fn fmt_value(f: &mut impl fmt::Write, v: &Value) -> fmt::Result {
    match v {
        Value::Null => f.write_str("NULL"),
        Value::Boolean(true) => f.write_str("TRUE"),
        Value::Boolean(false) => f.write_str("FALSE"),
        Value::Text(t) => write!(f, "'{}'", t.replace('\'', "''")),
        v => write!(f, "{v}"),
    }
}

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Arith {
            op: ArithOp::Add | ArithOp::Sub,
            ..
        } => 1,
        Expr::Arith { .. } => 2,
        _ => 3,
    }
}

fn fmt_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Attr { name } => fmt_ident(f, name),
        Expr::Const { value } => fmt_value(f, value),
        Expr::Arith { op, left, right } => {
            let p = expr_prec(e);
            if expr_prec(left) < p {
                write!(f, "({left})")?;
            } else {
                write!(f, "{left}")?;
            }
            write!(f, " {op} ")?;
            if expr_prec(right) <= p {
                write!(f, "({right})")
            } else {
                write!(f, "{right}")
            }
        }
        Expr::Case {
            when,
            then,
            otherwise,
        } => write!(f, "CASE WHEN {when} THEN {then} ELSE {otherwise} END"),
    }
}

fn cond_prec(c: &Cond) -> u8 {
    match c {
        Cond::Or { .. } => 1,
        Cond::And { .. } => 2,
        Cond::Not { .. } => 3,
        _ => 4,
    }
}

fn fmt_cond(f: &mut fmt::Formatter<'_>, c: &Cond) -> fmt::Result {
    match c {
        Cond::True => f.write_str("TRUE"),
        Cond::False => f.write_str("FALSE"),
        Cond::Cmp { op, left, right } => write!(f, "{left} {op} {right}"),
        Cond::IsNull { arg } => write!(f, "{arg} IS NULL"),
        Cond::Not { arg } => {
            if cond_prec(arg) <= 3 {
                write!(f, "NOT ({arg})")
            } else {
                write!(f, "NOT {arg}")
            }
        }
        Cond::And { args } | Cond::Or { args } => {
            let p = cond_prec(c);
            let sep = if p == 1 { " OR " } else { " AND " };
            if args.is_empty() {
                // empty connectives only arise from hand-built ASTs
                return f.write_str(if p == 1 { "FALSE" } else { "TRUE" });
            }
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                if cond_prec(a) <= p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
            }
            Ok(())
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_expr(f, self)
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_cond(f, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Type;

    fn a(n: &str) -> Expr {
        Expr::attr(n)
    }

    #[test]
    fn subsumption_example_simplifies() {
        let p30 = a("P").cmp(CmpOp::Le, Expr::int(30)).and2(a("F").cmp(CmpOp::Ge, Expr::int(10)));
        let p40 = a("P").cmp(CmpOp::Le, Expr::int(40)).and2(a("F").cmp(CmpOp::Ge, Expr::int(10)));
        let s = simplify_cond(&p30.or2(p40.clone()));
        assert_eq!(s, p40);
    }

    #[test]
    fn trivial_simplifications() {
        let c = a("x").cmp(CmpOp::Lt, Expr::int(4));
        assert_eq!(simplify_cond(&Cond::True.and2(c.clone())), c);
        assert_eq!(simplify_cond(&Expr::int(3).eq(Expr::int(3))), Cond::True);
        assert_eq!(simplify_cond(&Cond::not(Cond::not(c.clone()))), c);
        let contradiction = a("x").cmp(CmpOp::Le, Expr::int(3)).and2(a("x").cmp(CmpOp::Gt, Expr::int(3)));
        assert_eq!(simplify_cond(&contradiction), Cond::False);
    }

    #[test]
    fn substitution_example() {
        let c = a("A").cmp(CmpOp::Lt, Expr::int(4));
        let r = Expr::case(a("C").eq(Expr::int(5)), Expr::int(3), a("A"));
        let s = c.substitute(&[(a("A"), r.clone())]);
        assert_eq!(s, r.cmp(CmpOp::Lt, Expr::int(4)));
    }

    #[test]
    fn eval_case_expression() {
        let schema = Schema::new(
            "Order",
            &[
                ("ID", Type::Integer),
                ("Customer", Type::Text),
                ("Country", Type::Text),
                ("Price", Type::Integer),
                ("ShippingFee", Type::Integer),
            ],
        )
        .unwrap();
        let o1 = vec![11.into(), "Susan".into(), "UK".into(), 20.into(), 5.into()];
        let e = Expr::case(a("Price").cmp(CmpOp::Ge, Expr::int(50)), Expr::int(0), a("ShippingFee"));
        assert_eq!(eval_expr(&e, &o1, &schema).unwrap(), Value::Integer(5));
        assert!(matches!(eval_expr(&a("Nope"), &o1, &schema), Err(Error::Schema(_))));
    }

    #[test]
    fn printing_preserves_shape() {
        let e = a("x").sub(a("y").sub(Expr::int(1)));
        assert_eq!(e.to_string(), "x - (y - 1)");
        let c = Cond::not(a("x").eq(Expr::int(1)).and2(Cond::True));
        assert_eq!(c.to_string(), "NOT (x = 1 AND TRUE)");
        assert_eq!(Expr::attr("Order.Price@h1").to_string(), "\"Order.Price@h1\"");
    }
}
