//! Compilation of quantifier-free conditions into mixed-integer linear
//! feasibility programs using big-M encodings.
//!
//! All numbers are scaled to integers at one program-wide decimal scale.
//! Text is mapped to integer codes that preserve order: the formula's
//! constants and every gap between them that some string fits into get
//! consecutive codes, so comparisons against strings that are not
//! constants of the formula stay exact. Null is not modelled; variables are
//! assumed non-null.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Cond, Expr};
use crate::symbolic::Definition;
use crate::value::{pow10, ArithOp, CmpOp, Type, Value, MAX_SCALE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Boolean,
    Integer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinVar {
    pub name: String,
    pub kind: VarKind,
    pub lo: i128,
    pub hi: i128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Rel {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }

    pub fn holds(self, lhs: i128, rhs: i128) -> bool {
        match self {
            Rel::Le => lhs <= rhs,
            Rel::Lt => lhs < rhs,
            Rel::Eq => lhs == rhs,
            Rel::Ge => lhs >= rhs,
            Rel::Gt => lhs > rhs,
        }
    }
}

/// `Σ coef·var rel rhs` with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Constraint {
    pub terms: Vec<(usize, i128)>,
    pub rel: Rel,
    pub rhs: i128,
}

impl Constraint {
    pub fn lhs(&self, x: &[i128]) -> Option<i128> {
        self.terms
            .iter()
            .try_fold(0i128, |acc, &(v, a)| acc.checked_add(a.checked_mul(x[v])?))
    }

    pub fn satisfied_by(&self, x: &[i128]) -> bool {
        self.lhs(x).is_some_and(|l| self.rel.holds(l, self.rhs))
    }
}

/// How a formula variable is represented in the program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    /// Units of `10^-scale`.
    Numeric { scale: u8 },
    Text,
    Boolean,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Source {
    pub var: usize,
    pub encoding: Encoding,
}

/// A feasibility program (no objective).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Program {
    pub vars: Vec<LinVar>,
    pub constraints: Vec<Constraint>,
    /// Decimal scale of every linear expression.
    pub scale: u8,
    /// Formula variable → program variable.
    pub sources: BTreeMap<String, Source>,
    pub text: TextCodes,
}

/// Bounds for a formula variable. Numeric variables need both bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarDomain {
    pub ty: Type,
    pub lo: Option<Value>,
    pub hi: Option<Value>,
}

impl VarDomain {
    pub fn numeric(ty: Type, lo: Value, hi: Value) -> VarDomain {
        VarDomain {
            ty,
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn of_type(ty: Type) -> VarDomain {
        VarDomain { ty, lo: None, hi: None }
    }
}

pub type Domains = BTreeMap<String, VarDomain>;

#[derive(Clone, Copy, Debug)]
pub struct CompileOptions {
    /// Lower bound for every big-M constant.
    pub big_m_floor: i128,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { big_m_floor: 1 }
    }
}

/// Order-preserving integer codes for text.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TextCodes {
    /// Sorted constants with their codes.
    pub constants: Vec<(Arc<str>, i128)>,
    /// Gap codes: `(code, below)` where `below` is the constant just under
    /// the gap (`None` for the gap before the first constant).
    pub gaps: Vec<(i128, Option<Arc<str>>)>,
    pub max_code: i128,
}

impl TextCodes {
    fn new(mut consts: Vec<Arc<str>>) -> TextCodes {
        consts.sort();
        consts.dedup();
        let mut out = TextCodes::default();
        let mut next = 0i128;
        let mut prev: Option<Arc<str>> = None;
        for c in consts {
            let realizable = match &prev {
                None => !c.is_empty(),
                Some(p) => c.strip_prefix(&**p) != Some("\0"),
            };
            if realizable {
                out.gaps.push((next, prev.clone()));
                next += 1;
            }
            out.constants.push((c.clone(), next));
            next += 1;
            prev = Some(c);
        }
        out.gaps.push((next, prev));
        out.max_code = next;
        out
    }

    pub fn encode(&self, s: &str) -> i128 {
        match self.constants.binary_search_by(|(c, _)| (**c).cmp(s)) {
            Ok(i) => self.constants[i].1,
            Err(i) => {
                let below = i.checked_sub(1).map(|j| &self.constants[j].0);
                self.gaps
                    .iter()
                    .find(|(_, b)| b.as_ref() == below)
                    .map(|(code, _)| *code)
                    .expect("a string strictly between two constants implies a realizable gap")
            }
        }
    }

    /// A string with the given code.
    pub fn decode(&self, code: i128) -> Option<Arc<str>> {
        if let Some((c, _)) = self.constants.iter().find(|(_, k)| *k == code) {
            return Some(c.clone());
        }
        self.gaps.iter().find(|(k, _)| *k == code).map(|(_, below)| match below {
            None => Arc::from(""),
            Some(b) => Arc::from(format!("{b}\0")),
        })
    }
}

fn ck(v: Option<i128>) -> Result<i128> {
    v.ok_or_else(|| Error::Overflow("program coefficient".into()))
}

fn scale_pow(exp: u8) -> i128 {
    pow10(exp as u32)
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

/// Linear expression at the program scale.
#[derive(Clone, Debug, Default, PartialEq)]
struct Lin {
    terms: BTreeMap<usize, i128>,
    c: i128,
}

impl Lin {
    fn constant(c: i128) -> Lin {
        Lin {
            terms: BTreeMap::new(),
            c,
        }
    }

    fn var(v: usize, coef: i128) -> Lin {
        Lin {
            terms: [(v, coef)].into(),
            c: 0,
        }
    }

    fn is_const(&self) -> bool {
        self.terms.is_empty()
    }

    fn add(&self, o: &Lin, k: i128) -> Result<Lin> {
        let mut out = self.clone();
        for (&v, &a) in &o.terms {
            let e = out.terms.entry(v).or_insert(0);
            *e = ck(e.checked_add(ck(a.checked_mul(k))?))?;
            if *e == 0 {
                out.terms.remove(&v);
            }
        }
        out.c = ck(out.c.checked_add(ck(o.c.checked_mul(k))?))?;
        Ok(out)
    }

    fn scale(&self, k: i128) -> Result<Lin> {
        Lin::default().add(self, k)
    }
}

/// Literal of a compiled condition.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Lit {
    Const(bool),
    Pos(usize),
    Neg(usize),
}

impl Lit {
    fn not(self) -> Lit {
        match self {
            Lit::Const(b) => Lit::Const(!b),
            Lit::Pos(v) => Lit::Neg(v),
            Lit::Neg(v) => Lit::Pos(v),
        }
    }

    /// As a 0/1 linear expression.
    fn lin(self) -> Lin {
        match self {
            Lit::Const(b) => Lin::constant(b as i128),
            Lit::Pos(v) => Lin::var(v, 1),
            Lit::Neg(v) => Lin {
                terms: [(v, -1)].into(),
                c: 1,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sort {
    Num,
    Text,
    Bool,
}

fn sort_of_type(t: Type) -> Sort {
    match t {
        Type::Integer | Type::Decimal(_) => Sort::Num,
        Type::Text => Sort::Text,
        Type::Boolean => Sort::Bool,
    }
}

fn type_scale(t: Type) -> u8 {
    match t {
        Type::Decimal(s) => s,
        _ => 0,
    }
}

/// Natural decimal scale of an expression's values.
fn expr_scale(e: &Expr, doms: &Domains) -> Result<u8> {
    Ok(match e {
        Expr::Attr { name } => doms.get(name).map(|d| type_scale(d.ty)).unwrap_or(0),
        Expr::Const { value } => value.numeric_scale().unwrap_or(0),
        Expr::Arith { op, left, right } => {
            let (a, b) = (expr_scale(left, doms)?, expr_scale(right, doms)?);
            match op {
                ArithOp::Add | ArithOp::Sub => a.max(b),
                ArithOp::Mul => a.saturating_add(b),
                ArithOp::Div => return Err(Error::Unsupported("division in a solver formula".into())),
            }
        }
        Expr::Case { then, otherwise, .. } => expr_scale(then, doms)?.max(expr_scale(otherwise, doms)?),
    })
}

fn max_scale_cond(c: &Cond, doms: &Domains, acc: &mut u8) -> Result<()> {
    match c {
        Cond::Cmp { left, right, .. } => {
            max_scale_expr(left, doms, acc)?;
            max_scale_expr(right, doms, acc)
        }
        Cond::And { args } | Cond::Or { args } => args.iter().try_for_each(|a| max_scale_cond(a, doms, acc)),
        Cond::Not { arg } => max_scale_cond(arg, doms, acc),
        Cond::IsNull { arg } => max_scale_expr(arg, doms, acc),
        Cond::True | Cond::False => Ok(()),
    }
}

fn max_scale_expr(e: &Expr, doms: &Domains, acc: &mut u8) -> Result<()> {
    *acc = (*acc).max(expr_scale(e, doms)?);
    match e {
        Expr::Arith { left, right, .. } => {
            max_scale_expr(left, doms, acc)?;
            max_scale_expr(right, doms, acc)
        }
        Expr::Case { when, then, otherwise } => {
            max_scale_cond(when, doms, acc)?;
            max_scale_expr(then, doms, acc)?;
            max_scale_expr(otherwise, doms, acc)
        }
        _ => Ok(()),
    }
}

fn collect_text(c: &Cond, out: &mut Vec<Arc<str>>) {
    fn expr(e: &Expr, out: &mut Vec<Arc<str>>) {
        match e {
            Expr::Const { value: Value::Text(t) } => out.push(t.clone()),
            Expr::Arith { left, right, .. } => {
                expr(left, out);
                expr(right, out);
            }
            Expr::Case { when, then, otherwise } => {
                collect_text(when, out);
                expr(then, out);
                expr(otherwise, out);
            }
            _ => {}
        }
    }
    match c {
        Cond::Cmp { left, right, .. } => {
            expr(left, out);
            expr(right, out);
        }
        Cond::And { args } | Cond::Or { args } => args.iter().for_each(|a| collect_text(a, out)),
        Cond::Not { arg } => collect_text(arg, out),
        Cond::IsNull { arg } => expr(arg, out),
        Cond::True | Cond::False => {}
    }
}

fn has_null_or_div(e: &Expr) -> bool {
    match e {
        Expr::Attr { .. } => false,
        Expr::Const { value } => value.is_null(),
        Expr::Arith { op, left, right } => {
            *op == ArithOp::Div || has_null_or_div(left) || has_null_or_div(right)
        }
        Expr::Case { then, otherwise, .. } => has_null_or_div(then) || has_null_or_div(otherwise),
    }
}

struct Compiler<'a> {
    doms: &'a Domains,
    opts: CompileOptions,
    scale: u8,
    prog: Program,
    bools: usize,
    cases: usize,
}

/// Compiles `f` into a program whose feasible points are the satisfying
/// assignments of `f` within the domains. The root literal is forced to 1.
pub fn compile(f: &Cond, doms: &Domains, opts: &CompileOptions) -> Result<Program> {
    let mut scale = 0u8;
    max_scale_cond(f, doms, &mut scale)?;
    for d in doms.values() {
        scale = scale.max(type_scale(d.ty));
    }
    if scale > MAX_SCALE {
        return Err(Error::Overflow(format!("decimal scale {scale}")));
    }
    let mut texts = Vec::new();
    collect_text(f, &mut texts);
    let mut c = Compiler {
        doms,
        opts: *opts,
        scale,
        prog: Program {
            vars: Vec::new(),
            constraints: Vec::new(),
            scale,
            sources: BTreeMap::new(),
            text: TextCodes::new(texts),
        },
        bools: 0,
        cases: 0,
    };
    let root = c.cond(f)?;
    let b = c.new_bool("root");
    c.push(Lin::var(b, 1).add(&root.lin(), -1)?, Rel::Eq, 0);
    c.push(Lin::var(b, 1), Rel::Eq, 1);
    Ok(c.prog)
}

impl Compiler<'_> {
    fn new_bool(&mut self, hint: &str) -> usize {
        let name = if hint == "root" {
            "b_root".to_string()
        } else {
            self.bools += 1;
            format!("b{}", self.bools)
        };
        self.prog.vars.push(LinVar {
            name,
            kind: VarKind::Boolean,
            lo: 0,
            hi: 1,
        });
        self.prog.vars.len() - 1
    }

    /// Adds `lin rel rhs`, moving the constant part to the right.
    fn push(&mut self, lin: Lin, rel: Rel, rhs: i128) {
        let rhs = rhs - lin.c;
        self.prog.constraints.push(Constraint {
            terms: lin.terms.into_iter().collect(),
            rel,
            rhs,
        });
    }

    fn bounds(&self, l: &Lin) -> Result<(i128, i128)> {
        let (mut lo, mut hi) = (l.c, l.c);
        for (&v, &a) in &l.terms {
            let var = &self.prog.vars[v];
            let (x, y) = (ck(a.checked_mul(var.lo))?, ck(a.checked_mul(var.hi))?);
            lo = ck(lo.checked_add(x.min(y)))?;
            hi = ck(hi.checked_add(x.max(y)))?;
        }
        Ok((lo, hi))
    }

    fn big_m(&self, m: i128) -> i128 {
        m.max(self.opts.big_m_floor)
    }

    fn sort(&self, e: &Expr) -> Result<Sort> {
        Ok(match e {
            Expr::Attr { name } => sort_of_type(self.domain(name)?.ty),
            Expr::Const { value } => match value {
                Value::Integer(_) | Value::Decimal(_) => Sort::Num,
                Value::Text(_) => Sort::Text,
                Value::Boolean(_) => Sort::Bool,
                Value::Null => return Err(Error::Unsupported("Null constant in a solver formula".into())),
            },
            Expr::Arith { left, right, .. } => {
                if self.sort(left)? != Sort::Num || self.sort(right)? != Sort::Num {
                    return Err(Error::ty(format!("arithmetic over non-numeric operands in `{e}`")));
                }
                Sort::Num
            }
            Expr::Case { then, otherwise, .. } => {
                let (a, b) = (self.sort(then)?, self.sort(otherwise)?);
                if a != b {
                    return Err(Error::ty(format!("CASE branches of different types in `{e}`")));
                }
                a
            }
        })
    }

    fn domain(&self, name: &str) -> Result<&VarDomain> {
        self.doms.get(name).ok_or_else(|| Error::Unbounded(name.to_string()))
    }

    fn source(&mut self, name: &str) -> Result<Lin> {
        if let Some(s) = self.prog.sources.get(name) {
            return Ok(self.source_lin(s.var, s.encoding));
        }
        let d = self.domain(name)?.clone();
        let (encoding, kind, lo, hi) = match d.ty {
            Type::Integer | Type::Decimal(_) => {
                let s = type_scale(d.ty);
                let unit = scale_pow(self.scale - s);
                let (Some(lo), Some(hi)) = (&d.lo, &d.hi) else {
                    return Err(Error::Unbounded(name.to_string()));
                };
                let lo = ceil_div(lo.scaled_units(self.scale)?, unit);
                let hi = floor_div(hi.scaled_units(self.scale)?, unit);
                (Encoding::Numeric { scale: s }, VarKind::Integer, lo, hi)
            }
            Type::Text => (Encoding::Text, VarKind::Integer, 0, self.prog.text.max_code),
            Type::Boolean => (Encoding::Boolean, VarKind::Boolean, 0, 1),
        };
        self.prog.vars.push(LinVar {
            name: format!("x{}", self.prog.sources.len()),
            kind,
            lo,
            hi,
        });
        let var = self.prog.vars.len() - 1;
        self.prog.sources.insert(name.to_string(), Source { var, encoding });
        Ok(self.source_lin(var, encoding))
    }

    fn source_lin(&self, var: usize, enc: Encoding) -> Lin {
        match enc {
            Encoding::Numeric { scale } => Lin::var(var, scale_pow(self.scale - scale)),
            Encoding::Text | Encoding::Boolean => Lin::var(var, 1),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<Lin> {
        self.sort(e)?;
        match e {
            Expr::Attr { name } => self.source(name),
            Expr::Const { value } => Ok(Lin::constant(match value {
                Value::Text(t) => self.prog.text.encode(t),
                Value::Boolean(b) => *b as i128,
                v => v.scaled_units(self.scale)?,
            })),
            Expr::Arith { op, left, right } => {
                let (l, r) = (self.expr(left)?, self.expr(right)?);
                match op {
                    ArithOp::Add => l.add(&r, 1),
                    ArithOp::Sub => l.add(&r, -1),
                    ArithOp::Mul => {
                        let (k, other) = if r.is_const() {
                            (r.c, l)
                        } else if l.is_const() {
                            (l.c, r)
                        } else {
                            return Err(Error::Unsupported(format!("non-linear product `{e}`")));
                        };
                        let unit = scale_pow(self.scale);
                        let p = other.scale(k)?;
                        let exact = p.terms.values().chain([&p.c]).all(|a| a % unit == 0);
                        if !exact {
                            return Err(Error::Compile(format!("product `{e}` is not integral at scale {}", self.scale)));
                        }
                        Ok(Lin {
                            terms: p.terms.into_iter().map(|(v, a)| (v, a / unit)).collect(),
                            c: p.c / unit,
                        })
                    }
                    ArithOp::Div => Err(Error::Unsupported("division in a solver formula".into())),
                }
            }
            Expr::Case { when, then, otherwise } => {
                let b = self.cond(when)?;
                match b {
                    Lit::Const(true) => return self.expr(then),
                    Lit::Const(false) => return self.expr(otherwise),
                    _ => {}
                }
                let (e1, e2) = (self.expr(then)?, self.expr(otherwise)?);
                let ((l1, u1), (l2, u2)) = (self.bounds(&e1)?, self.bounds(&e2)?);
                let natural = match self.sort(e)? {
                    Sort::Num => expr_scale(e, self.doms)?,
                    _ => self.scale,
                };
                let unit = scale_pow(self.scale - natural);
                self.cases += 1;
                self.prog.vars.push(LinVar {
                    name: format!("v{}", self.cases),
                    kind: VarKind::Integer,
                    lo: ceil_div(l1.min(l2), unit),
                    hi: floor_div(u1.max(u2), unit),
                });
                let v = Lin::var(self.prog.vars.len() - 1, unit);
                let m = self.big_m(ck(u1.max(u2).checked_sub(l1.min(l2)))?);
                let bl = b.lin();
                // b = 1 ⇒ v = e1
                self.push(v.add(&e1, -1)?.add(&bl, m)?, Rel::Le, m);
                self.push(e1.add(&v, -1)?.add(&bl, m)?, Rel::Le, m);
                // b = 0 ⇒ v = e2
                self.push(v.add(&e2, -1)?.add(&bl, -m)?, Rel::Le, 0);
                self.push(e2.add(&v, -1)?.add(&bl, -m)?, Rel::Le, 0);
                Ok(v)
            }
        }
    }

    /// Literal `b` with `b ⇔ l > 0`.
    fn positive(&mut self, l: Lin) -> Result<Lit> {
        let (lo, hi) = self.bounds(&l)?;
        if lo > 0 {
            return Ok(Lit::Const(true));
        }
        if hi <= 0 {
            return Ok(Lit::Const(false));
        }
        let b = self.new_bool("");
        let m1 = self.big_m(1 - lo);
        let m2 = self.big_m(hi);
        // b = 1 ⇒ l > 0
        self.push(l.add(&Lin::var(b, 1), -m1)?, Rel::Gt, -m1);
        // b = 0 ⇒ l ≤ 0
        self.push(l.add(&Lin::var(b, 1), -m2)?, Rel::Le, 0);
        Ok(Lit::Pos(b))
    }

    fn and(&mut self, lits: Vec<Lit>) -> Lit {
        let mut rest = Vec::new();
        for l in lits {
            match l {
                Lit::Const(true) => {}
                Lit::Const(false) => return Lit::Const(false),
                l if rest.contains(&l.not()) => return Lit::Const(false),
                l if !rest.contains(&l) => rest.push(l),
                _ => {}
            }
        }
        match rest.len() {
            0 => Lit::Const(true),
            1 => rest[0],
            n => {
                let b = self.new_bool("");
                let mut sum = Lin::default();
                for l in &rest {
                    // b ≤ l
                    let ll = l.lin();
                    self.push(Lin::var(b, 1).add(&ll, -1).expect("0/1 terms"), Rel::Le, 0);
                    sum = sum.add(&ll, 1).expect("0/1 terms");
                }
                // b ≥ Σ l − (n − 1)
                self.push(Lin::var(b, 1).add(&sum, -1).expect("0/1 terms"), Rel::Ge, 1 - n as i128);
                Lit::Pos(b)
            }
        }
    }

    fn or(&mut self, lits: Vec<Lit>) -> Lit {
        self.and(lits.into_iter().map(Lit::not).collect()).not()
    }

    fn cond(&mut self, c: &Cond) -> Result<Lit> {
        Ok(match c {
            Cond::True => Lit::Const(true),
            Cond::False => Lit::Const(false),
            Cond::Not { arg } => self.cond(arg)?.not(),
            Cond::And { args } => {
                let lits = args.iter().map(|a| self.cond(a)).collect::<Result<Vec<_>>>()?;
                self.and(lits)
            }
            Cond::Or { args } => {
                let lits = args.iter().map(|a| self.cond(a)).collect::<Result<Vec<_>>>()?;
                self.or(lits)
            }
            Cond::IsNull { arg } => {
                if has_null_or_div(arg) {
                    return Err(Error::Unsupported(format!("null test `{c}` in a solver formula")));
                }
                Lit::Const(false)
            }
            Cond::Cmp { op, left, right } => {
                let (sl, sr) = (self.sort(left)?, self.sort(right)?);
                if sl != sr {
                    return Err(Error::ty(format!("comparison of different types in `{c}`")));
                }
                let d = self.expr(left)?.add(&self.expr(right)?, -1)?;
                match op {
                    CmpOp::Gt => self.positive(d)?,
                    CmpOp::Ge => self.positive(d.add(&Lin::constant(1), 1)?)?,
                    CmpOp::Lt => self.positive(d.scale(-1)?)?,
                    CmpOp::Le => self.positive(d.scale(-1)?.add(&Lin::constant(1), 1)?)?,
                    CmpOp::Eq | CmpOp::Ne => {
                        let ge = self.positive(d.add(&Lin::constant(1), 1)?)?;
                        let le = self.positive(d.scale(-1)?.add(&Lin::constant(1), 1)?)?;
                        let eq = self.and(vec![ge, le]);
                        if *op == CmpOp::Eq {
                            eq
                        } else {
                            eq.not()
                        }
                    }
                }
            }
        })
    }
}

impl Program {
    pub fn satisfied_by(&self, x: &[i128]) -> bool {
        x.len() == self.vars.len()
            && self.vars.iter().zip(x).all(|(v, &a)| v.lo <= a && a <= v.hi)
            && self.constraints.iter().all(|c| c.satisfied_by(x))
    }

    /// Encodes `v` for formula variable `name` in program units.
    pub fn encode(&self, name: &str, v: &Value) -> Result<i128> {
        let s = self
            .sources
            .get(name)
            .ok_or_else(|| Error::Compile(format!("variable `{name}` not in program")))?;
        match (s.encoding, v) {
            (Encoding::Numeric { scale }, v) if v.is_numeric() => v.scaled_units(scale),
            (Encoding::Text, Value::Text(t)) => Ok(self.text.encode(t)),
            (Encoding::Boolean, Value::Boolean(b)) => Ok(*b as i128),
            _ => Err(Error::ty(format!("value {v} does not fit variable `{name}`"))),
        }
    }

    /// Restricts formula variable `name` to `v`.
    pub fn fix(&mut self, name: &str, v: &Value) -> Result<()> {
        let code = self.encode(name, v)?;
        let var = &mut self.vars[self.sources[name].var];
        if code < var.lo || code > var.hi {
            self.constraints.push(Constraint {
                terms: vec![],
                rel: Rel::Eq,
                rhs: 1,
            });
        } else {
            var.lo = code;
            var.hi = code;
        }
        Ok(())
    }

    /// Formula variable values for a program point.
    pub fn decode(&self, x: &[i128]) -> Result<BTreeMap<String, Value>> {
        self.sources
            .iter()
            .map(|(name, s)| {
                let raw = x[s.var];
                let v = match s.encoding {
                    Encoding::Numeric { scale } => Value::from_units(raw, scale)?,
                    Encoding::Boolean => Value::Boolean(raw != 0),
                    Encoding::Text => Value::Text(
                        self.text
                            .decode(raw)
                            .ok_or_else(|| Error::Compile(format!("no text with code {raw}")))?,
                    ),
                };
                Ok((name.clone(), v))
            })
            .collect()
    }

    /// CPLEX LP text. Strict inequalities are written with the unit step
    /// already applied.
    pub fn to_lp(&self) -> String {
        let mut out = String::from("\\ feasibility program\n");
        for (name, s) in &self.sources {
            let _ = writeln!(out, "\\ {} = {name}", self.vars[s.var].name);
        }
        out.push_str("Minimize\n obj: 0\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{i}:");
            if c.terms.is_empty() {
                out.push_str(" 0 x_zero");
            }
            for (j, &(v, a)) in c.terms.iter().enumerate() {
                let sign = if a < 0 { "-" } else if j > 0 { "+" } else { "" };
                let _ = write!(out, " {sign}");
                if a.abs() != 1 {
                    let _ = write!(out, " {}", a.abs());
                }
                let _ = write!(out, " {}", self.vars[v].name);
            }
            let (rel, rhs) = match c.rel {
                Rel::Lt => ("<=", c.rhs - 1),
                Rel::Gt => (">=", c.rhs + 1),
                r => (r.symbol(), c.rhs),
            };
            let _ = writeln!(out, " {rel} {rhs}");
        }
        out.push_str("Bounds\n");
        for v in self.vars.iter().filter(|v| v.kind == VarKind::Integer) {
            let _ = writeln!(out, " {} <= {} <= {}", v.lo, v.name, v.hi);
        }
        for name in ["Generals", "Binaries"] {
            let kind = if name == "Generals" {
                VarKind::Integer
            } else {
                VarKind::Boolean
            };
            let vs: Vec<&str> = self.vars.iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
            if !vs.is_empty() {
                let _ = writeln!(out, "{name}\n {}", vs.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Interval of `e` over the domains, as a domain of its result type.
pub fn domain_of_expr(e: &Expr, doms: &Domains) -> Result<VarDomain> {
    match e {
        Expr::Attr { name } => doms.get(name).cloned().ok_or_else(|| Error::Unbounded(name.clone())),
        Expr::Const { value } => {
            let ty = match value {
                Value::Integer(_) => Type::Integer,
                Value::Decimal(d) => Type::Decimal(d.scale()),
                Value::Text(_) => Type::Text,
                Value::Boolean(_) => Type::Boolean,
                Value::Null => return Err(Error::Unsupported("Null constant in a solver formula".into())),
            };
            Ok(VarDomain {
                ty,
                lo: Some(value.clone()),
                hi: Some(value.clone()),
            })
        }
        Expr::Arith { op, left, right } => {
            let (a, b) = (domain_of_expr(left, doms)?, domain_of_expr(right, doms)?);
            let s = expr_scale(e, doms)?;
            let ty = if s == 0 { Type::Integer } else { Type::Decimal(s) };
            let (Some(al), Some(ah), Some(bl), Some(bh)) = (a.lo, a.hi, b.lo, b.hi) else {
                return Err(Error::Unbounded(e.to_string()));
            };
            let (lo, hi) = match op {
                ArithOp::Add => (Value::arith(*op, &al, &bl)?, Value::arith(*op, &ah, &bh)?),
                ArithOp::Sub => (Value::arith(*op, &al, &bh)?, Value::arith(*op, &ah, &bl)?),
                ArithOp::Mul => {
                    let corners = [
                        Value::arith(*op, &al, &bl)?,
                        Value::arith(*op, &al, &bh)?,
                        Value::arith(*op, &ah, &bl)?,
                        Value::arith(*op, &ah, &bh)?,
                    ];
                    (
                        corners.iter().min().cloned().expect("four corners"),
                        corners.iter().max().cloned().expect("four corners"),
                    )
                }
                ArithOp::Div => return Err(Error::Unsupported("division in a solver formula".into())),
            };
            Ok(VarDomain::numeric(ty, lo, hi))
        }
        Expr::Case { then, otherwise, .. } => {
            let (a, b) = (domain_of_expr(then, doms)?, domain_of_expr(otherwise, doms)?);
            if sort_of_type(a.ty) != sort_of_type(b.ty) {
                return Err(Error::ty(format!("CASE branches of different types in `{e}`")));
            }
            if sort_of_type(a.ty) != Sort::Num {
                return Ok(VarDomain::of_type(a.ty));
            }
            let s = type_scale(a.ty).max(type_scale(b.ty));
            let ty = if s == 0 { Type::Integer } else { Type::Decimal(s) };
            let lo = a.lo.into_iter().chain(b.lo).min();
            let hi = a.hi.into_iter().chain(b.hi).max();
            Ok(VarDomain { ty, lo, hi })
        }
    }
}

/// Adds domains for the variables defined by `defs`, in order.
pub fn extend_domains(doms: &mut Domains, defs: &[Definition]) -> Result<()> {
    for d in defs {
        let dom = domain_of_expr(&d.expr, doms)?;
        doms.insert(d.var.clone(), dom);
    }
    Ok(())
}
