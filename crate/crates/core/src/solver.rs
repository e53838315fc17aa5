//! Feasibility solver for compiled programs: depth-first branch and bound
//! with interval propagation at every node and, on small programs, an
//! exact rational simplex on the relaxation.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::milp::{Program, Rel, VarKind};
use crate::rational::Rat;

pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000;

/// Propagation passes per node.
const PROPAGATION_ROUNDS: usize = 32;

pub const DEFAULT_LP_MAX_CELLS: usize = 10_000;

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub node_budget: u64,
    /// Wall-clock limit; reaching it reports `Unknown` like the budget.
    pub deadline: Option<Instant>,
    /// Programs whose tableau (rows times variables) exceeds this many
    /// cells branch on propagation alone; their pivots cost more than the
    /// pruning saves.
    pub lp_max_cells: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            node_budget: DEFAULT_NODE_BUDGET,
            deadline: None,
            lp_max_cells: DEFAULT_LP_MAX_CELLS,
        }
    }
}

impl SolveOptions {
    pub fn with_budget(node_budget: u64) -> SolveOptions {
        SolveOptions {
            node_budget,
            ..SolveOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    /// A point satisfying every constraint, one value per program variable.
    Feasible(Vec<i128>),
    Infeasible,
    /// Node budget exhausted.
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusKind {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub status: Status,
    pub nodes: u64,
}

impl Solution {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, Status::Feasible(_))
    }

    pub fn kind(&self) -> StatusKind {
        match self.status {
            Status::Feasible(_) => StatusKind::Feasible,
            Status::Infeasible => StatusKind::Infeasible,
            Status::Unknown => StatusKind::Unknown,
        }
    }
}

/// `Σ a·x ≤ rhs` or `= rhs` after removing strictness and `≥`.
#[derive(Clone, Debug)]
struct Row {
    terms: Vec<(usize, i128)>,
    eq: bool,
    rhs: i128,
}

fn normalize(p: &Program) -> Option<Vec<Row>> {
    let mut out = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let neg = || c.terms.iter().map(|&(v, a)| (v, -a)).collect::<Vec<_>>();
        let row = match c.rel {
            Rel::Le => Row { terms: c.terms.clone(), eq: false, rhs: c.rhs },
            Rel::Lt => Row { terms: c.terms.clone(), eq: false, rhs: c.rhs - 1 },
            Rel::Ge => Row { terms: neg(), eq: false, rhs: -c.rhs },
            Rel::Gt => Row { terms: neg(), eq: false, rhs: -(c.rhs + 1) },
            Rel::Eq => Row { terms: c.terms.clone(), eq: true, rhs: c.rhs },
        };
        if row.terms.is_empty() {
            let ok = if row.eq { row.rhs == 0 } else { 0 <= row.rhs };
            if !ok {
                return None;
            }
            continue;
        }
        out.push(row);
    }
    Some(out)
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

/// Tightens `lo`/`hi` from `Σ a·x ≤ rhs`. Returns false on a conflict.
fn tighten_le(terms: &[(usize, i128)], rhs: i128, lo: &mut [i128], hi: &mut [i128], changed: &mut bool) -> bool {
    let contrib = |a: i128, l: i128, h: i128| -> Option<i128> {
        if a > 0 {
            a.checked_mul(l)
        } else {
            a.checked_mul(h)
        }
    };
    let mut min_act: i128 = 0;
    for &(v, a) in terms {
        match contrib(a, lo[v], hi[v]).and_then(|c| min_act.checked_add(c)) {
            Some(m) => min_act = m,
            None => return true,
        }
    }
    if min_act > rhs {
        return false;
    }
    for &(v, a) in terms {
        let Some(own) = contrib(a, lo[v], hi[v]) else {
            continue;
        };
        let Some(slack) = rhs.checked_sub(min_act - own) else {
            continue;
        };
        if a > 0 {
            let b = floor_div(slack, a);
            if b < hi[v] {
                hi[v] = b;
                *changed = true;
            }
        } else {
            let b = ceil_div(slack, a);
            if b > lo[v] {
                lo[v] = b;
                *changed = true;
            }
        }
        if lo[v] > hi[v] {
            return false;
        }
    }
    true
}

fn propagate(rows: &[Row], lo: &mut [i128], hi: &mut [i128]) -> bool {
    let mut neg: Vec<(usize, i128)> = Vec::new();
    for _ in 0..PROPAGATION_ROUNDS {
        let mut changed = false;
        for r in rows {
            if !tighten_le(&r.terms, r.rhs, lo, hi, &mut changed) {
                return false;
            }
            if r.eq {
                neg.clear();
                neg.extend(r.terms.iter().map(|&(v, a)| (v, -a)));
                if !tighten_le(&neg, -r.rhs, lo, hi, &mut changed) {
                    return false;
                }
            }
        }
        if !changed {
            break;
        }
    }
    true
}

type Q = Rat;

fn q(v: i128) -> Q {
    Rat::int(v)
}

/// General-form simplex: every row defines a slack `s = Σ a·x` with bounds
/// and the tableau expresses basic variables in terms of non-basic ones.
/// Pivoting follows Bland's rule.
struct Simplex {
    rows: Vec<BTreeMap<usize, Q>>,
    basic_of_row: Vec<usize>,
    row_of: Vec<Option<usize>>,
    value: Vec<Q>,
    lo: Vec<Option<Q>>,
    hi: Vec<Option<Q>>,
}

impl Simplex {
    fn new(n: usize, rows: &[Row], lo: &[i128]) -> Simplex {
        let m = rows.len();
        let mut s = Simplex {
            rows: Vec::with_capacity(m),
            basic_of_row: Vec::with_capacity(m),
            row_of: vec![None; n + m],
            value: lo.iter().map(|&l| q(l)).chain((0..m).map(|_| Q::zero())).collect(),
            lo: vec![None; n + m],
            hi: vec![None; n + m],
        };
        for (i, r) in rows.iter().enumerate() {
            let slack = n + i;
            let row: BTreeMap<usize, Q> = r.terms.iter().map(|&(v, a)| (v, q(a))).collect();
            let val = row.iter().fold(Q::zero(), |acc, (v, a)| &acc + &(a * &s.value[*v]));
            s.value[slack] = val;
            s.hi[slack] = Some(q(r.rhs));
            if r.eq {
                s.lo[slack] = Some(q(r.rhs));
            }
            s.rows.push(row);
            s.basic_of_row.push(slack);
            s.row_of[slack] = Some(i);
        }
        s
    }

    fn update_nonbasic(&mut self, j: usize, v: Q) {
        let delta = &v - &self.value[j];
        if delta.is_zero() {
            return;
        }
        for (r, row) in self.rows.iter().enumerate() {
            if let Some(a) = row.get(&j) {
                let b = self.basic_of_row[r];
                self.value[b] = &self.value[b] + &(a * &delta);
            }
        }
        self.value[j] = v;
    }

    /// Sets the bounds of structural variable `j`.
    fn set_bounds(&mut self, j: usize, lo: i128, hi: i128) {
        let (l, h) = (q(lo), q(hi));
        if self.row_of[j].is_none() {
            if self.value[j] < l {
                self.update_nonbasic(j, l.clone());
            } else if self.value[j] > h {
                self.update_nonbasic(j, h.clone());
            }
        }
        self.lo[j] = Some(l);
        self.hi[j] = Some(h);
    }

    fn below(&self, v: usize) -> bool {
        self.lo[v].as_ref().is_some_and(|l| &self.value[v] < l)
    }

    fn above(&self, v: usize) -> bool {
        self.hi[v].as_ref().is_some_and(|h| &self.value[v] > h)
    }

    fn can_increase(&self, v: usize) -> bool {
        self.hi[v].as_ref().is_none_or(|h| &self.value[v] < h)
    }

    fn can_decrease(&self, v: usize) -> bool {
        self.lo[v].as_ref().is_none_or(|l| &self.value[v] > l)
    }

    fn check(&mut self) -> bool {
        loop {
            let violated = self
                .basic_of_row
                .iter()
                .enumerate()
                .filter(|&(_, &b)| self.below(b) || self.above(b))
                .min_by_key(|&(_, &b)| b)
                .map(|(r, &b)| (r, b));
            let Some((r, b)) = violated else {
                return true;
            };
            let raise = self.below(b);
            let entering = self.rows[r]
                .iter()
                .filter(|(&j, a)| {
                    let pos = a.is_positive();
                    if raise == pos {
                        self.can_increase(j)
                    } else {
                        self.can_decrease(j)
                    }
                })
                .map(|(&j, _)| j)
                .min();
            let Some(j) = entering else {
                return false;
            };
            let target = if raise {
                self.lo[b].clone().expect("violated lower bound exists")
            } else {
                self.hi[b].clone().expect("violated upper bound exists")
            };
            self.pivot_and_update(r, j, target);
        }
    }

    fn pivot_and_update(&mut self, r: usize, j: usize, target: Q) {
        let b = self.basic_of_row[r];
        let a = self.rows[r][&j].clone();
        let theta = &(&target - &self.value[b]) / &a;
        self.value[b] = target;
        self.value[j] = &self.value[j] + &theta;
        for (k, row) in self.rows.iter().enumerate() {
            if k == r {
                continue;
            }
            if let Some(c) = row.get(&j) {
                let bk = self.basic_of_row[k];
                self.value[bk] = &self.value[bk] + &(c * &theta);
            }
        }
        // b = a·j + Σ c·x  ⇒  j = b/a − Σ (c/a)·x
        let old = std::mem::take(&mut self.rows[r]);
        let inv = &Q::one() / &a;
        let mut new_row: BTreeMap<usize, Q> = BTreeMap::new();
        new_row.insert(b, inv.clone());
        for (x, c) in old {
            if x != j {
                new_row.insert(x, -&(&c * &inv));
            }
        }
        for k in 0..self.rows.len() {
            if k == r {
                continue;
            }
            let Some(d) = self.rows[k].remove(&j) else {
                continue;
            };
            for (x, c) in &new_row {
                let e = self.rows[k].entry(*x).or_insert_with(Q::zero);
                *e = &*e + &(&d * c);
                if e.is_zero() {
                    self.rows[k].remove(x);
                }
            }
        }
        self.rows[r] = new_row;
        self.basic_of_row[r] = j;
        self.row_of[j] = Some(r);
        self.row_of[b] = None;
    }
}

struct Node {
    lo: Vec<i128>,
    hi: Vec<i128>,
}

/// Decides feasibility of `p`. Any returned point satisfies every
/// constraint of `p` exactly.
pub fn solve(p: &Program, opts: &SolveOptions) -> Solution {
    let Some(rows) = normalize(p) else {
        return Solution {
            status: Status::Infeasible,
            nodes: 0,
        };
    };
    let n = p.vars.len();
    let root = Node {
        lo: p.vars.iter().map(|v| v.lo).collect(),
        hi: p.vars.iter().map(|v| v.hi).collect(),
    };
    let mut lp = (rows.len().saturating_mul(n) <= opts.lp_max_cells).then(|| Simplex::new(n, &rows, &root.lo));
    let mut stack = vec![root];
    let mut nodes = 0u64;
    while let Some(mut node) = stack.pop() {
        if nodes >= opts.node_budget || opts.deadline.is_some_and(|d| nodes.is_multiple_of(64) && Instant::now() >= d) {
            return Solution {
                status: Status::Unknown,
                nodes,
            };
        }
        nodes += 1;
        if node.lo.iter().zip(&node.hi).any(|(l, h)| l > h) || !propagate(&rows, &mut node.lo, &mut node.hi) {
            continue;
        }
        if node.lo == node.hi {
            if p.satisfied_by(&node.lo) {
                return Solution {
                    status: Status::Feasible(node.lo),
                    nodes,
                };
            }
            continue;
        }
        let Some(lp) = lp.as_mut() else {
            // smallest open domain, booleans first; lower half explored first
            let j = (0..n)
                .filter(|&j| node.lo[j] < node.hi[j])
                .min_by_key(|&j| (p.vars[j].kind != VarKind::Boolean, node.hi[j] - node.lo[j]))
                .expect("some domain is open");
            let mid = floor_div(node.lo[j], 2) + floor_div(node.hi[j], 2) + (node.lo[j] & node.hi[j] & 1);
            let mut down = Node {
                lo: node.lo.clone(),
                hi: node.hi.clone(),
            };
            down.hi[j] = mid;
            let mut up = node;
            up.lo[j] = mid + 1;
            stack.push(up);
            stack.push(down);
            continue;
        };
        for j in 0..n {
            lp.set_bounds(j, node.lo[j], node.hi[j]);
        }
        if !lp.check() {
            continue;
        }
        let frac = |j: usize| !lp.value[j].is_integer();
        let branch = (0..n)
            .filter(|&j| p.vars[j].kind == VarKind::Boolean && frac(j))
            .chain((0..n).filter(|&j| p.vars[j].kind == VarKind::Integer && frac(j)))
            .next();
        match branch {
            None => {
                let x: Vec<i128> = (0..n)
                    .map(|j| lp.value[j].floor().expect("bounded by i128 limits"))
                    .collect();
                if p.satisfied_by(&x) {
                    return Solution {
                        status: Status::Feasible(x),
                        nodes,
                    };
                }
            }
            Some(j) => {
                let v = &lp.value[j];
                let fl = v.floor().expect("bounded by i128 limits");
                let up_first = v.frac_at_least_half();
                let mut down = Node {
                    lo: node.lo.clone(),
                    hi: node.hi.clone(),
                };
                down.hi[j] = fl;
                let mut up = node;
                up.lo[j] = fl + 1;
                if up_first {
                    stack.push(down);
                    stack.push(up);
                } else {
                    stack.push(up);
                    stack.push(down);
                }
            }
        }
    }
    Solution {
        status: Status::Infeasible,
        nodes,
    }
}
