//! Seeded random instances (databases, conditions, histories and
//! modifications) for property tests and benchmarks.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::expr::{Cond, Expr};
use crate::query::Query;
use crate::relation::{tuple, Database, Relation};
use crate::statement::{Modification, Statement};
use crate::value::{CmpOp, Schema, Type, Value};

/// Shape of generated instances. Relations are `R(K, A, B)` and, with
/// insert-queries, `S(K, A, B)`, all integer.
#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_statements: usize,
    pub max_tuples: usize,
    /// Constants and stored values lie in `0..domain`.
    pub domain: i64,
    /// `K` is unique in the database, never updated, and tuple inserts use
    /// fresh keys.
    pub keyed: bool,
    pub inserts: bool,
    pub deletes: bool,
    pub insert_queries: bool,
    /// Modifications may insert or delete statements, not only replace.
    pub structural_mods: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_statements: 6,
            max_tuples: 8,
            domain: 5,
            keyed: true,
            inserts: false,
            deletes: true,
            insert_queries: false,
            structural_mods: false,
        }
    }
}

const OPS: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

pub fn schema(name: &str) -> Arc<Schema> {
    Arc::new(
        Schema::new(name, &[("K", Type::Integer), ("A", Type::Integer), ("B", Type::Integer)]).expect("valid schema"),
    )
}

/// Generator state: configuration plus the next fresh key.
#[derive(Clone, Debug)]
pub struct Gen {
    pub cfg: GenConfig,
    next_key: i64,
}

impl Gen {
    pub fn new(cfg: GenConfig) -> Gen {
        let next_key = cfg.domain.max(cfg.max_tuples as i64) + 1;
        Gen { cfg, next_key }
    }

    pub fn relations(&self) -> Vec<&'static str> {
        if self.cfg.insert_queries {
            vec!["R", "S"]
        } else {
            vec!["R"]
        }
    }

    fn value(&self, rng: &mut impl Rng) -> i64 {
        rng.gen_range(0..self.cfg.domain.max(1))
    }

    pub fn database(&self, rng: &mut impl Rng) -> Database {
        let mut db = Database::new();
        for name in self.relations() {
            let n = rng.gen_range(0..=self.cfg.max_tuples);
            let mut rel = Relation::empty(schema(name));
            let mut keys: Vec<i64> = (0..self.cfg.max_tuples.max(1) as i64).collect();
            keys.shuffle(rng);
            for k in keys.into_iter().take(n) {
                let key = if self.cfg.keyed { k } else { self.value(rng) };
                rel.insert(tuple(vec![
                    Value::Integer(key),
                    Value::Integer(self.value(rng)),
                    Value::Integer(self.value(rng)),
                ]));
            }
            db.add(rel);
        }
        db
    }

    /// Condition over `attrs` with constants from the domain.
    pub fn cond(&self, rng: &mut impl Rng, attrs: &[&str], depth: usize) -> Cond {
        if depth > 0 && rng.gen_bool(0.4) {
            return match rng.gen_range(0..3) {
                0 => Cond::and(vec![self.cond(rng, attrs, depth - 1), self.cond(rng, attrs, depth - 1)]),
                1 => Cond::or(vec![self.cond(rng, attrs, depth - 1), self.cond(rng, attrs, depth - 1)]),
                _ => Cond::not(self.cond(rng, attrs, depth - 1)),
            };
        }
        let op = *OPS.choose(rng).expect("non-empty");
        let a = Expr::attr(*attrs.choose(rng).expect("attributes"));
        match rng.gen_range(0..10) {
            0 => Cond::True,
            1 | 2 => a.cmp(op, Expr::attr(*attrs.choose(rng).expect("attributes"))),
            3 => a.add(Expr::attr(*attrs.choose(rng).expect("attributes"))).cmp(op, Expr::int(self.value(rng) * 2)),
            _ => a.cmp(op, Expr::int(self.value(rng))),
        }
    }

    /// Linear expression over `attrs`.
    pub fn expr(&self, rng: &mut impl Rng, attrs: &[&str], depth: usize) -> Expr {
        let pick = |rng: &mut dyn rand::RngCore| Expr::attr(*attrs.choose(rng).expect("attributes"));
        match rng.gen_range(0..if depth > 0 { 7 } else { 6 }) {
            0 => Expr::int(self.value(rng)),
            1 => pick(rng),
            2 => pick(rng).add(Expr::int(rng.gen_range(1..3))),
            3 => pick(rng).sub(pick(rng)),
            4 => Expr::int(rng.gen_range(2..4)).mul(pick(rng)),
            5 => pick(rng).sub(Expr::int(1)),
            _ => Expr::case(
                self.cond(rng, attrs, 1),
                self.expr(rng, attrs, depth - 1),
                self.expr(rng, attrs, depth - 1),
            ),
        }
    }

    fn fresh_tuple(&mut self, rng: &mut impl Rng) -> Vec<Value> {
        let key = if self.cfg.keyed {
            self.next_key += 1;
            self.next_key
        } else {
            self.value(rng)
        };
        vec![
            Value::Integer(key),
            Value::Integer(self.value(rng)),
            Value::Integer(self.value(rng)),
        ]
    }

    /// Random statement; `kind` 0..4 selects update, delete, tuple insert
    /// and insert-query when enabled, `None` draws one.
    pub fn statement(&mut self, rng: &mut impl Rng, kind: Option<usize>) -> Statement {
        let rel = *self.relations().choose(rng).expect("relations");
        let kind = kind.unwrap_or_else(|| {
            let mut kinds = vec![0, 0, 0];
            if self.cfg.deletes {
                kinds.push(1);
            }
            if self.cfg.inserts {
                kinds.push(2);
            }
            if self.cfg.insert_queries {
                kinds.push(3);
            }
            *kinds.choose(rng).expect("kinds")
        });
        let attrs = ["K", "A", "B"];
        match kind {
            1 => Statement::delete(rel, self.cond(rng, &attrs, 1)),
            2 => {
                let t = self.fresh_tuple(rng);
                Statement::insert(rel, t)
            }
            3 => {
                let (to, from) = if rng.gen_bool(0.5) { ("R", "S") } else { ("S", "R") };
                Statement::insert_query(to, Query::select(self.cond(rng, &attrs, 1), Query::base(from)))
            }
            _ => {
                let writable: &[&str] = if self.cfg.keyed { &["A", "B"] } else { &attrs };
                let n = rng.gen_range(1..=writable.len());
                let mut targets: Vec<&str> = writable.to_vec();
                targets.shuffle(rng);
                let set = targets
                    .into_iter()
                    .take(n)
                    .map(|t| (t, self.expr(rng, &attrs, 1)))
                    .collect();
                Statement::update(rel, set, self.cond(rng, &attrs, 1))
            }
        }
    }

    pub fn history(&mut self, rng: &mut impl Rng) -> Vec<Statement> {
        let n = rng.gen_range(1..=self.cfg.max_statements.max(1));
        (0..n).map(|_| self.statement(rng, None)).collect()
    }

    /// `count` modifications valid against `h` applied in order.
    pub fn modifications(&mut self, rng: &mut impl Rng, h: &[Statement], count: usize) -> Vec<Modification> {
        let mut len = h.len();
        let mut cur = h.to_vec();
        let mut out = Vec::new();
        for _ in 0..count {
            let choice = if self.cfg.structural_mods { rng.gen_range(0..4) } else { 0 };
            let m = match choice {
                1 => Modification::Insert {
                    pos: rng.gen_range(1..=len + 1),
                    statement: self.statement(rng, None),
                },
                2 if len > 0 => Modification::Delete {
                    pos: rng.gen_range(1..=len),
                },
                _ if len > 0 => {
                    let pos = rng.gen_range(1..=len);
                    let kind = match cur[pos - 1] {
                        Statement::Delete { .. } => 1,
                        Statement::InsertTuple { .. } => 2,
                        Statement::InsertQuery { .. } => 3,
                        _ => 0,
                    };
                    // same kind unless structural edits are allowed
                    let kind = if self.cfg.structural_mods && rng.gen_bool(0.2) { None } else { Some(kind) };
                    Modification::Replace {
                        pos,
                        statement: self.statement(rng, kind),
                    }
                }
                _ => Modification::Insert {
                    pos: 1,
                    statement: self.statement(rng, None),
                },
            };
            match &m {
                Modification::Replace { pos, statement } => cur[pos - 1] = statement.clone(),
                Modification::Insert { pos, statement } => {
                    cur.insert(pos - 1, statement.clone());
                    len += 1;
                }
                Modification::Delete { pos } => {
                    cur.remove(pos - 1);
                    len -= 1;
                }
            }
            out.push(m);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statement::{apply_mods, run_history};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_instances_execute() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = Gen::new(GenConfig {
            inserts: true,
            insert_queries: true,
            structural_mods: true,
            ..GenConfig::default()
        });
        for _ in 0..200 {
            let db = g.database(&mut rng);
            let h = g.history(&mut rng);
            let mods = g.modifications(&mut rng, &h, 3);
            let hm = apply_mods(&h, &mods).unwrap();
            run_history(&h, &db).unwrap();
            run_history(&hm, &db).unwrap();
        }
    }
}
