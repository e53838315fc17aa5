//! Satisfiability of conditions: the compiled-program path and an
//! exhaustive enumeration used as a reference.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Cond;
use crate::milp::{compile, CompileOptions, Domains};
use crate::solver::{solve, SolveOptions, Status};
use crate::value::Value;

/// Enumeration limit for [`brute_force_sat`].
pub const MAX_COMBINATIONS: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", content = "witness", rename_all = "snake_case")]
pub enum Sat {
    Feasible(BTreeMap<String, Value>),
    Infeasible,
    Unknown,
}

impl Sat {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Sat::Feasible(_))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Sat::Infeasible)
    }
}

/// Result of [`check_sat`] with the solver's node count.
#[derive(Clone, Debug, PartialEq)]
pub struct SatRun {
    pub sat: Sat,
    pub nodes: u64,
}

/// Compiles and solves `f`. A witness is checked against `f` by direct
/// evaluation before it is returned.
pub fn check_sat(f: &Cond, doms: &Domains, copts: &CompileOptions, sopts: &SolveOptions) -> Result<SatRun> {
    let p = compile(f, doms, copts)?;
    let s = solve(&p, sopts);
    let sat = match s.status {
        Status::Feasible(x) => {
            let w = p.decode(&x)?;
            if !f.eval(&w)? {
                return Err(Error::Compile(format!("solver witness does not satisfy `{f}`")));
            }
            Sat::Feasible(w)
        }
        Status::Infeasible => Sat::Infeasible,
        Status::Unknown => Sat::Unknown,
    };
    Ok(SatRun { sat, nodes: s.nodes })
}

/// Exhaustive search over the product of `domains` (variables of `f`
/// missing from `domains` make evaluation fail).
pub fn brute_force_sat(f: &Cond, domains: &BTreeMap<String, Vec<Value>>) -> Result<Sat> {
    let total = domains
        .values()
        .try_fold(1u128, |acc, d| acc.checked_mul(d.len() as u128))
        .unwrap_or(u128::MAX);
    if total > MAX_COMBINATIONS {
        return Err(Error::DomainOverflow(total));
    }
    if total == 0 {
        return Ok(Sat::Infeasible);
    }
    let names: Vec<&String> = domains.keys().collect();
    let mut idx = vec![0usize; names.len()];
    let mut env: BTreeMap<String, Value> = names
        .iter()
        .map(|n| ((*n).clone(), domains[*n][0].clone()))
        .collect();
    loop {
        if f.eval(&env)? {
            return Ok(Sat::Feasible(env));
        }
        // odometer increment
        let mut k = names.len();
        loop {
            if k == 0 {
                return Ok(Sat::Infeasible);
            }
            k -= 1;
            idx[k] += 1;
            let d = &domains[names[k]];
            if idx[k] < d.len() {
                env.insert(names[k].clone(), d[idx[k]].clone());
                break;
            }
            idx[k] = 0;
            env.insert(names[k].clone(), d[0].clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_cond;

    #[test]
    fn enumeration_finds_no_member() {
        let f = parse_cond("x = 1 OR x = 2").unwrap();
        let d = [("x".to_string(), vec![3.into(), 4.into()])].into();
        assert_eq!(brute_force_sat(&f, &d).unwrap(), Sat::Infeasible);
    }

    #[test]
    fn enumeration_limit() {
        let f = parse_cond("x = 1").unwrap();
        let big: Vec<Value> = (0..1001).map(Value::Integer).collect();
        let d = [("x".to_string(), big.clone()), ("y".to_string(), big)].into();
        assert!(matches!(brute_force_sat(&f, &d), Err(Error::DomainOverflow(_))));
    }
}
