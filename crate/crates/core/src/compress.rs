//! Lossy compression of a relation into per-group range and membership
//! constraints over the version-0 variables.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Cond, Expr};
use crate::relation::{Database, Relation};
use crate::symbolic::input_var;
use crate::value::{CmpOp, Type, Value};

pub const DEFAULT_GROUPS: usize = 8;

/// Unordered attributes with more distinct values than this in a group get
/// no constraint.
pub const MAX_MEMBERS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttrConstraint {
    Eq { value: Value },
    Range { lo: Value, hi: Value },
    Members { values: Vec<Value> },
    /// Only Null occurs.
    Null,
    Unconstrained,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttrSummary {
    pub attr: String,
    pub constraint: AttrConstraint,
    /// Some row in the group has Null here.
    pub nullable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Group {
    pub rows: usize,
    pub attrs: Vec<AttrSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Compressed {
    pub relation: String,
    pub group_by: Option<String>,
    pub groups: Vec<Group>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressOptions {
    /// Per-relation grouping attribute; relations without an entry use
    /// [`default_group_attr`].
    pub group_by: BTreeMap<String, String>,
    pub groups: usize,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions {
            group_by: BTreeMap::new(),
            groups: DEFAULT_GROUPS,
        }
    }
}

/// The text attribute with the fewest distinct values (first on ties),
/// else the first attribute.
pub fn default_group_attr(r: &Relation) -> Option<String> {
    let attrs = &r.schema.attributes;
    let mut best: Option<(usize, &str)> = None;
    for (i, a) in attrs.iter().enumerate() {
        if a.ty != Type::Text {
            continue;
        }
        let distinct: BTreeSet<&Value> = r.iter().map(|t| &t[i]).collect();
        if best.is_none_or(|(n, _)| distinct.len() < n) {
            best = Some((distinct.len(), &a.name));
        }
    }
    best.map(|(_, n)| n.to_string())
        .or_else(|| attrs.first().map(|a| a.name.clone()))
}

/// Partitions `r` into at most `k` groups on `group_by` and summarizes each.
///
/// With more than `k` distinct group values, values are split in sorted
/// order into `k` contiguous runs of near-equal size.
pub fn compress(r: &Relation, group_by: Option<&str>, k: usize) -> Result<Compressed> {
    if k == 0 {
        return Err(Error::Data("group count must be at least 1".into()));
    }
    let schema = &r.schema;
    let gi = match group_by {
        Some(a) => Some(
            schema
                .index_of(a)
                .ok_or_else(|| Error::schema(format!("unknown group attribute `{a}` in `{}`", schema.name)))?,
        ),
        None => None,
    };
    let mut buckets: Vec<Vec<&[Value]>> = Vec::new();
    match gi {
        None => buckets.push(r.iter().map(|t| &t[..]).collect()),
        Some(gi) => {
            let mut by_value: BTreeMap<&Value, Vec<&[Value]>> = BTreeMap::new();
            for t in r.iter() {
                by_value.entry(&t[gi]).or_default().push(&t[..]);
            }
            let distinct = by_value.len();
            let per = distinct.div_ceil(k).max(1);
            let runs = if distinct <= k { distinct } else { distinct.div_ceil(per) };
            buckets.resize_with(runs, Vec::new);
            for (j, rows) in by_value.into_values().enumerate() {
                let b = if distinct <= k { j } else { j / per };
                buckets[b].extend(rows);
            }
        }
    }
    let groups = buckets
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|rows| summarize(r, &rows))
        .collect();
    Ok(Compressed {
        relation: schema.name.clone(),
        group_by: group_by.map(str::to_string),
        groups,
    })
}

fn summarize(r: &Relation, rows: &[&[Value]]) -> Group {
    let attrs = r
        .schema
        .attributes
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let vals: BTreeSet<&Value> = rows.iter().map(|t| &t[i]).filter(|v| !v.is_null()).collect();
            let nullable = rows.iter().any(|t| t[i].is_null());
            let constraint = match (vals.first(), vals.last()) {
                (None, _) | (_, None) => AttrConstraint::Null,
                (Some(lo), Some(hi)) if lo == hi => AttrConstraint::Eq { value: (*lo).clone() },
                (Some(lo), Some(hi)) if a.ty.is_ordered() => AttrConstraint::Range {
                    lo: (*lo).clone(),
                    hi: (*hi).clone(),
                },
                _ if vals.len() <= MAX_MEMBERS => AttrConstraint::Members {
                    values: vals.into_iter().cloned().collect(),
                },
                _ => AttrConstraint::Unconstrained,
            };
            AttrSummary {
                attr: a.name.clone(),
                constraint,
                nullable,
            }
        })
        .collect();
    Group { rows: rows.len(), attrs }
}

impl AttrSummary {
    fn to_cond(&self, x: Expr) -> Cond {
        let c = match &self.constraint {
            AttrConstraint::Eq { value } => x.clone().eq(Expr::lit(value.clone())),
            AttrConstraint::Range { lo, hi } => Cond::and(vec![
                x.clone().cmp(CmpOp::Ge, Expr::lit(lo.clone())),
                x.clone().cmp(CmpOp::Le, Expr::lit(hi.clone())),
            ]),
            AttrConstraint::Members { values } => {
                Cond::or(values.iter().map(|v| x.clone().eq(Expr::lit(v.clone()))).collect())
            }
            AttrConstraint::Null => return Cond::is_null(x),
            AttrConstraint::Unconstrained => return Cond::True,
        };
        if self.nullable {
            c.or2(Cond::is_null(x))
        } else {
            c
        }
    }
}

impl Compressed {
    /// `χ` for this relation over its version-0 variables; `False` when
    /// the relation is empty.
    pub fn to_cond(&self) -> Cond {
        Cond::or(
            self.groups
                .iter()
                .map(|g| {
                    Cond::and(
                        g.attrs
                            .iter()
                            .map(|a| a.to_cond(Expr::attr(input_var(&self.relation, &a.attr))))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

/// Compresses the given relations of `db`.
pub fn compress_database(db: &Database, rels: &BTreeSet<String>, opts: &CompressOptions) -> Result<Vec<Compressed>> {
    rels.iter()
        .map(|name| {
            let r = db.get(name)?;
            let attr = opts.group_by.get(name).cloned().or_else(|| default_group_attr(r));
            compress(r, attr.as_deref(), opts.groups)
        })
        .collect()
}

/// Conjunction of the per-relation constraints.
pub fn database_constraint(parts: &[Compressed]) -> Cond {
    Cond::and(parts.iter().map(Compressed::to_cond).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::order_db;

    #[test]
    fn orders_by_country() {
        let db = order_db();
        let c = compress(db.get("Order").unwrap(), Some("Country"), 2).unwrap();
        assert_eq!(c.groups.len(), 2);
        let uk = &c.groups[0].attrs;
        assert_eq!(uk[2].constraint, AttrConstraint::Eq { value: "UK".into() });
        assert_eq!(
            uk[3].constraint,
            AttrConstraint::Range {
                lo: 20.into(),
                hi: 50.into()
            }
        );
        assert_eq!(uk[4].constraint, AttrConstraint::Eq { value: 5.into() });
        let us = &c.groups[1].attrs;
        assert_eq!(
            us[0].constraint,
            AttrConstraint::Range {
                lo: 13.into(),
                hi: 14.into()
            }
        );
        assert_eq!(
            us[4].constraint,
            AttrConstraint::Range {
                lo: 3.into(),
                hi: 4.into()
            }
        );
        assert_eq!(default_group_attr(db.get("Order").unwrap()).as_deref(), Some("Country"));
    }

    #[test]
    fn surplus_values_fold_into_runs() {
        let db = order_db();
        let c = compress(db.get("Order").unwrap(), Some("ID"), 3).unwrap();
        assert_eq!(c.groups.iter().map(|g| g.rows).collect::<Vec<_>>(), vec![2, 2]);
        let c = compress(db.get("Order").unwrap(), Some("ID"), 1).unwrap();
        assert_eq!(c.groups.len(), 1);
    }

    #[test]
    fn empty_relation_is_false() {
        let r = Relation::empty(crate::fixtures::order_schema());
        assert!(crate::expr::simplify_cond(&compress(&r, None, 4).unwrap().to_cond()).is_false());
    }
}
