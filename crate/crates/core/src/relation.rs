//! In-memory relations and databases with set semantics.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::value::{Schema, Value};

pub type Tuple = Arc<[Value]>;

pub fn tuple(values: Vec<Value>) -> Tuple {
    Arc::from(values)
}

/// Duplicate-free bag of tuples in insertion order.
#[derive(Clone, Debug)]
pub struct Relation {
    pub schema: Arc<Schema>,
    rows: IndexSet<Tuple>,
}

impl Relation {
    pub fn empty(schema: Arc<Schema>) -> Relation {
        Relation {
            schema,
            rows: IndexSet::new(),
        }
    }

    pub fn from_rows(schema: Arc<Schema>, rows: impl IntoIterator<Item = Tuple>) -> Relation {
        Relation {
            schema,
            rows: rows.into_iter().collect(),
        }
    }

    /// Builds a relation after checking arity and column types.
    pub fn checked(schema: Arc<Schema>, rows: impl IntoIterator<Item = Vec<Value>>) -> Result<Relation> {
        let mut rel = Relation::empty(schema);
        for r in rows {
            rel.insert_checked(tuple(r))?;
        }
        Ok(rel)
    }

    pub fn insert_checked(&mut self, t: Tuple) -> Result<bool> {
        check_tuple(&self.schema, &t)?;
        Ok(self.rows.insert(t))
    }

    pub fn insert(&mut self, t: Tuple) -> bool {
        self.rows.insert(t)
    }

    pub fn contains(&self, t: &[Value]) -> bool {
        self.rows.contains(t)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tuple> {
        self.rows.iter()
    }

    pub fn rows(&self) -> &IndexSet<Tuple> {
        &self.rows
    }

    pub fn into_rows(self) -> IndexSet<Tuple> {
        self.rows
    }

    /// Rows in the total value order, for stable output.
    pub fn sorted(&self) -> Vec<Tuple> {
        let mut v: Vec<Tuple> = self.rows.iter().cloned().collect();
        v.sort();
        v
    }

    /// Set equality (order-insensitive).
    pub fn same_rows(&self, other: &Relation) -> bool {
        self.len() == other.len() && self.rows.iter().all(|t| other.rows.contains(t))
    }
}

pub(crate) fn check_tuple(schema: &Schema, t: &[Value]) -> Result<()> {
    if t.len() != schema.arity() {
        return Err(Error::schema(format!(
            "tuple of arity {} for `{}` of arity {}",
            t.len(),
            schema.name,
            schema.arity()
        )));
    }
    for (v, a) in t.iter().zip(&schema.attributes) {
        if !v.conforms(a.ty) {
            return Err(Error::ty(format!(
                "value {v} does not fit column `{}` of type {}",
                a.name, a.ty
            )));
        }
    }
    Ok(())
}

/// Lookup of relation schemas by name.
pub trait Catalog {
    fn schema_of(&self, rel: &str) -> Option<Arc<Schema>>;

    fn require(&self, rel: &str) -> Result<Arc<Schema>> {
        self.schema_of(rel)
            .ok_or_else(|| Error::schema(format!("unknown relation `{rel}`")))
    }
}

impl Catalog for BTreeMap<String, Arc<Schema>> {
    fn schema_of(&self, rel: &str) -> Option<Arc<Schema>> {
        self.get(rel).cloned()
    }
}

/// A database instance: named relations.
#[derive(Clone, Debug, Default)]
pub struct Database {
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    pub fn add(&mut self, rel: Relation) {
        self.relations.insert(rel.schema.name.clone(), rel);
    }

    pub fn with(mut self, rel: Relation) -> Database {
        self.add(rel);
        self
    }

    pub fn get(&self, name: &str) -> Result<&Relation> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::schema(format!("unknown relation `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Relation> {
        self.relations
            .get_mut(name)
            .ok_or_else(|| Error::schema(format!("unknown relation `{name}`")))
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.relations.keys()
    }

    pub fn catalog(&self) -> BTreeMap<String, Arc<Schema>> {
        self.relations
            .iter()
            .map(|(n, r)| (n.clone(), r.schema.clone()))
            .collect()
    }

    /// Set equality of every relation.
    pub fn same_content(&self, other: &Database) -> bool {
        self.relations.len() == other.relations.len()
            && self.relations.iter().all(|(n, r)| {
                other
                    .relations
                    .get(n)
                    .is_some_and(|o| o.schema == r.schema && r.same_rows(o))
            })
    }
}

impl Catalog for Database {
    fn schema_of(&self, rel: &str) -> Option<Arc<Schema>> {
        self.relations.get(rel).map(|r| r.schema.clone())
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}({})", self.schema.name, self.schema.names().join(", "))?;
        for t in self.sorted() {
            let cells: Vec<String> = t
                .iter()
                .zip(&self.schema.attributes)
                .map(|(v, a)| v.render(a.ty))
                .collect();
            writeln!(f, "  ({})", cells.join(", "))?;
        }
        Ok(())
    }
}
