//! Versioned store: a base database, an append-only statement log and
//! periodic checkpoints for time travel.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::relation::Database;
use crate::statement::Statement;

pub const DEFAULT_CHECKPOINT_EVERY: usize = 10;

#[derive(Clone, Debug)]
pub struct VersionedStore {
    base: Database,
    log: Vec<Statement>,
    /// Version `i` (state after `i` statements) for every multiple of `every`.
    checkpoints: BTreeMap<usize, Database>,
    current: Database,
    every: usize,
}

impl VersionedStore {
    pub fn new(base: Database) -> VersionedStore {
        VersionedStore::with_checkpoints(base, DEFAULT_CHECKPOINT_EVERY)
    }

    pub fn with_checkpoints(base: Database, every: usize) -> VersionedStore {
        let every = every.max(1);
        VersionedStore {
            checkpoints: BTreeMap::from([(0, base.clone())]),
            current: base.clone(),
            base,
            log: Vec::new(),
            every,
        }
    }

    /// Builds a store and appends `h`.
    pub fn from_history(base: Database, h: &[Statement]) -> Result<VersionedStore> {
        let mut s = VersionedStore::new(base);
        for u in h {
            s.append(u.clone())?;
        }
        Ok(s)
    }

    /// Executes `u` on the current state and logs it.
    pub fn append(&mut self, u: Statement) -> Result<()> {
        u.apply(&mut self.current)?;
        self.log.push(u);
        if self.log.len().is_multiple_of(self.every) {
            self.checkpoints.insert(self.log.len(), self.current.clone());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    pub fn log(&self) -> &[Statement] {
        &self.log
    }

    pub fn base(&self) -> &Database {
        &self.base
    }

    pub fn current(&self) -> &Database {
        &self.current
    }

    pub fn checkpoint_versions(&self) -> impl Iterator<Item = usize> + '_ {
        self.checkpoints.keys().copied()
    }

    /// `D_i`: the state after the first `i` statements, replayed from the
    /// nearest checkpoint at or below `i`.
    pub fn reconstruct(&self, i: usize) -> Result<Database> {
        if i > self.log.len() {
            return Err(Error::Data(format!(
                "version {i} does not exist, the history has {} statements",
                self.log.len()
            )));
        }
        if i == self.log.len() {
            return Ok(self.current.clone());
        }
        let (&at, db) = self
            .checkpoints
            .range(..=i)
            .next_back()
            .expect("version 0 is always checkpointed");
        let mut out = db.clone();
        for u in &self.log[at..i] {
            u.apply(&mut out)?;
        }
        Ok(out)
    }
}
