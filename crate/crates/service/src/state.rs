use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, RwLock};

use lru::LruCache;

use histif_core::io::DataDir;
use histif_core::{Database, History, RunReport, Statement, VersionedStore};

use crate::error::ApiError;

/// Reports kept for `GET /api/report/{id}`.
pub const REPORT_CAPACITY: usize = 100;

/// Id of the history loaded from a data directory.
pub const MAIN_HISTORY: &str = "main";

/// Shared server state: the base database, one store per history, and the
/// most recent run reports. Histories change only through the write lock.
pub struct AppState {
    base: Database,
    stores: RwLock<BTreeMap<String, Arc<VersionedStore>>>,
    reports: Mutex<LruCache<String, RunReport>>,
    next_request: Mutex<u64>,
}

impl AppState {
    pub fn new(base: Database) -> AppState {
        AppState {
            base,
            stores: RwLock::new(BTreeMap::new()),
            reports: Mutex::new(LruCache::new(NonZeroUsize::new(REPORT_CAPACITY).expect("non-zero"))),
            next_request: Mutex::new(0),
        }
    }

    /// Base database plus the saved history as [`MAIN_HISTORY`].
    pub fn from_data_dir(dir: &DataDir) -> histif_core::Result<AppState> {
        let state = AppState::new(dir.base()?);
        let h = dir.history()?;
        state
            .insert_history(History::new(MAIN_HISTORY, h))
            .map_err(|e| histif_core::Error::Data(e.to_string()))?;
        Ok(state)
    }

    pub fn base(&self) -> &Database {
        &self.base
    }

    pub fn store(&self, id: &str) -> Result<Arc<VersionedStore>, ApiError> {
        self.stores
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no history `{id}`")))
    }

    pub fn history_ids(&self) -> Vec<String> {
        self.stores.read().expect("store lock").keys().cloned().collect()
    }

    /// Executes the statements over the base database; fails if the id is
    /// taken.
    pub fn insert_history(&self, h: History) -> Result<Arc<VersionedStore>, ApiError> {
        let mut stores = self.stores.write().expect("store lock");
        if stores.contains_key(&h.id) {
            return Err(ApiError::Conflict(format!("history `{}` exists", h.id)));
        }
        let store = Arc::new(VersionedStore::from_history(self.base.clone(), &h.statements)?);
        stores.insert(h.id, store.clone());
        Ok(store)
    }

    /// Appends to an existing history.
    pub fn append(&self, id: &str, statements: Vec<Statement>) -> Result<Arc<VersionedStore>, ApiError> {
        let mut stores = self.stores.write().expect("store lock");
        let cur = stores
            .get(id)
            .ok_or_else(|| ApiError::NotFound(format!("no history `{id}`")))?;
        let mut next = (**cur).clone();
        for u in statements {
            next.append(u)?;
        }
        let next = Arc::new(next);
        stores.insert(id.to_string(), next.clone());
        Ok(next)
    }

    pub fn next_request_id(&self) -> String {
        let mut n = self.next_request.lock().expect("counter lock");
        *n += 1;
        format!("req-{n}")
    }

    pub fn remember(&self, id: String, report: RunReport) {
        self.reports.lock().expect("report lock").put(id, report);
    }

    pub fn report(&self, id: &str) -> Option<RunReport> {
        self.reports.lock().expect("report lock").get(id).cloned()
    }
}
