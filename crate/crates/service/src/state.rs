use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use busnet_core::analytics::{detect_transfers, TransferLink};
use busnet_core::{BusNetwork, IngestReport, TransferParams};

use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::sessions::{is_terminal, ResolveHandle, SearchHandle};

/// An ingested, read-only dataset.
pub struct Dataset {
    pub id: String,
    pub network: Arc<BusNetwork>,
    pub report: IngestReport,
    transfer: TransferParams,
    links: OnceLock<Arc<Vec<TransferLink>>>,
}

impl Dataset {
    /// Transfer links, detected on first use.
    pub fn links(&self) -> Arc<Vec<TransferLink>> {
        self.links
            .get_or_init(|| Arc::new(detect_transfers(&self.network, &self.transfer)))
            .clone()
    }
}

#[derive(Default)]
struct Datasets {
    map: BTreeMap<String, Arc<Dataset>>,
    latest: Option<String>,
}

pub struct AppState {
    pub config: ServiceConfig,
    datasets: RwLock<Datasets>,
    searches: Mutex<HashMap<String, Arc<SearchHandle>>>,
    resolutions: Mutex<HashMap<String, Arc<ResolveHandle>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config,
            datasets: RwLock::default(),
            searches: Mutex::default(),
            resolutions: Mutex::default(),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    /// Registers a dataset and makes it the default one.
    pub fn add_dataset(&self, network: Arc<BusNetwork>, report: IngestReport) -> Arc<Dataset> {
        let id = self.fresh_id("d");
        let ds = Arc::new(Dataset {
            id: id.clone(),
            network,
            report,
            transfer: self.config.transfer,
            links: OnceLock::new(),
        });
        let mut d = self.datasets.write().unwrap_or_else(|e| e.into_inner());
        d.map.insert(id.clone(), ds.clone());
        d.latest = Some(id);
        ds
    }

    /// The named dataset, or the latest one.
    pub fn dataset(&self, id: Option<&str>) -> Result<Arc<Dataset>, ApiError> {
        let d = self.datasets.read().unwrap_or_else(|e| e.into_inner());
        match id.or(d.latest.as_deref()) {
            Some(id) => d
                .map
                .get(id)
                .cloned()
                .ok_or_else(|| ApiError::new("unknown_dataset", format!("no dataset `{id}`"))),
            None => Err(ApiError::new("unknown_dataset", "no dataset has been ingested")),
        }
    }

    pub fn datasets(&self) -> Vec<Arc<Dataset>> {
        let d = self.datasets.read().unwrap_or_else(|e| e.into_inner());
        d.map.values().cloned().collect()
    }

    /// Sessions that are running or paused.
    pub fn live_searches(&self) -> usize {
        let s = self.searches.lock().unwrap_or_else(|e| e.into_inner());
        s.values().filter(|h| !is_terminal(h.status())).count()
    }

    pub fn insert_search(&self, handle: Arc<SearchHandle>) {
        let mut s = self.searches.lock().unwrap_or_else(|e| e.into_inner());
        s.insert(handle.id.clone(), handle);
    }

    pub fn search(&self, id: &str) -> Result<Arc<SearchHandle>, ApiError> {
        let s = self.searches.lock().unwrap_or_else(|e| e.into_inner());
        s.get(id).cloned().ok_or_else(|| ApiError::not_found("search session", id))
    }

    pub fn remove_search(&self, id: &str) -> Option<Arc<SearchHandle>> {
        let mut s = self.searches.lock().unwrap_or_else(|e| e.into_inner());
        s.remove(id)
    }

    pub fn insert_resolution(&self, handle: Arc<ResolveHandle>) {
        let mut r = self.resolutions.lock().unwrap_or_else(|e| e.into_inner());
        r.insert(handle.id.clone(), handle);
    }

    pub fn resolution(&self, id: &str) -> Result<Arc<ResolveHandle>, ApiError> {
        let r = self.resolutions.lock().unwrap_or_else(|e| e.into_inner());
        r.get(id).cloned().ok_or_else(|| ApiError::not_found("resolution session", id))
    }

    /// Drops idle sessions, stopping their workers. Returns how many were evicted.
    pub fn evict_idle(&self) -> usize {
        let timeout = self.config.idle_timeout();
        let mut evicted = Vec::new();
        {
            let mut s = self.searches.lock().unwrap_or_else(|e| e.into_inner());
            s.retain(|_, h| {
                let idle = h.is_idle(timeout);
                if idle {
                    evicted.push(h.clone());
                }
                !idle
            });
        }
        for h in &evicted {
            h.close();
        }
        let mut r = self.resolutions.lock().unwrap_or_else(|e| e.into_inner());
        let before = r.len();
        r.retain(|_, h| !h.is_idle(timeout));
        evicted.len() + before - r.len()
    }
}
