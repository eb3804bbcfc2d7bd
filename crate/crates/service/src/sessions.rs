//! Search sessions driven by one worker thread each, and resolution sessions.

use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use busnet_core::resolution::CandidateRoute;
use busnet_core::workflow::{self, ParetoDocument, SearchSetup};
use busnet_core::{ProgressSnapshot, ResolutionSession, SearchStatus, StationEdit};
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Pause,
    Resume,
    Stop,
}

pub fn is_terminal(status: SearchStatus) -> bool {
    matches!(status, SearchStatus::Exhausted | SearchStatus::Stopped)
}

struct Inner {
    setup: SearchSetup,
    closed: bool,
}

pub struct SearchHandle {
    pub id: String,
    pub dataset_id: String,
    inner: Mutex<Inner>,
    wake: Condvar,
    tx: watch::Sender<ProgressSnapshot>,
    last_used: Mutex<Instant>,
}

impl SearchHandle {
    /// Publishes the iteration-0 snapshot and starts the worker, which waits
    /// until the session is resumed.
    pub fn spawn(id: String, dataset_id: String, mut setup: SearchSetup, interval: u64) -> Arc<Self> {
        let first = setup.session.snapshot();
        let (tx, _) = watch::channel(first);
        let handle = Arc::new(Self {
            id,
            dataset_id,
            inner: Mutex::new(Inner { setup, closed: false }),
            wake: Condvar::new(),
            tx,
            last_used: Mutex::new(Instant::now()),
        });
        let worker = handle.clone();
        thread::Builder::new()
            .name(format!("search-{}", handle.id))
            .spawn(move || worker.run(interval))
            .expect("spawn search worker");
        handle
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn run(&self, interval: u64) {
        loop {
            let mut g = self.lock();
            while !g.closed && g.setup.session.status() == SearchStatus::Paused {
                g = self.wake.wait(g).unwrap_or_else(|e| e.into_inner());
            }
            if g.closed || is_terminal(g.setup.session.status()) {
                return;
            }
            if let Ok(snap) = g.setup.session.step(interval) {
                self.tx.send_replace(snap);
            }
            drop(g);
            thread::yield_now();
        }
    }

    fn publish(&self, g: &mut Inner) -> ProgressSnapshot {
        let snap = g.setup.session.snapshot();
        self.tx.send_replace(snap.clone());
        self.wake.notify_all();
        snap
    }

    pub fn control(&self, action: Action) -> Result<ProgressSnapshot, ApiError> {
        self.touch();
        let mut g = self.lock();
        match action {
            Action::Pause => g.setup.session.pause()?,
            Action::Resume => g.setup.session.resume()?,
            Action::Stop => g.setup.session.stop(),
        }
        Ok(self.publish(&mut g))
    }

    pub fn edit(&self, edit: &StationEdit) -> Result<ProgressSnapshot, ApiError> {
        self.touch();
        let mut g = self.lock();
        g.setup.session.edit_stations(edit)?;
        Ok(self.publish(&mut g))
    }

    pub fn latest(&self) -> ProgressSnapshot {
        self.touch();
        self.tx.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<ProgressSnapshot> {
        self.touch();
        self.tx.subscribe()
    }

    pub fn status(&self) -> SearchStatus {
        self.tx.borrow().status
    }

    pub fn document(&self) -> ParetoDocument {
        self.touch();
        ParetoDocument::from_session(&self.lock().setup)
    }

    /// Current Pareto routes and the graph's stop order.
    pub fn candidates(&self) -> (Vec<CandidateRoute>, Vec<String>) {
        self.touch();
        let g = self.lock();
        let s = &g.setup.session;
        (workflow::candidates(&s.route_summaries()), workflow::graph_stop_order(s))
    }

    pub fn seed(&self) -> u64 {
        self.lock().setup.session.seed()
    }

    pub fn stop_sets(&self) -> Vec<Vec<String>> {
        self.lock().setup.stop_sets.clone()
    }

    pub fn graph_size(&self) -> usize {
        self.lock().setup.session.graph().len()
    }

    /// Stops the worker for good.
    pub fn close(&self) {
        let mut g = self.lock();
        g.closed = true;
        g.setup.session.stop();
        self.publish(&mut g);
    }

    fn touch(&self) {
        *self.last_used.lock().unwrap_or_else(|e| e.into_inner()) = Instant::now();
    }

    /// True when nobody streams the session and it has not been used for `timeout`.
    pub fn is_idle(&self, timeout: Duration) -> bool {
        self.tx.receiver_count() == 0
            && self.last_used.lock().unwrap_or_else(|e| e.into_inner()).elapsed() >= timeout
    }
}

pub struct ResolveHandle {
    pub id: String,
    session: Mutex<ResolutionSession>,
    last_used: Mutex<Instant>,
}

impl ResolveHandle {
    pub fn new(id: String, session: ResolutionSession) -> Self {
        Self {
            id,
            session: Mutex::new(session),
            last_used: Mutex::new(Instant::now()),
        }
    }

    pub fn with<T>(&self, f: impl FnOnce(&mut ResolutionSession) -> T) -> T {
        *self.last_used.lock().unwrap_or_else(|e| e.into_inner()) = Instant::now();
        f(&mut self.session.lock().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn is_idle(&self, timeout: Duration) -> bool {
        self.last_used.lock().unwrap_or_else(|e| e.into_inner()).elapsed() >= timeout
    }
}
