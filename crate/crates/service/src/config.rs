use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use busnet_core::{CostParams, GraphParams, TransferParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Dataset loaded at startup and used when a request names none.
    pub dataset_dir: Option<PathBuf>,
    pub cost: CostParams,
    pub graph: GraphParams,
    pub transfer: TransferParams,
    /// Search sessions allowed to be running or paused at once.
    pub max_sessions: usize,
    /// Iterations between streamed snapshots.
    pub snapshot_interval: u64,
    pub idle_timeout_secs: u64,
    pub max_upload_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            dataset_dir: None,
            cost: CostParams::default(),
            graph: GraphParams::default(),
            transfer: TransferParams::default(),
            max_sessions: 8,
            snapshot_interval: 50,
            idle_timeout_secs: 30 * 60,
            max_upload_bytes: 1 << 30,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.snapshot_interval < 1 {
            return Err("snapshot_interval must be at least 1".into());
        }
        if self.max_sessions < 1 {
            return Err("max_sessions must be at least 1".into());
        }
        self.cost.validate().map_err(|e| e.to_string())?;
        self.graph.validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn idle_timeout(&self) -> Duration {
        Duration::from_secs(self.idle_timeout_secs)
    }
}
