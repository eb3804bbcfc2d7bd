//! Bus-network analytics and multi-criteria route replanning.

pub mod analytics;
pub mod criteria;
pub mod geo;
pub mod graph;
pub mod network;
pub mod resolution;
pub mod search;
pub mod synthetic;
pub mod workflow;

pub use graph::{AddStop, GraphError, GraphParams, StationEdit, StationGraph, StopSpace};
pub use network::{
    BusNetwork, BusRoute, DemandMatrix, IngestReport, NetworkError, Stop, TimeWindow,
    TransferParams, TripRecord,
};
pub use criteria::{
    dominates, CostParams, Criterion, CriterionBounds, CriterionRanges, CriterionVector,
    CriteriaError, Evaluator,
};
pub use analytics::AnalyticsError;
pub use resolution::{CandidateRoute, ResolutionError, ResolutionSession, ResolutionView, StopOrder};
pub use search::{ParetoSet, ProgressSnapshot, SearchError, SearchParams, SearchSession, SearchStatus};

/// Any engine error, with a stable machine-readable code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
    #[error("invalid request: {0}")]
    Request(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Network(e) => e.code(),
            Self::Graph(e) => e.code(),
            Self::Criteria(e) => e.code(),
            Self::Search(e) => e.code(),
            Self::Analytics(e) => e.code(),
            Self::Resolution(e) => e.code(),
            Self::Request(_) => "invalid_request",
        }
    }
}
