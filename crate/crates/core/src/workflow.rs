//! Request and document types shared by the service and the command line.

use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::criteria::{CostParams, CriterionRanges, CriterionVector};
use crate::graph::{GraphParams, StationGraph};
use crate::network::{build_demand_matrix, BusNetwork, DemandMatrix, NetworkError, TimeWindow};
use crate::resolution::{CandidateRoute, ResolutionError, ResolutionSession, StopOrder};
use crate::search::{RouteSummary, SearchParams, SearchSession, SearchStatus};
use crate::Error;

/// What to search: an existing route's endpoints, explicit anchor sets, or both
/// (the sets are then anchored between the route's first and last stop).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchRequest {
    pub route_id: Option<String>,
    pub stop_sets: Option<Vec<Vec<String>>>,
    pub params: SearchParams,
    pub ranges: CriterionRanges,
    pub graph: Option<GraphParams>,
    pub cost: Option<CostParams>,
    pub window: Option<TimeWindow>,
    pub catchment_m: f64,
}

impl SearchRequest {
    /// Anchor stop sets of the request, origin set first.
    pub fn anchor_sets(&self, network: &BusNetwork) -> Result<Vec<Vec<String>>, Error> {
        let extra = self.stop_sets.clone().unwrap_or_default();
        match &self.route_id {
            Some(id) => {
                let r = network
                    .route_index(id)
                    .ok_or_else(|| NetworkError::UnknownRoute(id.clone()))?;
                let stops = &network.route(r).stops;
                let first = network.stop(stops[0]).stop_id.clone();
                let last = network.stop(stops[stops.len() - 1]).stop_id.clone();
                let mut sets = vec![vec![first]];
                sets.extend(extra);
                sets.push(vec![last]);
                Ok(sets)
            }
            None if extra.len() >= 2 => Ok(extra),
            None => Err(Error::Request(
                "a search needs `route_id` or at least two `stop_sets`".into(),
            )),
        }
    }
}

/// A search session together with what it was built from.
pub struct SearchSetup {
    pub session: SearchSession,
    pub route_id: Option<String>,
    pub stop_sets: Vec<Vec<String>>,
}

/// Demand window used when a request names none: every trip, or one day from the
/// epoch for a network without trips.
pub fn default_window(network: &BusNetwork) -> TimeWindow {
    network.full_window().unwrap_or_else(|| {
        let start = DateTime::<Utc>::UNIX_EPOCH;
        TimeWindow {
            start,
            end: start + Duration::days(1),
        }
    })
}

/// Builds the station graph, demand matrix and a paused search session.
pub fn start_search(
    network: Arc<BusNetwork>,
    request: &SearchRequest,
    graph: GraphParams,
    cost: CostParams,
) -> Result<SearchSetup, Error> {
    let stop_sets = request.anchor_sets(&network)?;
    let graph = StationGraph::build_anchored(network.clone(), &stop_sets, request.graph.unwrap_or(graph))?;
    let window = request.window.unwrap_or_else(|| default_window(&network));
    let demand = if network.trips().is_empty() {
        DemandMatrix::empty(window)
    } else {
        build_demand_matrix(&network, window, request.catchment_m)?
    };
    let session = SearchSession::new(
        Arc::new(graph),
        Arc::new(demand),
        request.cost.unwrap_or(cost),
        request.params,
        request.ranges,
    )?;
    Ok(SearchSetup {
        session,
        route_id: request.route_id.clone(),
        stop_sets,
    })
}

/// Topological stop order of a session's current station graph.
pub fn graph_stop_order(session: &SearchSession) -> Vec<String> {
    let g = session.graph();
    (0..g.len()).map(|n| g.stop_id(n).to_string()).collect()
}

/// A Pareto set as written by `search` and read by `resolve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoDocument {
    #[serde(default)]
    pub route_id: Option<String>,
    #[serde(default)]
    pub stop_sets: Vec<Vec<String>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub iterations: u64,
    #[serde(default)]
    pub status: Option<SearchStatus>,
    /// Topological order of the station graph; empty when unknown.
    #[serde(default)]
    pub stop_order: Vec<String>,
    pub routes: Vec<RouteSummary>,
}

impl ParetoDocument {
    pub fn from_session(setup: &SearchSetup) -> Self {
        let s = &setup.session;
        Self {
            route_id: setup.route_id.clone(),
            stop_sets: setup.stop_sets.clone(),
            seed: Some(s.seed()),
            iterations: s.iteration(),
            status: Some(s.status()),
            stop_order: graph_stop_order(s),
            routes: s.route_summaries(),
        }
    }

    pub fn candidates(&self) -> Vec<CandidateRoute> {
        candidates(&self.routes)
    }

    pub fn order(&self) -> Result<Option<StopOrder>, ResolutionError> {
        if self.stop_order.is_empty() {
            Ok(None)
        } else {
            StopOrder::new(self.stop_order.clone()).map(Some)
        }
    }

    pub fn resolution(&self, weights: CriterionVector, beta: usize) -> Result<ResolutionSession, ResolutionError> {
        ResolutionSession::new(self.candidates(), self.order()?, weights, beta)
    }
}

/// Pareto routes as resolution candidates, keyed by their numeric id.
pub fn candidates(routes: &[RouteSummary]) -> Vec<CandidateRoute> {
    routes
        .iter()
        .map(|r| CandidateRoute {
            id: r.id.to_string(),
            stops: r.stops.clone(),
            criteria: r.criteria,
        })
        .collect()
}

/// Outcome of replaying a list of cluster choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub choices: Vec<usize>,
    pub steps: Vec<ReplayStep>,
    pub final_route: Option<CandidateRoute>,
    pub remaining: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub conflict: usize,
    pub position: (String, String),
    pub cluster: usize,
    pub pattern: Vec<String>,
}

/// Resolves the active conflict with each choice in turn.
pub fn replay(session: &mut ResolutionSession, choices: &[usize]) -> Result<ReplayOutcome, ResolutionError> {
    let mut steps = Vec::with_capacity(choices.len());
    for &cluster in choices {
        let conflict = session
            .active_conflict()
            .ok_or_else(|| ResolutionError::State("no conflict left to resolve".into()))?;
        let position = session.conflicts()[conflict].position.clone();
        let pattern = session
            .clusters()
            .get(cluster)
            .map(|c| c.pattern.clone())
            .ok_or_else(|| ResolutionError::Params(format!("no cluster {cluster}")))?;
        session.resolve(conflict, cluster)?;
        steps.push(ReplayStep {
            conflict,
            position,
            cluster,
            pattern,
        });
    }
    Ok(ReplayOutcome {
        choices: choices.to_vec(),
        steps,
        final_route: session.final_route().cloned(),
        remaining: session.candidates().map(|r| r.id.clone()).collect(),
    })
}
