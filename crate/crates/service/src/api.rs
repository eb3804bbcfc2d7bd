use std::collections::HashMap;
use std::convert::Infallible;
use std::io::Cursor;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use busnet_core::analytics::{
    compute_zones, flow_matrix_with_links, rank_routes, transfer_summary, zone_statistics, FlowMatrix,
    RankFilters, RankWeights, RankedRoute, TimeBin, TransferSummary,
};
use busnet_core::network::{ingest_network, DatasetSources};
use busnet_core::resolution::{CandidateRoute, StopOrder, DEFAULT_BETA};
use busnet_core::workflow::{default_window, start_search, ParetoDocument, SearchRequest};
use busnet_core::{IngestReport, ProgressSnapshot, ResolutionSession, ResolutionView, StationEdit, TimeWindow};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::mpsc;
use tokio_stream::wrappers::ReceiverStream;

use crate::error::ApiError;
use crate::sessions::{is_terminal, Action, ResolveHandle, SearchHandle};
use crate::state::{AppState, Dataset};

type ApiResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    let upload_limit = state.config.max_upload_bytes;
    Router::new()
        .route("/health", get(health))
        .route(
            "/datasets",
            post(upload_dataset)
                .get(list_datasets)
                .layer(DefaultBodyLimit::max(upload_limit)),
        )
        .route("/zones", get(zones))
        .route("/routes", get(routes))
        .route("/routes/{id}/matrix", get(matrix))
        .route("/routes/{id}/transfers/{stop_id}", get(transfers))
        .route("/search/sessions", post(create_search))
        .route("/search/sessions/{id}", get(search_snapshot).delete(delete_search))
        .route("/search/sessions/{id}/stream", get(stream))
        .route("/search/sessions/{id}/control", post(control))
        .route("/search/sessions/{id}/stations", post(stations))
        .route("/search/sessions/{id}/pareto", get(pareto))
        .route("/resolve/sessions", post(create_resolution))
        .route("/resolve/sessions/{id}", get(resolution_view))
        .route("/resolve/sessions/{id}/resolve", post(resolve))
        .route("/resolve/sessions/{id}/activate", post(activate))
        .route("/resolve/sessions/{id}/undo", post(undo))
        .with_state(state)
}

async fn health() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

/// Runs CPU-bound engine work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new("internal", e.to_string()))?
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub dataset_id: String,
    pub stops: usize,
    pub routes: usize,
    pub trips: usize,
    pub report: IngestReport,
}

fn info(ds: &Dataset) -> DatasetInfo {
    DatasetInfo {
        dataset_id: ds.id.clone(),
        stops: ds.network.stops().len(),
        routes: ds.network.routes().len(),
        trips: ds.network.trips().len(),
        report: ds.report.clone(),
    }
}

async fn upload_dataset(State(state): Shared, multipart: Result<Multipart, axum::extract::multipart::MultipartRejection>) -> ApiResult<(StatusCode, Json<DatasetInfo>)> {
    let mut multipart = multipart?;
    let mut files: HashMap<String, Vec<u8>> = HashMap::new();
    while let Some(field) = multipart.next_field().await? {
        let name = field.name().unwrap_or_default().trim_end_matches(".csv").to_string();
        files.insert(name, field.bytes().await?.to_vec());
    }
    let mut take = |name: &str| files.remove(name).map(Cursor::new);
    let (stops, routes, trips) = match (take("stops"), take("routes"), take("trips")) {
        (Some(s), Some(r), Some(t)) => (s, r, t),
        _ => return Err(ApiError::bad_request("multipart upload needs `stops`, `routes` and `trips` parts")),
    };
    let road_distances = take("road_distances");
    let st = state.clone();
    let ds = blocking(move || {
        let sources = DatasetSources {
            stops,
            routes,
            trips,
            road_distances,
        };
        let (network, report) = ingest_network(sources, &st.config.transfer)?;
        Ok(st.add_dataset(Arc::new(network), report))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(info(&ds))))
}

async fn list_datasets(State(state): Shared) -> Json<Vec<DatasetInfo>> {
    Json(state.datasets().iter().map(|d| info(d)).collect())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct WindowQuery {
    dataset: Option<String>,
    start: Option<DateTime<Utc>>,
    end: Option<DateTime<Utc>>,
}

impl WindowQuery {
    fn window(&self, ds: &Dataset) -> ApiResult<TimeWindow> {
        let full = default_window(&ds.network);
        Ok(TimeWindow::new(self.start.unwrap_or(full.start), self.end.unwrap_or(full.end))?)
    }
}

#[derive(Debug, Deserialize)]
struct ZonesQuery {
    count: usize,
    #[serde(flatten)]
    window: WindowQuery,
}

async fn zones(State(state): Shared, q: Result<Query<ZonesQuery>, axum::extract::rejection::QueryRejection>) -> ApiResult<Json<Value>> {
    let Query(q) = q?;
    let ds = state.dataset(q.window.dataset.as_deref())?;
    let cost = state.config.cost;
    blocking(move || {
        let window = q.window.window(&ds)?;
        let partition = compute_zones(&ds.network, q.count)?;
        let stats = zone_statistics(&partition, &ds.network, &window, &cost);
        Ok(Json(partition.to_geojson(|i| {
            stats
                .get(&partition.zones[i].zone_id)
                .and_then(|s| serde_json::to_value(s).ok())
        })))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct RoutesQuery {
    weights: Option<String>,
    filters: Option<String>,
    #[serde(flatten)]
    window: WindowQuery,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankResponse {
    pub routes: Vec<RankedRoute>,
}

async fn routes(State(state): Shared, q: Result<Query<RoutesQuery>, axum::extract::rejection::QueryRejection>) -> ApiResult<Json<RankResponse>> {
    let Query(q) = q?;
    let ds = state.dataset(q.window.dataset.as_deref())?;
    let cost = state.config.cost;
    blocking(move || {
        let weights = match &q.weights {
            Some(w) => RankWeights::parse(w)?,
            None => RankWeights::default(),
        };
        let filters = RankFilters::parse(q.filters.as_deref().unwrap_or(""))?;
        let window = q.window.window(&ds)?;
        let routes = rank_routes(&ds.network, &weights, &filters, &window, &cost)?;
        Ok(Json(RankResponse { routes }))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct MatrixQuery {
    bin: Option<String>,
    threshold: Option<f64>,
    #[serde(flatten)]
    window: WindowQuery,
}

/// Count at which a matrix cell reaches full intensity when none is given.
pub const DEFAULT_THRESHOLD: f64 = 10.0;

async fn matrix(
    State(state): Shared,
    Path(route_id): Path<String>,
    q: Result<Query<MatrixQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Json<FlowMatrix>> {
    let Query(q) = q?;
    let ds = state.dataset(q.window.dataset.as_deref())?;
    blocking(move || {
        let bin: TimeBin = match &q.bin {
            Some(b) => b.parse()?,
            None => TimeBin::Hourly,
        };
        let window = q.window.window(&ds)?;
        let links = ds.links();
        let m = flow_matrix_with_links(
            &ds.network,
            &route_id,
            &window,
            q.threshold.unwrap_or(DEFAULT_THRESHOLD),
            bin,
            &links,
        )?;
        Ok(Json(m))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct DatasetQuery {
    dataset: Option<String>,
}

async fn transfers(
    State(state): Shared,
    Path((route_id, stop_id)): Path<(String, String)>,
    q: Result<Query<DatasetQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Json<TransferSummary>> {
    let Query(q) = q?;
    let ds = state.dataset(q.dataset.as_deref())?;
    let r = ds
        .network
        .route_index(&route_id)
        .ok_or_else(|| ApiError::new("unknown_route", format!("unknown route `{route_id}`")))?;
    let on_route = ds.network.route(r).stops.iter().any(|&s| ds.network.stop(s).stop_id == stop_id);
    if !on_route {
        return Err(ApiError::new(
            "unknown_stop",
            format!("stop `{stop_id}` is not on route `{route_id}`"),
        ));
    }
    blocking(move || Ok(Json(transfer_summary(&ds.links(), &route_id, &stop_id)))).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SearchCreated {
    pub session_id: String,
    pub dataset_id: String,
    pub seed: u64,
    pub stop_sets: Vec<Vec<String>>,
    pub graph_size: usize,
    pub snapshot: ProgressSnapshot,
}

async fn create_search(
    State(state): Shared,
    q: Result<Query<DatasetQuery>, axum::extract::rejection::QueryRejection>,
    body: Result<Json<SearchRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<(StatusCode, Json<SearchCreated>)> {
    let Query(q) = q?;
    let Json(request) = body?;
    let ds = state.dataset(q.dataset.as_deref())?;
    if state.live_searches() >= state.config.max_sessions {
        return Err(ApiError::new(
            "too_many_sessions",
            format!("at most {} search sessions may be live", state.config.max_sessions),
        ));
    }
    let st = state.clone();
    let handle = blocking(move || {
        let setup = start_search(ds.network.clone(), &request, st.config.graph, st.config.cost)?;
        let handle = SearchHandle::spawn(st.fresh_id("s"), ds.id.clone(), setup, st.config.snapshot_interval);
        st.insert_search(handle.clone());
        Ok(handle)
    })
    .await?;
    Ok((
        StatusCode::CREATED,
        Json(SearchCreated {
            session_id: handle.id.clone(),
            dataset_id: handle.dataset_id.clone(),
            seed: handle.seed(),
            stop_sets: handle.stop_sets(),
            graph_size: handle.graph_size(),
            snapshot: handle.latest(),
        }),
    ))
}

async fn search_snapshot(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<ProgressSnapshot>> {
    Ok(Json(state.search(&id)?.latest()))
}

async fn delete_search(State(state): Shared, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let h = state
        .remove_search(&id)
        .ok_or_else(|| ApiError::not_found("search session", &id))?;
    h.close();
    Ok(StatusCode::NO_CONTENT)
}

async fn pareto(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<ParetoDocument>> {
    let h = state.search(&id)?;
    blocking(move || Ok(Json(h.document()))).await
}

/// Server-sent `snapshot` events, starting with the current one and ending after
/// a terminal status.
async fn stream(
    State(state): Shared,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    let mut rx = state.search(&id)?.subscribe();
    let (tx, out) = mpsc::channel::<Result<Event, Infallible>>(16);
    tokio::spawn(async move {
        loop {
            let snap = rx.borrow_and_update().clone();
            let event = Event::default()
                .event("snapshot")
                .id(snap.seq.to_string())
                .json_data(&snap)
                .expect("snapshots serialize");
            if tx.send(Ok(event)).await.is_err() || is_terminal(snap.status) {
                break;
            }
            if rx.changed().await.is_err() {
                break;
            }
        }
    });
    Ok(Sse::new(ReceiverStream::new(out)).keep_alive(KeepAlive::default()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ControlRequest {
    pub action: Action,
}

async fn control(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Json<ControlRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<ProgressSnapshot>> {
    let Json(req) = body?;
    let h = state.search(&id)?;
    blocking(move || Ok(Json(h.control(req.action)?))).await
}

async fn stations(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Json<StationEdit>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<ProgressSnapshot>> {
    let Json(edit) = body?;
    let h = state.search(&id)?;
    blocking(move || Ok(Json(h.edit(&edit)?))).await
}

/// Candidates come from a search session's current Pareto set or are given inline.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateResolution {
    pub search_session_id: Option<String>,
    pub routes: Option<Vec<CandidateRoute>>,
    pub stop_order: Option<Vec<String>>,
    pub beta: Option<usize>,
    /// `criterion=weight` items as accepted by route ranking.
    pub weights: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResolutionCreated {
    pub session_id: String,
    pub view: ResolutionView,
}

async fn create_resolution(
    State(state): Shared,
    body: Result<Json<CreateResolution>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<(StatusCode, Json<ResolutionCreated>)> {
    let Json(req) = body?;
    let st = state.clone();
    blocking(move || {
        let (routes, order) = match (&req.search_session_id, req.routes) {
            (Some(id), None) => {
                let (routes, order) = st.search(id)?.candidates();
                (routes, req.stop_order.unwrap_or(order))
            }
            (None, Some(routes)) => (routes, req.stop_order.unwrap_or_default()),
            _ => {
                return Err(ApiError::bad_request(
                    "give exactly one of `search_session_id` and `routes`",
                ))
            }
        };
        let order = if order.is_empty() { None } else { Some(StopOrder::new(order)?) };
        let weights = match &req.weights {
            Some(w) => RankWeights::parse(w)?,
            None => RankWeights::default(),
        };
        let session = ResolutionSession::new(routes, order, weights.0, req.beta.unwrap_or(DEFAULT_BETA))?;
        let view = session.view();
        let handle = Arc::new(ResolveHandle::new(st.fresh_id("r"), session));
        st.insert_resolution(handle.clone());
        Ok((
            StatusCode::CREATED,
            Json(ResolutionCreated {
                session_id: handle.id.clone(),
                view,
            }),
        ))
    })
    .await
}

async fn resolution_view(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<ResolutionView>> {
    Ok(Json(state.resolution(&id)?.with(|s| s.view())))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResolveRequest {
    pub conflict_index: usize,
    pub cluster_id: usize,
}

async fn resolve(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Json<ResolveRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<ResolutionView>> {
    let Json(req) = body?;
    let h = state.resolution(&id)?;
    blocking(move || {
        h.with(|s| {
            s.resolve(req.conflict_index, req.cluster_id)?;
            Ok(Json(s.view()))
        })
    })
    .await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ActivateRequest {
    pub conflict_index: usize,
}

async fn activate(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Json<ActivateRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<ResolutionView>> {
    let Json(req) = body?;
    let h = state.resolution(&id)?;
    h.with(|s| {
        s.activate_conflict(req.conflict_index)?;
        Ok(Json(s.view()))
    })
}

async fn undo(State(state): Shared, Path(id): Path<String>) -> ApiResult<Json<ResolutionView>> {
    let h = state.resolution(&id)?;
    h.with(|s| {
        s.undo()?;
        Ok(Json(s.view()))
    })
}
