use std::collections::BTreeSet;
use std::time::Duration;

use busnet_core::synthetic::{random_city, write_dataset, CitySpec};
use busnet_core::workflow::{replay, ParetoDocument};
use busnet_core::{ProgressSnapshot, ResolutionView, SearchStatus};
use busnet_service::api::{ResolutionCreated, SearchCreated};
use busnet_service::{ErrorBody, Server, ServiceConfig};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use tempfile::TempDir;

const SPEC: CitySpec = CitySpec {
    stops: 120,
    routes: 12,
    trips: 3000,
    extent_km: 6.0,
    stops_per_route: 10,
    days: 3,
};

struct Harness {
    base: String,
    client: Client,
    _dir: TempDir,
    _shutdown: tokio::sync::oneshot::Sender<()>,
}

impl Harness {
    async fn start(config: ServiceConfig) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let (stops, routes, trips) = random_city(11, SPEC);
        write_dataset(dir.path(), &stops, &routes, &trips).unwrap();
        let config = ServiceConfig {
            listen: "127.0.0.1:0".parse().unwrap(),
            dataset_dir: Some(dir.path().to_path_buf()),
            ..config
        };
        let server = Server::bind(config).await.unwrap();
        let base = format!("http://{}", server.local_addr());
        let (tx, rx) = tokio::sync::oneshot::channel();
        tokio::spawn(server.run_until(async {
            let _ = rx.await;
        }));
        Self {
            base,
            client: Client::new(),
            _dir: dir,
            _shutdown: tx,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn get(&self, path: &str) -> reqwest::Response {
        self.client.get(self.url(path)).send().await.unwrap()
    }

    async fn post(&self, path: &str, body: Value) -> reqwest::Response {
        self.client.post(self.url(path)).json(&body).send().await.unwrap()
    }

    /// A search session on the `skip`-th route whose station graph has at least
    /// `min_nodes` nodes.
    async fn search(&self, min_nodes: usize, skip: usize) -> SearchCreated {
        let mut seen = 0;
        for r in 0..SPEC.routes {
            let resp = self
                .post("/search/sessions", json!({ "route_id": format!("R{r:04}"), "params": { "seed": 5, "parallel": 2 } }))
                .await;
            if resp.status() == StatusCode::CREATED {
                let created: SearchCreated = resp.json().await.unwrap();
                if created.graph_size >= min_nodes {
                    if seen == skip {
                        return created;
                    }
                    seen += 1;
                }
                self.client
                    .delete(self.url(&format!("/search/sessions/{}", created.session_id)))
                    .send()
                    .await
                    .unwrap();
            }
        }
        panic!("no usable route");
    }

    async fn control(&self, id: &str, action: &str) -> ProgressSnapshot {
        let resp = self.post(&format!("/search/sessions/{id}/control"), json!({ "action": action })).await;
        assert_eq!(resp.status(), StatusCode::OK);
        resp.json().await.unwrap()
    }

    async fn stream(&self, id: &str) -> Sse {
        let resp = self.get(&format!("/search/sessions/{id}/stream")).await;
        assert_eq!(resp.status(), StatusCode::OK);
        assert!(resp.headers()["content-type"].to_str().unwrap().starts_with("text/event-stream"));
        Sse { resp, buf: String::new() }
    }
}

struct Sse {
    resp: reqwest::Response,
    buf: String,
}

impl Sse {
    async fn next(&mut self) -> Option<ProgressSnapshot> {
        loop {
            while let Some(end) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..end + 2).collect();
                let data: Vec<&str> = block.lines().filter_map(|l| l.strip_prefix("data:")).map(str::trim_start).collect();
                if block.lines().any(|l| l == "event: snapshot") {
                    return Some(serde_json::from_str(&data.join("\n")).unwrap());
                }
            }
            let chunk = tokio::time::timeout(Duration::from_secs(20), self.resp.chunk())
                .await
                .expect("stream stalled")
                .unwrap()?;
            self.buf.push_str(std::str::from_utf8(&chunk).unwrap());
        }
    }

    async fn until(&mut self, f: impl Fn(&ProgressSnapshot) -> bool) -> ProgressSnapshot {
        loop {
            let s = self.next().await.expect("stream ended");
            if f(&s) {
                return s;
            }
        }
    }
}

async fn error_code(resp: reqwest::Response, status: StatusCode) -> String {
    assert_eq!(resp.status(), status);
    resp.json::<ErrorBody>().await.unwrap().code
}

#[tokio::test(flavor = "multi_thread")]
async fn health_and_unknown_paths() {
    let h = Harness::start(ServiceConfig::default()).await;
    let body: Value = h.get("/health").await.json().await.unwrap();
    assert_eq!(body, json!({ "status": "ok" }));
    let code = error_code(h.get("/search/sessions/nope").await, StatusCode::NOT_FOUND).await;
    assert_eq!(code, "not_found");
    let code = error_code(h.get("/zones?count=1&dataset=zz").await, StatusCode::NOT_FOUND).await;
    assert_eq!(code, "unknown_dataset");
}

#[tokio::test(flavor = "multi_thread")]
async fn multipart_upload_becomes_default_dataset() {
    let h = Harness::start(ServiceConfig::default()).await;
    let dir = tempfile::tempdir().unwrap();
    let (stops, routes, trips) = random_city(3, CitySpec { stops: 30, routes: 2, trips: 100, ..SPEC });
    write_dataset(dir.path(), &stops, &routes, &trips).unwrap();
    let mut form = reqwest::multipart::Form::new();
    for name in ["stops", "routes", "trips"] {
        let bytes = std::fs::read(dir.path().join(format!("{name}.csv"))).unwrap();
        form = form.part(name, reqwest::multipart::Part::bytes(bytes).file_name(format!("{name}.csv")));
    }
    let resp = h.client.post(h.url("/datasets")).multipart(form).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let info: Value = resp.json().await.unwrap();
    assert_eq!(info["stops"], 30);
    assert_eq!(info["trips"], 100);
    let ranked: Value = h.get("/routes").await.json().await.unwrap();
    assert_eq!(ranked["routes"].as_array().unwrap().len(), 2);
    let list: Value = h.get("/datasets").await.json().await.unwrap();
    assert_eq!(list.as_array().unwrap().len(), 2);

    let form = reqwest::multipart::Form::new().part("stops", reqwest::multipart::Part::bytes(b"x".to_vec()));
    let resp = h.client.post(h.url("/datasets")).multipart(form).send().await.unwrap();
    assert_eq!(error_code(resp, StatusCode::BAD_REQUEST).await, "invalid_request");
    let mut form = reqwest::multipart::Form::new();
    for name in ["stops", "routes", "trips"] {
        form = form.part(name, reqwest::multipart::Part::bytes(b"wrong,header\n".to_vec()));
    }
    let resp = h.client.post(h.url("/datasets")).multipart(form).send().await.unwrap();
    assert_eq!(error_code(resp, StatusCode::BAD_REQUEST).await, "malformed_header");
}

#[tokio::test(flavor = "multi_thread")]
async fn analytics_endpoints() {
    let h = Harness::start(ServiceConfig::default()).await;
    let zones: Value = h.get("/zones?count=1").await.json().await.unwrap();
    let features = zones["features"].as_array().unwrap();
    assert_eq!(features.len(), 1);
    assert_eq!(features[0]["properties"]["stop_count"], SPEC.stops);
    assert!(features[0]["properties"]["outflow_by_bearing"].is_array());
    let zones: Value = h.get("/zones?count=5").await.json().await.unwrap();
    assert_eq!(zones["features"].as_array().unwrap().len(), 5);
    let code = error_code(h.get("/zones?count=0").await, StatusCode::BAD_REQUEST).await;
    assert_eq!(code, "invalid_parameter");
    let code = error_code(h.get("/zones").await, StatusCode::BAD_REQUEST).await;
    assert_eq!(code, "invalid_request");

    let ranked: Value = h.get("/routes?weights=passenger_flow%3D1").await.json().await.unwrap();
    let routes = ranked["routes"].as_array().unwrap();
    assert_eq!(routes.len(), SPEC.routes);
    let flows: Vec<f64> = routes.iter().map(|r| r["criteria"]["passenger_flow"].as_f64().unwrap()).collect();
    assert!(flows.windows(2).all(|w| w[0] >= w[1]));
    let filtered: Value = h.get("/routes?filters=stop_count%3E%3D100").await.json().await.unwrap();
    assert!(filtered["routes"].as_array().unwrap().is_empty());
    let code = error_code(h.get("/routes?weights=speed%3D1").await, StatusCode::BAD_REQUEST).await;
    assert_eq!(code, "invalid_parameter");

    let m: Value = h.get("/routes/R0000/matrix?bin=weekday&threshold=5").await.json().await.unwrap();
    let total: u64 = m["cells"].as_array().unwrap().iter().map(|c| c["count"].as_u64().unwrap()).sum();
    assert_eq!(total, m["total_trips"].as_u64().unwrap());
    assert!(total > 0);
    let code = error_code(h.get("/routes/zz/matrix").await, StatusCode::NOT_FOUND).await;
    assert_eq!(code, "unknown_route");
    let code = error_code(h.get("/routes/R0000/matrix?bin=monthly").await, StatusCode::BAD_REQUEST).await;
    assert_eq!(code, "invalid_parameter");

    let stop = m["stops"][0].as_str().unwrap().to_string();
    let t: Value = h.get(&format!("/routes/R0000/transfers/{stop}")).await.json().await.unwrap();
    assert_eq!(t["stop_id"], stop);
    let code = error_code(h.get("/routes/R0000/transfers/nowhere").await, StatusCode::NOT_FOUND).await;
    assert_eq!(code, "unknown_stop");
}

#[tokio::test(flavor = "multi_thread")]
async fn stream_starts_at_iteration_zero_and_follows_control() {
    let h = Harness::start(ServiceConfig {
        snapshot_interval: 5,
        ..ServiceConfig::default()
    })
    .await;
    let created = h.search(60, 0).await;
    assert_eq!(created.snapshot.iteration, 0);
    let id = created.session_id;
    let mut sse = h.stream(&id).await;
    let first = sse.next().await.unwrap();
    assert_eq!(first.iteration, 0);
    assert_eq!(first.pareto_count, 0);
    assert_eq!(first.status, SearchStatus::Paused);

    h.control(&id, "resume").await;
    let mut last = first.clone();
    let mut stepped = 0;
    while stepped < 5 {
        let s = sse.next().await.unwrap();
        assert!(s.seq > last.seq);
        assert!(s.iteration >= last.iteration);
        assert_eq!(s.pareto_count, s.routes.len());
        if s.iteration > last.iteration {
            stepped += 1;
        }
        let done = s.status == SearchStatus::Exhausted;
        last = s;
        if done {
            break;
        }
    }
    let resp = h.post(&format!("/search/sessions/{id}/control"), json!({ "action": "pause" })).await;
    if resp.status() == StatusCode::OK {
        let ack: ProgressSnapshot = resp.json().await.unwrap();
        assert_eq!(ack.status, SearchStatus::Paused);
        let paused = sse.until(|s| s.status == SearchStatus::Paused).await;
        assert!(paused.seq >= ack.seq);
        let again: ProgressSnapshot = h.get(&format!("/search/sessions/{id}")).await.json().await.unwrap();
        assert_eq!(again.iteration, paused.iteration);
    } else {
        // The search finished before the pause arrived.
        assert_eq!(error_code(resp, StatusCode::CONFLICT).await, "invalid_state");
        let s: ProgressSnapshot = h.get(&format!("/search/sessions/{id}")).await.json().await.unwrap();
        assert_eq!(s.status, SearchStatus::Exhausted);
    }
    let ack = h.control(&id, "stop").await;
    assert!(matches!(ack.status, SearchStatus::Stopped | SearchStatus::Exhausted));
    if last.status != SearchStatus::Exhausted {
        let end = sse.until(|s| matches!(s.status, SearchStatus::Stopped | SearchStatus::Exhausted)).await;
        assert_eq!(end.status, ack.status);
    }
    assert!(sse.next().await.is_none(), "stream ends after a terminal snapshot");
    let resp = h.post(&format!("/search/sessions/{id}/control"), json!({ "action": "resume" })).await;
    assert_eq!(error_code(resp, StatusCode::CONFLICT).await, "invalid_state");
    let resp = h.post(&format!("/search/sessions/{id}/control"), json!({ "action": "jump" })).await;
    assert_eq!(error_code(resp, StatusCode::BAD_REQUEST).await, "invalid_request");
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_sessions_do_not_mix() {
    let h = Harness::start(ServiceConfig {
        snapshot_interval: 3,
        ..ServiceConfig::default()
    })
    .await;
    let a = h.search(30, 0).await;
    let b = h.search(30, 1).await;
    assert_ne!(a.session_id, b.session_id);
    assert_ne!(a.stop_sets, b.stop_sets);
    let mut sa = h.stream(&a.session_id).await;
    let mut sb = h.stream(&b.session_id).await;
    h.control(&a.session_id, "resume").await;
    h.control(&b.session_id, "resume").await;
    let check = |s: &ProgressSnapshot, created: &SearchCreated| {
        for r in &s.routes {
            assert_eq!(r.stops.first(), created.stop_sets.first().and_then(|x| x.first()));
            assert_eq!(r.stops.last(), created.stop_sets.last().and_then(|x| x.last()));
        }
    };
    let (mut la, mut lb) = (0, 0);
    for _ in 0..6 {
        let (x, y) = tokio::join!(sa.next(), sb.next());
        if let Some(x) = x {
            assert!(x.seq > la);
            la = x.seq;
            check(&x, &a);
        }
        if let Some(y) = y {
            assert!(y.seq > lb);
            lb = y.seq;
            check(&y, &b);
        }
    }
    let end_a = sa.until(|s| s.pareto_count > 0 || s.status == SearchStatus::Exhausted).await;
    let end_b = sb.until(|s| s.pareto_count > 0 || s.status == SearchStatus::Exhausted).await;
    check(&end_a, &a);
    check(&end_b, &b);
}

#[tokio::test(flavor = "multi_thread")]
async fn station_removal_shows_in_next_snapshot() {
    let h = Harness::start(ServiceConfig::default()).await;
    let created = h.search(60, 0).await;
    let id = created.session_id;
    h.control(&id, "resume").await;
    let mut sse = h.stream(&id).await;
    let with_routes = sse.until(|s| s.routes.iter().any(|r| r.stops.len() > 2)).await;
    if with_routes.status != SearchStatus::Exhausted {
        h.control(&id, "pause").await;
    }
    let current: ProgressSnapshot = h.get(&format!("/search/sessions/{id}")).await.json().await.unwrap();
    let victim = current.routes.iter().find(|r| r.stops.len() > 2).unwrap().stops[1].clone();
    let resp = h.post(&format!("/search/sessions/{id}/stations"), json!({ "remove": [victim] })).await;
    if current.status == SearchStatus::Exhausted {
        assert_eq!(error_code(resp, StatusCode::CONFLICT).await, "invalid_state");
        return;
    }
    assert_eq!(resp.status(), StatusCode::OK);
    let after: ProgressSnapshot = resp.json().await.unwrap();
    assert!(after.routes.iter().all(|r| !r.stops.contains(&victim)));
    let streamed = sse.until(|s| s.seq == after.seq).await;
    assert_eq!(streamed, after);
    let anchor = created.stop_sets[0][0].clone();
    let resp = h.post(&format!("/search/sessions/{id}/stations"), json!({ "remove": [anchor] })).await;
    assert_eq!(error_code(resp, StatusCode::UNPROCESSABLE_ENTITY).await, "constraint_violation");
}

#[tokio::test(flavor = "multi_thread")]
async fn resolution_session_matches_offline_replay() {
    let h = Harness::start(ServiceConfig::default()).await;
    let mut chosen = None;
    for skip in 0..4 {
        let created = h.search(20, skip).await;
        let id = created.session_id.clone();
        h.control(&id, "resume").await;
        let mut sse = h.stream(&id).await;
        let s = sse.until(|s| s.pareto_count >= 3 || s.status == SearchStatus::Exhausted).await;
        if s.status != SearchStatus::Exhausted {
            h.control(&id, "pause").await;
        }
        let doc: ParetoDocument = h.get(&format!("/search/sessions/{id}/pareto")).await.json().await.unwrap();
        if doc.routes.len() >= 3 {
            chosen = Some((id, doc));
            break;
        }
    }
    let (search_id, doc) = chosen.expect("a session with several Pareto routes");
    let resp = h.post("/resolve/sessions", json!({ "search_session_id": search_id, "beta": 2 })).await;
    assert_eq!(resp.status(), StatusCode::CREATED);
    let created: ResolutionCreated = resp.json().await.unwrap();
    let rid = created.session_id;
    let mut view = created.view;
    assert_eq!(view.candidates.len(), doc.routes.len());

    let mut offline = doc.resolution(busnet_core::CriterionVector::from_array([1.0; 5]), 2).unwrap();
    let mut choices = Vec::new();
    while view.final_route.is_none() {
        let conflict = view
            .conflicts
            .iter()
            .position(|c| c.status == busnet_core::resolution::MarkerState::Active)
            .unwrap();
        let cluster = *view.conflicts[conflict].alternatives.last().unwrap().clusters.last().unwrap();
        let markers: BTreeSet<&String> = view.markers.keys().collect();
        assert!(!markers.is_empty());
        let resp = h
            .post(&format!("/resolve/sessions/{rid}/resolve"), json!({ "conflict_index": conflict, "cluster_id": cluster }))
            .await;
        assert_eq!(resp.status(), StatusCode::OK);
        view = resp.json().await.unwrap();
        choices.push(cluster);
    }
    let outcome = replay(&mut offline, &choices).unwrap();
    assert_eq!(outcome.final_route, view.final_route);
    assert_eq!(view.history_depth, choices.len());

    let resp = h
        .post(&format!("/resolve/sessions/{rid}/resolve"), json!({ "conflict_index": 0, "cluster_id": 0 }))
        .await;
    assert_eq!(error_code(resp, StatusCode::CONFLICT).await, "invalid_state");
    let resp = h.post(&format!("/resolve/sessions/{rid}/undo"), json!({})).await;
    let undone: ResolutionView = resp.json().await.unwrap();
    assert!(undone.final_route.is_none());
    assert_eq!(undone.history_depth, choices.len() - 1);
    let fetched: ResolutionView = h.get(&format!("/resolve/sessions/{rid}")).await.json().await.unwrap();
    assert_eq!(fetched, undone);
}

#[tokio::test(flavor = "multi_thread")]
async fn inline_resolution_of_three_route_fixture() {
    let h = Harness::start(ServiceConfig::default()).await;
    let route = |id: &str, stops: &[&str]| {
        json!({ "id": id, "stops": stops, "criteria": { "service_time": 1.0, "passenger_flow": 1.0, "directness": 1.0, "construction_cost": 1.0, "service_cost": 1.0 } })
    };
    let body = json!({
        "routes": [route("a", &["1", "3", "4", "5"]), route("b", &["1", "3", "6", "5"]), route("c", &["1", "2", "7", "5"])],
        "beta": 2,
    });
    let created: ResolutionCreated = h.post("/resolve/sessions", body).await.json().await.unwrap();
    let mut patterns: Vec<String> = created.view.clusters.iter().map(|c| c.pattern.join("-")).collect();
    patterns.sort();
    assert_eq!(patterns, ["1-2-7-5", "1-3-*-5"]);
    let rid = created.session_id;
    let k = created.view.clusters.iter().position(|c| c.pattern.join("-") == "1-2-7-5").unwrap();
    let view: ResolutionView = h
        .post(&format!("/resolve/sessions/{rid}/resolve"), json!({ "conflict_index": 0, "cluster_id": k }))
        .await
        .json()
        .await
        .unwrap();
    assert_eq!(view.final_route.unwrap().id, "c");
    let resp = h.post("/resolve/sessions", json!({ "beta": 2 })).await;
    assert_eq!(error_code(resp, StatusCode::BAD_REQUEST).await, "invalid_request");
    let resp = h.post("/resolve/sessions", json!({ "routes": [route("a", &["1", "2"])], "beta": 1 })).await;
    assert_eq!(error_code(resp, StatusCode::BAD_REQUEST).await, "invalid_parameter");
}

#[tokio::test(flavor = "multi_thread")]
async fn session_limit_and_bad_requests() {
    let h = Harness::start(ServiceConfig {
        max_sessions: 1,
        ..ServiceConfig::default()
    })
    .await;
    let a = h.search(6, 0).await;
    let resp = h.post("/search/sessions", json!({ "route_id": "R0000" })).await;
    assert_eq!(error_code(resp, StatusCode::TOO_MANY_REQUESTS).await, "too_many_sessions");
    h.control(&a.session_id, "stop").await;
    let resp = h.post("/search/sessions", json!({ "route_id": "missing" })).await;
    assert_eq!(error_code(resp, StatusCode::NOT_FOUND).await, "unknown_route");
    let resp = h.post("/search/sessions", json!({})).await;
    assert_eq!(error_code(resp, StatusCode::BAD_REQUEST).await, "invalid_request");
    let resp = h.post("/search/sessions", json!({ "route_id": "R0000", "bogus": 1 })).await;
    assert_eq!(error_code(resp, StatusCode::BAD_REQUEST).await, "invalid_request");
    let resp = h.post("/search/sessions", json!({ "route_id": "R0000", "params": { "parallel": 0 } })).await;
    assert_eq!(error_code(resp, StatusCode::BAD_REQUEST).await, "invalid_parameter");
}

#[tokio::test(flavor = "multi_thread")]
async fn idle_sessions_are_evicted() {
    let h = Harness::start(ServiceConfig {
        idle_timeout_secs: 0,
        ..ServiceConfig::default()
    })
    .await;
    let a = h.search(6, 0).await;
    tokio::time::sleep(Duration::from_millis(400)).await;
    let resp = h.get(&format!("/search/sessions/{}", a.session_id)).await;
    assert_eq!(error_code(resp, StatusCode::NOT_FOUND).await, "not_found");
}

#[tokio::test]
async fn startup_fails_without_dataset() {
    let config = ServiceConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        dataset_dir: Some("/nonexistent/busnet".into()),
        ..ServiceConfig::default()
    };
    assert!(matches!(Server::bind(config).await, Err(busnet_service::ServiceError::Dataset(_))));
    let taken = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let config = ServiceConfig {
        listen: taken.local_addr().unwrap(),
        ..ServiceConfig::default()
    };
    assert!(matches!(Server::bind(config).await, Err(busnet_service::ServiceError::Bind { .. })));
}
