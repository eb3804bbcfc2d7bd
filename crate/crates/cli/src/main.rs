use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use busnet_core::analytics::{
    compute_zones, detect_transfers, flow_matrix, rank_routes, transfer_summary, write_rank_csv, zone_statistics,
    RankFilters, RankWeights, TimeBin,
};
use busnet_core::network::load_dataset_dir;
use busnet_core::resolution::DEFAULT_BETA;
use busnet_core::workflow::{default_window, replay, start_search, ParetoDocument, SearchRequest};
use busnet_core::{BusNetwork, CostParams, CriterionRanges, GraphParams, SearchParams, TimeWindow, TransferParams};
use busnet_service::ServiceConfig;
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "busnet", version, about = "Bus network analytics and route replanning")]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cost parameters (.toml or .json).
    #[arg(long, global = true)]
    cost: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Directory with stops.csv, routes.csv, trips.csv and optional road_distances.csv.
    #[arg(long)]
    dataset: PathBuf,
    /// Start of the analysis window (RFC 3339); defaults to the first trip.
    #[arg(long)]
    start: Option<DateTime<Utc>>,
    /// End of the analysis window (RFC 3339); defaults to just after the last trip.
    #[arg(long)]
    end: Option<DateTime<Utc>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a dataset and write an ingest summary.
    Ingest {
        #[command(flatten)]
        data: DatasetArgs,
    },
    /// Transportation zones as GeoJSON with per-zone statistics.
    Zones {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        count: usize,
    },
    /// Rank existing routes and write rank.csv.
    Rank {
        #[command(flatten)]
        data: DatasetArgs,
        /// `criterion=weight` items, e.g. `passenger_flow=2,service_cost=1`.
        #[arg(long)]
        weights: Option<String>,
        /// Range filters, e.g. `flow>=150,route_length<=35`.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Passenger flow matrix of one route as JSON.
    Matrix {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        route: String,
        #[arg(long, default_value = "hourly")]
        bin: TimeBin,
        #[arg(long, default_value_t = 10.0)]
        threshold: f64,
    },
    /// Transfers at the stops of one route.
    Transfers {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        route: String,
        /// A single stop; every stop of the route when absent.
        #[arg(long)]
        stop: Option<String>,
    },
    /// Pareto route search; writes the Pareto set as JSON.
    Search {
        #[command(flatten)]
        data: DatasetArgs,
        /// Replan between this route's first and last stop.
        #[arg(long)]
        route: Option<String>,
        /// Comma-separated stops the route must visit in order. Without `--route`
        /// the first and last are origin and destination.
        #[arg(long, value_delimiter = ',')]
        anchors: Vec<String>,
        /// Criterion ranges, e.g. `service_cost=..500,passenger_flow=100..`.
        #[arg(long)]
        ranges: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        iterations: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        exploration: Option<f64>,
        #[arg(long)]
        min_spacing_km: Option<f64>,
        #[arg(long)]
        max_spacing_km: Option<f64>,
        /// Passenger catchment radius around stops, metres.
        #[arg(long, default_value_t = 0.0)]
        catchment_m: f64,
    },
    /// Replay cluster choices over a Pareto set and write the outcome.
    Resolve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: usize,
        /// Cluster index picked at each successive active conflict.
        #[arg(long, value_delimiter = ',')]
        choose: Vec<usize>,
        #[arg(long)]
        weights: Option<String>,
    },
    /// Run the HTTP service.
    Serve {
        /// Service configuration (TOML); flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        listen: Option<std::net::SocketAddr>,
        #[arg(long)]
        max_sessions: Option<usize>,
        #[arg(long)]
        snapshot_interval: Option<u64>,
    },
}

/// Failure reported as one JSON line on stderr.
#[derive(Debug, Serialize)]
struct Failure {
    code: String,
    message: String,
    #[serde(skip)]
    usage: bool,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: "usage".into(),
            message: message.into(),
            usage: true,
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self {
            code: "io".into(),
            message: format!("{}: {e}", path.display()),
            usage: false,
        }
    }
}

impl<E: Into<busnet_core::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        Self {
            code: e.code().into(),
            message: e.to_string(),
            usage: false,
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", serde_json::to_string(&f).expect("failure serializes"));
            ExitCode::from(if f.usage { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let cost = match &cli.cost {
        Some(p) => CostParams::load(p)?,
        None => CostParams::default(),
    };
    let out = cli.out.as_deref();
    match cli.command {
        Command::Ingest { data } => {
            let (network, report) = load_dataset_dir(&data.dataset, &TransferParams::default())?;
            let summary = serde_json::json!({
                "stops": network.stops().len(),
                "routes": network.routes().len(),
                "trips": network.trips().len(),
                "window": network.full_window(),
                "report": report,
            });
            write_json(out, &summary)
        }
        Command::Zones { data, count } => {
            let (network, window) = load(&data)?;
            let partition = compute_zones(&network, count)?;
            let stats = zone_statistics(&partition, &network, &window, &cost);
            let geojson = partition.to_geojson(|i| {
                stats
                    .get(&partition.zones[i].zone_id)
                    .and_then(|s| serde_json::to_value(s).ok())
            });
            write_json(out, &geojson)
        }
        Command::Rank { data, weights, filter } => {
            let (network, window) = load(&data)?;
            let weights = match weights {
                Some(w) => RankWeights::parse(&w)?,
                None => RankWeights::default(),
            };
            let filters = RankFilters::parse(filter.as_deref().unwrap_or(""))?;
            let ranked = rank_routes(&network, &weights, &filters, &window, &cost)?;
            write_with(out, |w| {
                write_rank_csv(&ranked, w).map_err(|e| io::Error::other(e.to_string()))
            })
        }
        Command::Matrix {
            data,
            route,
            bin,
            threshold,
        } => {
            let (network, window) = load(&data)?;
            let m = flow_matrix(&network, &route, &window, threshold, bin, &TransferParams::default())?;
            write_json(out, &m)
        }
        Command::Transfers { data, route, stop } => {
            let (network, _) = load(&data)?;
            let r = network
                .route_index(&route)
                .ok_or_else(|| busnet_core::NetworkError::UnknownRoute(route.clone()))?;
            let stops: Vec<String> = match stop {
                Some(s) => vec![s],
                None => network.route(r).stops.iter().map(|&s| network.stop(s).stop_id.clone()).collect(),
            };
            let links = detect_transfers(&network, &TransferParams::default());
            let summaries: Vec<_> = stops.iter().map(|s| transfer_summary(&links, &route, s)).collect();
            write_json(out, &summaries)
        }
        Command::Search {
            data,
            route,
            anchors,
            ranges,
            iterations,
            seed,
            parallel,
            exploration,
            min_spacing_km,
            max_spacing_km,
            catchment_m,
        } => {
            if seed.is_none() && std::env::var_os("CI").is_some() {
                return Err(Failure::usage("`--seed` is required when CI is set"));
            }
            let (network, window) = load(&data)?;
            let mut params = SearchParams {
                parallel,
                seed,
                ..SearchParams::default()
            };
            if let Some(c) = exploration {
                params.exploration = c;
            }
            let mut graph = GraphParams::default();
            if let Some(v) = min_spacing_km {
                graph.min_spacing_km = v;
            }
            if let Some(v) = max_spacing_km {
                graph.max_spacing_km = v;
            }
            let request = SearchRequest {
                stop_sets: (!anchors.is_empty()).then(|| anchors.into_iter().map(|a| vec![a]).collect()),
                route_id: route,
                params,
                ranges: match ranges {
                    Some(r) => CriterionRanges::parse(&r)?,
                    None => CriterionRanges::default(),
                },
                graph: Some(graph),
                cost: Some(cost),
                window: Some(window),
                catchment_m,
            };
            let mut setup = start_search(network, &request, graph, cost)?;
            setup.session.run_to_exhaustion(iterations)?;
            write_json(out, &ParetoDocument::from_session(&setup))
        }
        Command::Resolve {
            input,
            beta,
            choose,
            weights,
        } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Failure::io(&input, e))?;
            let doc: ParetoDocument = serde_json::from_str(&text).map_err(|e| Failure {
                code: "invalid_input".into(),
                message: format!("{}: {e}", input.display()),
                usage: false,
            })?;
            let weights = match weights {
                Some(w) => RankWeights::parse(&w)?,
                None => RankWeights::default(),
            };
            let mut session = doc.resolution(weights.0, beta)?;
            let outcome = replay(&mut session, &choose)?;
            write_json(out, &outcome)
        }
        Command::Serve {
            config,
            dataset,
            listen,
            max_sessions,
            snapshot_interval,
        } => {
            let mut c = match &config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
                    toml::from_str(&text).map_err(|e| Failure {
                        code: "invalid_config".into(),
                        message: format!("{}: {e}", p.display()),
                        usage: false,
                    })?
                }
                None => ServiceConfig::default(),
            };
            if cli.cost.is_some() {
                c.cost = cost;
            }
            c.dataset_dir = dataset.or(c.dataset_dir);
            c.listen = listen.unwrap_or(c.listen);
            c.max_sessions = max_sessions.unwrap_or(c.max_sessions);
            c.snapshot_interval = snapshot_interval.unwrap_or(c.snapshot_interval);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure {
                code: "io".into(),
                message: e.to_string(),
                usage: false,
            })?;
            runtime.block_on(busnet_service::serve(c)).map_err(|e| Failure {
                code: "service".into(),
                message: e.to_string(),
                usage: false,
            })
        }
    }
}

fn load(data: &DatasetArgs) -> Result<(Arc<BusNetwork>, TimeWindow), Failure> {
    let (network, _) = load_dataset_dir(&data.dataset, &TransferParams::default())?;
    let full = default_window(&network);
    let window = TimeWindow::new(data.start.unwrap_or(full.start), data.end.unwrap_or(full.end))?;
    Ok((Arc::new(network), window))
}

fn write_with(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::io(path, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::io(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|e| Failure::io(Path::new("<stdout>"), e))
        }
    }
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Outcome {
    write_with(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
        writeln!(w)
    })
}
