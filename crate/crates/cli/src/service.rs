//! JSON-over-HTTP API under `/v1`.
//!
//! Reads take a shared lock on the current state; tick commits and snapshot
//! loads take the exclusive lock, so commits are serialized and every read
//! sees the state after the last committed tick.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cellwatch_core::edge::{default_density_grid, posterior_density_curve};
use cellwatch_core::graph::{EdgeRecord, OriginClass};
use cellwatch_core::indicators::{rank_cells, round2, IndicatorReport};
use cellwatch_core::orchestrator::{commit_tick, what_if, Intervention, ScenarioState, TickBatch, TickReport};
use cellwatch_core::{EntityId, Error, Pair};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::RwLock;

use crate::store::Store;

pub const API_VERSION: u32 = 1;

pub struct AppState {
    scenario: RwLock<ScenarioState>,
    store: Option<Store>,
}

pub type Shared = Arc<AppState>;

pub fn router(state: ScenarioState, store: Option<Store>) -> Router {
    let shared = Arc::new(AppState { scenario: RwLock::new(state), store });
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/graph", get(graph))
        .route("/v1/entities/{id}/belief", get(entity_belief))
        .route("/v1/edges/{a}/{b}/belief", get(edge_belief))
        .route("/v1/cells", get(cells))
        .route("/v1/cells/{id}/indicators", get(cell_indicators))
        .route("/v1/ticks", post(post_tick))
        .route("/v1/what-if", post(post_what_if))
        .route("/v1/snapshot", get(get_snapshot).post(post_snapshot))
        .with_state(shared)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        Self { status, body: json!({ "error": { "kind": kind, "message": message.into() } }) }
    }

    fn schema(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "Schema", message)
    }

    fn internal(err: anyhow::Error) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Io", format!("{err:#}"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::TickMismatch { .. } => StatusCode::CONFLICT,
            Error::UnknownEntity(_) | Error::UnknownEdge(_) | Error::UnknownCell(_) => StatusCode::NOT_FOUND,
            Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let mut err = Self::new(status, e.kind(), e.to_string());
        if let Error::TickMismatch { expected, got } = e {
            err.body["error"]["expected_tick"] = json!(expected);
            err.body["error"]["got"] = json!(got);
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::schema(e.to_string()))
}

/// Adds the API version to a response object.
#[derive(Serialize)]
struct Versioned<T> {
    version: u32,
    #[serde(flatten)]
    body: T,
}

fn versioned<T>(body: T) -> Json<Versioned<T>> {
    Json(Versioned { version: API_VERSION, body })
}

async fn health(State(app): State<Shared>) -> impl IntoResponse {
    let s = app.scenario.read().await;
    versioned(json!({ "status": "ok", "scenario": s.config.name, "tick": s.tick }))
}

#[derive(Serialize)]
struct EdgeView {
    pair: Pair,
    origin: OriginClass,
    created: u64,
    alpha: f64,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
}

impl From<&EdgeRecord> for EdgeView {
    fn from(e: &EdgeRecord) -> Self {
        Self {
            pair: e.pair().clone(),
            origin: e.origin,
            created: e.created,
            alpha: e.belief.alpha,
            beta: e.belief.beta,
            mean: e.belief.is_proper().then(|| e.belief.mean()),
        }
    }
}

#[derive(Serialize)]
struct EntityView {
    id: EntityId,
    entered: u64,
    state: String,
    threat: Option<f64>,
}

#[derive(Serialize)]
struct CellView {
    id: String,
    members: Vec<EntityId>,
    connected: bool,
}

#[derive(Serialize)]
struct GraphView {
    tick: u64,
    entities: Vec<EntityView>,
    edges: Vec<EdgeView>,
    cells: Vec<CellView>,
}

async fn graph(State(app): State<Shared>) -> ApiResult<Versioned<GraphView>> {
    let s = app.scenario.read().await;
    let mut entities = Vec::new();
    for (id, rec) in s.graph.entities() {
        let model = s.entity_model(id)?;
        let belief = &s.entity_beliefs[id];
        let name = model.transition().space().name(belief.argmax_state()).unwrap_or_default().to_owned();
        // Threat mass under the first cell that contains the entity, if any.
        let threat = s.graph.cells().find(|c| c.members.contains(id)).map(|c| belief.marginal_threat(&c.member_threat_set));
        entities.push(EntityView { id: id.clone(), entered: rec.entered, state: name, threat });
    }
    Ok(versioned(GraphView {
        tick: s.tick,
        entities,
        edges: s.graph.edges().map(EdgeView::from).collect(),
        cells: s
            .graph
            .cells()
            .map(|c| CellView { id: c.id.clone(), members: c.members.iter().cloned().collect(), connected: c.connected })
            .collect(),
    }))
}

#[derive(Serialize)]
struct BeliefView {
    entity: EntityId,
    tick: u64,
    states: Vec<String>,
    marginal: Vec<f64>,
    duration_marginal: Vec<f64>,
}

async fn entity_belief(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Versioned<BeliefView>> {
    let s = app.scenario.read().await;
    let id = EntityId::from(id);
    let model = s.entity_model(&id)?;
    let b = &s.entity_beliefs[&id];
    Ok(versioned(BeliefView {
        entity: id,
        tick: s.tick,
        states: model.transition().space().names().to_vec(),
        marginal: b.marginal(),
        duration_marginal: b.duration_marginal(),
    }))
}

#[derive(Deserialize)]
struct CurveQuery {
    points: Option<usize>,
}

#[derive(Serialize)]
struct EdgeBeliefView {
    #[serde(flatten)]
    edge: EdgeView,
    tick: u64,
    variance: Option<f64>,
    grid: Vec<f64>,
    density: Vec<f64>,
}

async fn edge_belief(
    State(app): State<Shared>,
    Path((a, b)): Path<(String, String)>,
    Query(q): Query<CurveQuery>,
) -> ApiResult<Versioned<EdgeBeliefView>> {
    let s = app.scenario.read().await;
    let pair = Pair::new(a, b)?;
    let rec = s.graph.edge(&pair).ok_or_else(|| Error::UnknownEdge(pair.to_string()))?;
    let points = q.points.unwrap_or(101).clamp(2, 10_000);
    let (grid, density) = if rec.belief.is_proper() {
        let grid = default_density_grid(&rec.belief, points);
        let density = posterior_density_curve(&rec.belief, &grid)?;
        (grid, density)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(versioned(EdgeBeliefView {
        edge: EdgeView::from(rec),
        tick: s.tick,
        variance: rec.belief.is_proper().then(|| rec.belief.variance()),
        grid,
        density,
    }))
}

/// An indicator report with its display values rounded to two decimals.
#[derive(Serialize)]
struct IndicatorView<'a> {
    #[serde(flatten)]
    report: &'a IndicatorReport,
    display: Display,
}

#[derive(Serialize)]
struct Display {
    m: [f64; 5],
    phi: [f64; 5],
}

fn indicator_view(report: &IndicatorReport) -> IndicatorView<'_> {
    IndicatorView { report, display: Display { m: report.measures().map(round2), phi: report.phi.map(round2) } }
}

async fn cell_indicators(State(app): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = app.scenario.read().await;
    s.graph.cell(&id)?;
    let series: Vec<IndicatorView> = s.indicator_series(&id).into_iter().map(indicator_view).collect();
    Ok(versioned(json!({ "cell": id, "tick": s.tick, "series": series })).into_response())
}

#[derive(Deserialize)]
struct RankQuery {
    rank_by: Option<usize>,
}

async fn cells(State(app): State<Shared>, Query(q): Query<RankQuery>) -> Result<Response, ApiError> {
    let s = app.scenario.read().await;
    let current = s.current_indicators()?;
    let order = rank_cells(&current, q.rank_by.unwrap_or(0))?;
    let ranked: Vec<IndicatorView> =
        order.iter().filter_map(|id| current.iter().find(|r| &r.cell == id)).map(indicator_view).collect();
    Ok(versioned(json!({ "tick": s.tick, "cells": ranked })).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickRequest {
    pub expected_tick: u64,
    pub batch: TickBatch,
}

async fn post_tick(State(app): State<Shared>, body: Bytes) -> ApiResult<Versioned<TickReport>> {
    let req: TickRequest = parse(&body)?;
    if req.batch.tick != req.expected_tick {
        return Err(ApiError::schema(format!(
            "batch.tick {} does not match expected_tick {}",
            req.batch.tick, req.expected_tick
        )));
    }
    let mut s = app.scenario.write().await;
    if req.expected_tick != s.tick + 1 {
        return Err(Error::TickMismatch { expected: s.tick + 1, got: req.expected_tick }.into());
    }
    let next = commit_tick(&s, req.batch)?;
    if let Some(store) = &app.store {
        store.record_commit(&next).map_err(ApiError::internal)?;
    }
    *s = next;
    Ok(versioned(s.event_log.last().expect("just committed").clone()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfRequest {
    interventions: Vec<Intervention>,
}

async fn post_what_if(State(app): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: WhatIfRequest = parse(&body)?;
    let s = app.scenario.read().await;
    let report = what_if(&s, &req.interventions)?;
    let before: Vec<IndicatorView> = report.before.iter().map(indicator_view).collect();
    let after: Vec<IndicatorView> = report.after.iter().map(indicator_view).collect();
    Ok(versioned(json!({ "tick": report.tick, "before": before, "after": after })).into_response())
}

async fn get_snapshot(State(app): State<Shared>) -> Response {
    let s = app.scenario.read().await;
    ([(header::CONTENT_TYPE, "application/json")], s.to_snapshot_json()).into_response()
}

async fn post_snapshot(State(app): State<Shared>, body: Bytes) -> ApiResult<Versioned<serde_json::Value>> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::schema(e.to_string()))?;
    let loaded = ScenarioState::from_snapshot_json(text)?;
    loaded.config.validate()?;
    let mut s = app.scenario.write().await;
    if let Some(store) = &app.store {
        store.initialize(&loaded).map_err(ApiError::internal)?;
    }
    *s = loaded;
    Ok(versioned(json!({ "tick": s.tick, "scenario": s.config.name })))
}

pub async fn serve(state: ScenarioState, store: Option<Store>, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
