//! HTTP query service over one run directory.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gcx_core::RunArtifact;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;

use crate::error::CliError;
use crate::ops;
use crate::request::ConceptRequest;

pub type SharedRun = Arc<RwLock<RunArtifact>>;

impl IntoResponse for CliError {
    fn into_response(self) -> Response {
        let status = match self.code() {
            "not_found" | "empty_concept" => StatusCode::NOT_FOUND,
            "validation" | "input" | "unsupported_layer" | "capacity" | "empty_report" => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self.to_json())).into_response()
    }
}

type ApiResult = Result<Json<Value>, CliError>;

fn to_json(value: impl serde::Serialize) -> ApiResult {
    Ok(Json(serde_json::to_value(value).expect("response serializes")))
}

pub fn router(run: RunArtifact) -> Router {
    let state: SharedRun = Arc::new(RwLock::new(run));
    Router::new()
        .route("/api/run", get(get_run))
        .route("/api/concepts", post(post_concepts))
        .route("/api/concepts/{id}/scores", get(get_scores))
        .route("/api/concepts/{id}/reps", get(get_reps))
        .route("/api/explain/node/{id}", get(get_explain_node))
        .route("/api/explain/graph/{id}", get(get_explain_graph))
        .route("/api/activations", get(get_activations))
        .with_state(state)
}

async fn get_run(State(run): State<SharedRun>) -> ApiResult {
    let run = run.read().await;
    to_json(json!({
        "manifest": run.manifest,
        "layers": run.manifest.layers,
        "class_names": run.dataset.class_names(),
        "concept_models": run.concepts.keys().collect::<Vec<_>>(),
    }))
}

async fn post_concepts(State(run): State<SharedRun>, body: Result<Json<ConceptRequest>, axum::extract::rejection::JsonRejection>) -> ApiResult {
    let Json(request) = body.map_err(|e| CliError::validation("body", e.body_text()))?;
    let mut run = run.write().await;
    to_json(ops::discover(&mut run, &request)?)
}

#[derive(Debug, Deserialize)]
struct ScoreQuery {
    n: Option<usize>,
    top: Option<usize>,
}

async fn get_scores(State(run): State<SharedRun>, Path(id): Path<String>, Query(q): Query<ScoreQuery>) -> ApiResult {
    let (hops, top_m) = (q.n.unwrap_or(2), q.top.unwrap_or(3));
    if let Some(cached) = run.read().await.cached_score(&id, hops, top_m) {
        return to_json(cached);
    }
    let mut run = run.write().await;
    to_json(ops::scores(&mut run, &id, hops, top_m)?)
}

#[derive(Debug, Deserialize)]
struct RepsQuery {
    concept: usize,
    n: Option<usize>,
    top: Option<usize>,
    order: Option<String>,
}

async fn get_reps(State(run): State<SharedRun>, Path(id): Path<String>, Query(q): Query<RepsQuery>) -> ApiResult {
    let run = run.read().await;
    let ordering = ops::parse_order(q.order.as_deref())?;
    let reps = ops::representations(&run, &id, q.concept, q.n.unwrap_or(2), q.top.unwrap_or(5), ordering)?;
    to_json(json!({ "concept": q.concept, "class_names": run.dataset.class_names(), "representations": reps }))
}

#[derive(Debug, Deserialize)]
struct ExplainQuery {
    model: Option<String>,
    n: Option<usize>,
    top: Option<usize>,
}

async fn get_explain_node(State(run): State<SharedRun>, Path(node): Path<usize>, Query(q): Query<ExplainQuery>) -> ApiResult {
    let run = run.read().await;
    let id = ops::pick_model(&run, q.model.as_deref())?.to_string();
    let e = ops::node_explanation(&run, &id, node, q.n.unwrap_or(2), q.top.unwrap_or(5))?;
    to_json(json!({ "model": id, "class_names": run.dataset.class_names(), "explanation": e }))
}

async fn get_explain_graph(State(run): State<SharedRun>, Path(graph): Path<usize>, Query(q): Query<ExplainQuery>) -> ApiResult {
    let run = run.read().await;
    let id = ops::pick_model(&run, q.model.as_deref())?.to_string();
    let e = ops::graph_explanation(&run, &id, graph, q.n.unwrap_or(2), q.top.unwrap_or(5))?;
    to_json(json!({ "model": id, "class_names": run.dataset.class_names(), "explanation": e }))
}

#[derive(Debug, Deserialize)]
struct ActivationQuery {
    layer: Option<usize>,
    dr: Option<String>,
    model: Option<String>,
}

async fn get_activations(State(run): State<SharedRun>, Query(q): Query<ActivationQuery>) -> ApiResult {
    let run = run.read().await;
    let layer = q.layer.unwrap_or(run.trace.last_conv);
    to_json(ops::activations(&run, layer, q.dr.as_deref(), q.model.as_deref())?)
}

/// Serves until the process is stopped.
pub fn serve(run: RunArtifact, addr: &str) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(gcx_core::Error::Io)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(gcx_core::Error::Io)?;
        eprintln!("serving on http://{}", listener.local_addr().map_err(gcx_core::Error::Io)?);
        axum::serve(listener, router(run)).await.map_err(gcx_core::Error::Io)?;
        Ok(())
    })
}
