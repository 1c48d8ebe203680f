//! HTTP+JSON front end for [`SessionStore`].

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State as AxumState};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::{PendulumParams, State};
use crate::error::Error;
use crate::session::{Group, PhaseSpec, SessionStore, Status, ViaPointPair};
use crate::skills::{reference_trajectory, SkillId};

/// Default reference stride: 50 samples per second at the default time step.
pub const DEFAULT_STRIDE: usize = 200;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    /// Exposes `GET /api/sessions/{id}/report`.
    pub experimenter: bool,
}

pub enum ApiError {
    Core(Error),
    /// The request body could not be decoded.
    Body(JsonRejection),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::Body(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, mut body) = match &self {
            ApiError::Core(e) => {
                let status = match e {
                    Error::UnknownSession(_) | Error::UnknownSkill(_) => StatusCode::NOT_FOUND,
                    Error::SessionComplete(_) => StatusCode::CONFLICT,
                    Error::InvalidPoints(_) => StatusCode::UNPROCESSABLE_ENTITY,
                    Error::Domain(_) | Error::Config(_) => StatusCode::BAD_REQUEST,
                    _ => StatusCode::INTERNAL_SERVER_ERROR,
                };
                (status, json!({ "error": e.to_string() }))
            }
            ApiError::Body(r) => (r.status(), json!({ "error": r.body_text() })),
            ApiError::Internal(msg) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": msg })),
        };
        if let ApiError::Core(Error::InvalidPoints(errors)) = &self {
            body["errors"] = json!(errors);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Default, Deserialize)]
pub struct CreateRequest {
    pub group: Option<Group>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub phase: PhaseSpec,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub group: Group,
    pub phase: Option<PhaseSpec>,
    pub status: Status,
    pub completed_phases: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PointsRequest {
    pub points: [State; 2],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommitResponse {
    pub phase_complete: bool,
    pub next_phase: Option<PhaseSpec>,
    pub done: bool,
}

#[derive(Debug, Deserialize)]
pub struct StrideQuery {
    pub stride: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub angle: f64,
    pub velocity: f64,
    pub torque: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReferenceResponse {
    pub skill: SkillId,
    pub dt: f64,
    pub stride: usize,
    pub samples: Vec<Sample>,
}

async fn create(
    AxumState(app): AxumState<AppState>,
    body: Result<Option<Json<CreateRequest>>, JsonRejection>,
) -> ApiResult<CreateResponse> {
    let group = body?.and_then(|Json(b)| b.group);
    let session = app.store.create_session(group)?;
    Ok(Json(CreateResponse {
        phase: session.current_phase().expect("new sessions are active"),
        id: session.id,
    }))
}

async fn show(
    AxumState(app): AxumState<AppState>,
    Path(id): Path<String>,
) -> ApiResult<SessionView> {
    let s = app.store.get(&id)?;
    Ok(Json(SessionView {
        phase: s.current_phase(),
        status: s.status(),
        completed_phases: s.committed.len(),
        group: s.group,
        id: s.id,
    }))
}

async fn preview(
    AxumState(app): AxumState<AppState>,
    Path(id): Path<String>,
    req: Result<Json<PointsRequest>, JsonRejection>,
) -> ApiResult<crate::session::PreviewOutcome> {
    let Json(req) = req?;
    let points = ViaPointPair { points: req.points };
    Ok(Json(app.store.preview(&id, &points)?))
}

async fn commit(
    AxumState(app): AxumState<AppState>,
    Path(id): Path<String>,
    req: Result<Json<PointsRequest>, JsonRejection>,
) -> ApiResult<CommitResponse> {
    let Json(req) = req?;
    let points = ViaPointPair { points: req.points };
    let store = Arc::clone(&app.store);
    // A commit runs a 3 s rollout at 10 kHz; keep it off the async workers.
    let outcome = tokio::task::spawn_blocking(move || store.commit(&id, &points))
        .await
        .map_err(|e| ApiError::Internal(format!("commit task failed: {e}")))??;
    Ok(Json(CommitResponse {
        phase_complete: true,
        done: outcome.next_phase.is_none(),
        next_phase: outcome.next_phase,
    }))
}

async fn report(
    AxumState(app): AxumState<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    if !app.experimenter {
        return Ok((
            StatusCode::NOT_FOUND,
            Json(json!({ "error": "report endpoint disabled" })),
        )
            .into_response());
    }
    Ok(Json(app.store.report(&id)?).into_response())
}

async fn reference(
    AxumState(app): AxumState<AppState>,
    Path(skill): Path<String>,
    Query(q): Query<StrideQuery>,
) -> ApiResult<ReferenceResponse> {
    let id: SkillId = skill.parse()?;
    let stride = q.stride.unwrap_or(DEFAULT_STRIDE).max(1);
    let p: PendulumParams = app.store.config().pendulum;
    let traj = reference_trajectory(&id.spec(), &p)?;
    let samples = traj
        .states
        .iter()
        .enumerate()
        .step_by(stride)
        .map(|(i, s)| Sample {
            t: i as f64 * traj.dt,
            angle: s.angle,
            velocity: s.velocity,
            torque: traj
                .torques
                .get(i)
                .or(traj.torques.last())
                .copied()
                .unwrap_or(0.0),
        })
        .collect();
    Ok(Json(ReferenceResponse {
        skill: id,
        dt: traj.dt,
        stride,
        samples,
    }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}", get(show))
        .route("/api/sessions/{id}/preview", post(preview))
        .route("/api/sessions/{id}/commit", post(commit))
        .route("/api/sessions/{id}/report", get(report))
        .route("/api/skills/{id}/reference", get(reference))
        .with_state(state)
}
