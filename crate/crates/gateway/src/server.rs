//! REST endpoints and websocket streams.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{Sink, SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use vishsim::adapters::VictimInput;
use vishsim::analytics::OutcomeReport;
use vishsim::campaign::{plan_campaign, CampaignSpec, Sampling};
use vishsim::domain::{CallRequest, EntryKind, Speaker};
use vishsim::events::WireEvent;
use vishsim::fleet::FleetError;
use vishsim::metering::CostReport;

use crate::runtime::{AttachError, CallStatus, Runtime};

#[derive(Clone)]
pub struct AppState {
    runtime: Runtime,
    next_campaign: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(runtime: Runtime) -> Self {
        Self {
            runtime,
            next_campaign: Arc::new(AtomicU64::new(1)),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/campaigns", post(create_campaign))
        .route("/campaigns/{id}/report", get(campaign_report))
        .route("/calls", post(create_call))
        .route("/calls/{id}", get(get_call))
        .route("/fleet", get(fleet_status))
        .route("/ws/calls/{id}", get(call_events))
        .route("/ws/victim/{id}", get(victim_session))
        .with_state(state)
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl From<FleetError> for ApiError {
    fn from(e: FleetError) -> Self {
        let status = match e {
            FleetError::DuplicateCall(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn bad_request(e: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, e.to_string())
}

fn not_found(what: &str, id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("unknown {what} {id}"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewCampaign {
    scenario_id: String,
    /// Omit to rotate through every malicious persona.
    #[serde(default)]
    persona_id: Option<String>,
    levels: Vec<u8>,
    per_level: usize,
    seed: u64,
    #[serde(default)]
    sampling: Sampling,
}

#[derive(Debug, Serialize)]
struct CampaignCreated {
    campaign_id: String,
    call_ids: Vec<String>,
}

async fn create_campaign(
    State(state): State<AppState>,
    body: Result<Json<NewCampaign>, JsonRejection>,
) -> Result<(StatusCode, Json<CampaignCreated>), ApiError> {
    let Json(body) = body?;
    let config = &state.runtime.config;
    if body.scenario_id != config.scenario.id {
        return Err(bad_request(format!(
            "scenario {:?} is not loaded (serving {:?})",
            body.scenario_id, config.scenario.id
        )));
    }
    if body.per_level == 0 {
        return Err(bad_request("per_level must be at least 1"));
    }
    let campaign_id = format!(
        "cmp-{:04}",
        state.next_campaign.fetch_add(1, Ordering::Relaxed)
    );
    let spec = CampaignSpec {
        id: campaign_id.clone(),
        levels: body.levels,
        per_level: body.per_level,
        seed: body.seed,
        personas: body.persona_id.into_iter().collect(),
        sampling: body.sampling,
    };
    let requests = plan_campaign(config, &spec).map_err(bad_request)?;
    let call_ids = requests.iter().map(|r| r.id.clone()).collect();
    state
        .runtime
        .submit(requests, Some(campaign_id.clone()), false)
        .await?;
    Ok((
        StatusCode::CREATED,
        Json(CampaignCreated {
            campaign_id,
            call_ids,
        }),
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewCall {
    request: CallRequest,
    /// The victim side is played by a client on `/ws/victim/{id}`.
    #[serde(default)]
    interactive: bool,
}

async fn create_call(
    State(state): State<AppState>,
    body: Result<Json<NewCall>, JsonRejection>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let Json(NewCall {
        request,
        interactive,
    }) = body?;
    let config = &state.runtime.config;
    request.validate().map_err(bad_request)?;
    if request.scenario_id != config.scenario.id {
        return Err(bad_request(format!(
            "scenario {:?} is not loaded",
            request.scenario_id
        )));
    }
    if config.scenario.persona(&request.persona_id).is_none() {
        return Err(bad_request(format!(
            "unknown persona {:?}",
            request.persona_id
        )));
    }
    let call_id = request.id.clone();
    state
        .runtime
        .submit(vec![request], None, interactive)
        .await?;
    Ok((StatusCode::CREATED, Json(json!({ "call_id": call_id }))))
}

async fn get_call(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let calls = state.runtime.store.calls();
    let entry = calls.get(&id).ok_or_else(|| not_found("call", &id))?;
    Ok(match &entry.record {
        Some(record) => Json(record).into_response(),
        None => (
            StatusCode::ACCEPTED,
            Json(json!({ "call_id": id, "status": entry.status })),
        )
            .into_response(),
    })
}

#[derive(Debug, Serialize)]
struct CampaignReport {
    campaign_id: String,
    calls: usize,
    completed: usize,
    costs: CostReport,
    /// Absent until at least one call has finished.
    outcomes: Option<OutcomeReport>,
}

async fn campaign_report(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<CampaignReport>, ApiError> {
    let (calls, records) = state
        .runtime
        .store
        .campaign_records(&id)
        .ok_or_else(|| not_found("campaign", &id))?;
    let config = &state.runtime.config;
    Ok(Json(CampaignReport {
        campaign_id: id,
        calls,
        completed: records.len(),
        costs: CostReport::build(&records, &config.scenario, &config.pricing),
        outcomes: OutcomeReport::build(&records, &config.scenario).ok(),
    }))
}

async fn fleet_status(State(state): State<AppState>) -> Json<crate::runtime::FleetStatus> {
    Json(state.runtime.status().await)
}

async fn call_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    if !state.runtime.store.contains(&id) {
        return Err(not_found("call", &id));
    }
    Ok(ws.on_upgrade(move |socket| stream_events(state, id, socket, |_| true)))
}

/// Sends the call's events from the beginning, then live, and closes once the
/// record is in.
async fn stream_events<S>(state: AppState, id: String, mut socket: S, keep: fn(&WireEvent) -> bool)
where
    S: Sink<Message> + Unpin,
{
    let Some(mut changed) = state
        .runtime
        .store
        .calls()
        .get(&id)
        .map(|e| e.changed.subscribe())
    else {
        return;
    };
    let mut sent = 0;
    loop {
        changed.borrow_and_update();
        let (batch, done) = {
            let calls = state.runtime.store.calls();
            let Some(entry) = calls.get(&id) else { return };
            (
                entry.events[sent..].to_vec(),
                entry.status == CallStatus::Done,
            )
        };
        sent += batch.len();
        for event in batch.iter().filter(|e| keep(e)) {
            if socket
                .send(Message::Text(event.to_json().into()))
                .await
                .is_err()
            {
                return;
            }
        }
        if done {
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
        if changed.changed().await.is_err() {
            return;
        }
    }
}

fn victim_view(e: &WireEvent) -> bool {
    matches!(
        e,
        WireEvent::Transcript {
            speaker: Speaker::Bot,
            kind: EntryKind::Utterance,
            ..
        } | WireEvent::Outcome { .. }
    )
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum VictimFrame {
    Utterance { text: String },
    Hangup,
}

async fn victim_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let input = match state.runtime.store.attach_victim(&id) {
        Ok(tx) => tx,
        Err(AttachError::Unknown) => return Err(not_found("call", &id)),
        Err(AttachError::NotInteractive) => {
            return Err(ApiError(
                StatusCode::CONFLICT,
                format!("call {id} is not interactive"),
            ))
        }
        Err(AttachError::AlreadyAttached) => {
            return Err(ApiError(
                StatusCode::CONFLICT,
                format!("call {id} already has a victim"),
            ))
        }
    };
    Ok(ws.on_upgrade(move |socket| async move {
        let (outgoing, mut incoming) = socket.split();
        let forward = tokio::spawn(stream_events(state, id, outgoing, victim_view));
        while let Some(Ok(message)) = incoming.next().await {
            let text = match message {
                Message::Text(t) => t,
                Message::Close(_) => break,
                _ => continue,
            };
            let sent = match serde_json::from_str::<VictimFrame>(&text) {
                Ok(VictimFrame::Utterance { text }) => input.send(VictimInput::Utterance(text)),
                Ok(VictimFrame::Hangup) => input.send(VictimInput::Hangup),
                Err(_) => continue,
            };
            if sent.is_err() {
                break;
            }
        }
        let _ = input.send(VictimInput::Hangup);
        let _ = forward.await;
    }))
}
