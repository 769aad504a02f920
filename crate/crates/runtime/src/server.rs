//! Live session service.
//!
//! Each session owns a scene, a device and a tag database. Clients steer the
//! hand, press the button and deliver recordings over HTTP; everything the
//! device does is appended to the session log and pushed to WebSocket
//! subscribers as numbered messages.
//!
//! ```text
//! POST   /sessions                      {"setup": 1, "seed": 7} or {"scene": {...}}, optional "config"
//! GET    /sessions/{id}                 snapshot
//! DELETE /sessions/{id}
//! POST   /sessions/{id}/pose            {"x_mm": .., "y_mm": .., "facing_deg": ..}
//! POST   /sessions/{id}/button
//! POST   /sessions/{id}/recording       {"label": "red shirt"}  (only while recording)
//! POST   /sessions/{id}/tick            {"dt_ms": 500}
//! GET    /sessions/{id}/log             every message so far
//! GET    /sessions/{id}/events?since=N  WebSocket: messages with seq > N, then live
//! ```
//!
//! Stream messages are JSON objects with `seq`, `t_ms` and a `kind` of
//! `read` (the reader result for a pose), `event` (a device input) or
//! `action` (a device output), in the order the device produced them.
//!
//! A pose that keeps the same tag in the field does not read it again; the
//! hand has to move off the tag first.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rfglove_core::device::{Device, DeviceAction, DeviceConfig, DeviceEvent, DeviceState, Mode, StepError};
use rfglove_core::rfmodel::{self, HandPose, ReadResult, RfParams};
use rfglove_core::scene::{build_setup, Scene};
use rfglove_core::tagdb::{Binding, TagDatabase, TagUid};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, Mutex, RwLock};

const STREAM_CAPACITY: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamMessage {
    pub seq: u64,
    pub t_ms: u64,
    #[serde(flatten)]
    pub body: StreamBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamBody {
    Read { read: ReadResult },
    Event { event: DeviceEvent },
    Action { action: DeviceAction },
}

struct Session {
    id: String,
    scene: Scene,
    device: Device,
    db: TagDatabase,
    rf: RfParams,
    pose: Option<HandPose>,
    in_field: Option<TagUid>,
    log: Vec<StreamMessage>,
    tx: broadcast::Sender<StreamMessage>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: String,
    pub clock_ms: u64,
    pub state: DeviceState,
    pub pose: Option<HandPose>,
    pub in_field: Option<TagUid>,
    pub last_seq: u64,
    pub scene: Scene,
    pub bindings: Vec<BindingView>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BindingView {
    pub uid: TagUid,
    pub label: String,
    pub clip_id: String,
    pub duration_ms: u32,
}

impl From<Binding> for BindingView {
    fn from(b: Binding) -> Self {
        Self {
            uid: b.uid,
            label: b.clip.label,
            clip_id: b.clip.clip_id.to_string(),
            duration_ms: b.clip.duration_ms,
        }
    }
}

/// What a command produced.
#[derive(Debug, Serialize, Deserialize)]
pub struct CommandReply {
    pub messages: Vec<StreamMessage>,
    pub state: DeviceState,
    pub clock_ms: u64,
}

impl Session {
    fn publish(&mut self, body: StreamBody, out: &mut Vec<StreamMessage>) {
        let msg = StreamMessage {
            seq: self.log.len() as u64 + 1,
            t_ms: self.device.clock_ms,
            body,
        };
        self.log.push(msg.clone());
        // No subscribers is fine; the log keeps everything.
        let _ = self.tx.send(msg.clone());
        out.push(msg);
    }

    fn feed(&mut self, event: DeviceEvent, out: &mut Vec<StreamMessage>) -> Result<(), ApiError> {
        let result = self.device.handle(event.clone(), &mut self.db);
        let actions = match result {
            Ok(entry) => entry.actions,
            Err(StepError::InvalidEvent(m)) => return Err(ApiError::BadRequest(m.into())),
            Err(StepError::Storage { actions, source, .. }) => {
                self.publish(StreamBody::Event { event }, out);
                for action in actions {
                    self.publish(StreamBody::Action { action }, out);
                }
                return Err(ApiError::Internal(format!("storage failure: {source}")));
            }
            Err(e) => return Err(ApiError::Internal(e.to_string())),
        };
        self.publish(StreamBody::Event { event }, out);
        for action in actions {
            self.publish(StreamBody::Action { action }, out);
        }
        Ok(())
    }

    fn reply(&self, messages: Vec<StreamMessage>) -> CommandReply {
        CommandReply {
            messages,
            state: self.device.state.clone(),
            clock_ms: self.device.clock_ms,
        }
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            session_id: self.id.clone(),
            clock_ms: self.device.clock_ms,
            state: self.device.state.clone(),
            pose: self.pose,
            in_field: self.in_field,
            last_seq: self.log.len() as u64,
            scene: self.scene.clone(),
            bindings: self.db.bindings().into_iter().map(BindingView::from).collect(),
        }
    }

    fn pose(&mut self, pose: HandPose) -> Result<CommandReply, ApiError> {
        let mut out = Vec::new();
        self.pose = Some(pose);
        let read = rfmodel::scan(&pose, &self.scene.tag_placements(), &self.rf);
        let seen = read.map(|r| r.uid);
        let fresh = seen.is_some() && seen != self.in_field;
        self.in_field = seen;
        if let Some(r) = read.filter(|_| fresh) {
            self.publish(StreamBody::Read { read: r }, &mut out);
            self.feed(
                DeviceEvent::TagRead {
                    uid: r.uid,
                    latency_ms: r.latency_ms.round() as u32,
                },
                &mut out,
            )?;
        }
        Ok(self.reply(out))
    }

    /// Delivers the recorded message and lets the recording window run out,
    /// which stores the clip.
    fn record(&mut self, label: String) -> Result<CommandReply, ApiError> {
        let Mode::Recording { elapsed_ms, .. } = self.device.state.mode else {
            return Err(ApiError::Conflict("device is not recording".into()));
        };
        let remaining = self.device.cfg.record_duration_ms.saturating_sub(elapsed_ms).max(1);
        let mut out = Vec::new();
        self.feed(DeviceEvent::label(label), &mut out)?;
        self.feed(DeviceEvent::tick(remaining), &mut out)?;
        Ok(self.reply(out))
    }
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    Conflict(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

async fn session(state: &AppState, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
    state
        .sessions
        .read()
        .await
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    scene: Option<Scene>,
    setup: Option<u8>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    config: DeviceConfig,
}

async fn create(State(app): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<Snapshot>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let scene = match (req.scene, req.setup) {
        (Some(scene), None) => {
            scene.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
            scene
        }
        (None, Some(n)) => build_setup(n, req.seed).map_err(|e| ApiError::BadRequest(e.to_string()))?,
        _ => return Err(ApiError::BadRequest("give exactly one of \"scene\" or \"setup\"".into())),
    };
    let device = Device::new(req.config).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let (tx, _) = broadcast::channel(STREAM_CAPACITY);
    let session = Session {
        id: id.clone(),
        scene,
        device,
        db: TagDatabase::new(),
        rf: RfParams::default(),
        pose: None,
        in_field: None,
        log: Vec::new(),
        tx,
    };
    let snap = session.snapshot();
    app.sessions.write().await.insert(id.clone(), Arc::new(Mutex::new(session)));
    tracing::info!(session = %id, "session created");
    Ok((StatusCode::CREATED, Json(snap)))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Snapshot>, ApiError> {
    let s = session(&app, &id).await?;
    let snap = s.lock().await.snapshot();
    Ok(Json(snap))
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match app.sessions.write().await.remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::NotFound(format!("no session {id}"))),
    }
}

async fn get_log(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<Vec<StreamMessage>>, ApiError> {
    let s = session(&app, &id).await?;
    let log = s.lock().await.log.clone();
    Ok(Json(log))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseBody {
    x_mm: f64,
    y_mm: f64,
    facing_deg: f64,
}

async fn post_pose(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<CommandReply>, ApiError> {
    let s = session(&app, &id).await?;
    let p: PoseBody = parse_body(&body)?;
    if ![p.x_mm, p.y_mm, p.facing_deg].iter().all(|v| v.is_finite()) {
        return Err(ApiError::BadRequest("pose values must be finite".into()));
    }
    let reply = s.lock().await.pose(HandPose::new(p.x_mm, p.y_mm, p.facing_deg))?;
    Ok(Json(reply))
}

async fn post_button(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<CommandReply>, ApiError> {
    let s = session(&app, &id).await?;
    let mut s = s.lock().await;
    let mut out = Vec::new();
    s.feed(DeviceEvent::ButtonDown, &mut out)?;
    Ok(Json(s.reply(out)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordingBody {
    label: String,
}

async fn post_recording(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<CommandReply>, ApiError> {
    let s = session(&app, &id).await?;
    let r: RecordingBody = parse_body(&body)?;
    if r.label.contains(['\t', '\n', '\r']) {
        return Err(ApiError::BadRequest("labels cannot contain tabs or line breaks".into()));
    }
    let reply = s.lock().await.record(r.label)?;
    Ok(Json(reply))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TickBody {
    dt_ms: u32,
}

async fn post_tick(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<CommandReply>, ApiError> {
    let s = session(&app, &id).await?;
    let t: TickBody = parse_body(&body)?;
    let mut s = s.lock().await;
    let mut out = Vec::new();
    s.feed(DeviceEvent::tick(t.dt_ms), &mut out)?;
    Ok(Json(s.reply(out)))
}

#[derive(Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: u64,
}

async fn events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let s = session(&app, &id).await?;
    Ok(ws.on_upgrade(move |socket| stream(socket, s, q.since)))
}

async fn send(socket: &mut WebSocket, msg: &StreamMessage) -> bool {
    let text = serde_json::to_string(msg).expect("stream messages serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Replays the log after `since`, then forwards live messages, never sending
/// a sequence number twice.
async fn stream(mut socket: WebSocket, session: Arc<Mutex<Session>>, since: u64) {
    let (mut rx, backlog) = {
        let s = session.lock().await;
        let backlog: Vec<StreamMessage> = s.log.iter().filter(|m| m.seq > since).cloned().collect();
        (s.tx.subscribe(), backlog)
    };
    let mut last = since;
    for msg in &backlog {
        if !send(&mut socket, msg).await {
            return;
        }
        last = msg.seq;
    }
    loop {
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                Some(Ok(_)) => {}
            },
            msg = rx.recv() => match msg {
                Ok(msg) if msg.seq > last => {
                    if !send(&mut socket, &msg).await {
                        return;
                    }
                    last = msg.seq;
                }
                Ok(_) => {}
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let missed: Vec<StreamMessage> = {
                        let s = session.lock().await;
                        s.log.iter().filter(|m| m.seq > last).cloned().collect()
                    };
                    for msg in &missed {
                        if !send(&mut socket, msg).await {
                            return;
                        }
                        last = msg.seq;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
        }
    }
}

pub fn router() -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/pose", post(post_pose))
        .route("/sessions/{id}/button", post(post_button))
        .route("/sessions/{id}/recording", post(post_recording))
        .route("/sessions/{id}/tick", post(post_tick))
        .with_state(Arc::new(AppState::default()))
}

pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}
