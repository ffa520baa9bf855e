//! Admin API under `/api`, the WebSocket endpoint at `/ws`, and the
//! static board UI under `/app`.

use std::path::PathBuf;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{future, SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use super::hub::Hub;
use super::ServerError;
use crate::ids::{UserId, WorkspaceId};
use crate::sync::protocol::{decode, encode, ProtocolError, ServerMessage};
use crate::workspace::to_canonical_json;

pub fn router(hub: Hub, static_dir: PathBuf) -> Router {
    Router::new()
        .route("/api/healthz", get(healthz))
        .route("/api/workspaces", get(list_workspaces))
        .route("/api/workspaces/{id}", post(create_workspace))
        .route("/api/workspaces/{id}/state", get(workspace_state))
        .route("/api/workspaces/{id}/snapshots", get(list_snapshots).post(save_snapshot))
        .route("/api/workspaces/{id}/snapshots/{name}/load", post(load_snapshot))
        .route("/ws", get(websocket))
        .route("/", get(|| async { Redirect::temporary("/app/") }))
        .nest_service("/app", ServeDir::new(static_dir).append_index_html_on_directories(true))
        .with_state(hub)
}

impl ServerError {
    fn status(&self) -> StatusCode {
        use crate::snapshot::SnapshotError as S;
        match self {
            ServerError::UnknownWorkspace(_) => StatusCode::NOT_FOUND,
            ServerError::Snapshot(S::UnknownSnapshot(_)) => StatusCode::NOT_FOUND,
            ServerError::Snapshot(S::NameExists(_)) => StatusCode::CONFLICT,
            ServerError::Snapshot(S::BadName(_)) | ServerError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServerError::Snapshot(S::CorruptSnapshot { .. }) | ServerError::Restore(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServerError {
    fn into_response(self) -> Response {
        let body = json!({"code": self.code(), "detail": self.to_string()});
        (self.status(), Json(body)).into_response()
    }
}

async fn healthz() -> &'static str {
    "ok"
}

async fn list_workspaces(State(hub): State<Hub>) -> impl IntoResponse {
    let list: Vec<_> = hub
        .list()
        .await
        .into_iter()
        .map(|w| json!({"id": w.id, "revision": w.revision, "sessions": w.sessions}))
        .collect();
    Json(list)
}

async fn create_workspace(State(hub): State<Hub>, Path(id): Path<String>) -> Result<Response, ServerError> {
    if id.trim().is_empty() {
        return Err(ServerError::BadRequest("workspace id is empty".into()));
    }
    let (handle, created) = hub.create(&WorkspaceId::new(id));
    let info = handle.info().await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(json!({"id": info.id, "revision": info.revision}))).into_response())
}

fn existing(hub: &Hub, id: &str) -> Result<crate::server::WorkspaceHandle, ServerError> {
    hub.get(&WorkspaceId::new(id))
        .ok_or_else(|| ServerError::UnknownWorkspace(id.to_string()))
}

async fn workspace_state(State(hub): State<Hub>, Path(id): Path<String>) -> Result<Response, ServerError> {
    let state = existing(&hub, &id)?.state().await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], to_canonical_json(&state)).into_response())
}

async fn list_snapshots(State(hub): State<Hub>, Path(id): Path<String>) -> Result<Response, ServerError> {
    existing(&hub, &id)?;
    let list = hub.store().list(&WorkspaceId::new(id))?;
    Ok(Json(list).into_response())
}

#[derive(Deserialize)]
struct SaveBody {
    name: String,
    #[serde(default)]
    overwrite: bool,
}

async fn save_snapshot(
    State(hub): State<Hub>,
    Path(id): Path<String>,
    Json(body): Json<SaveBody>,
) -> Result<Response, ServerError> {
    let meta = existing(&hub, &id)?.save_snapshot(&body.name, body.overwrite).await?;
    Ok((StatusCode::CREATED, Json(meta)).into_response())
}

async fn load_snapshot(State(hub): State<Hub>, Path((id, name)): Path<(String, String)>) -> Result<Response, ServerError> {
    let revision = existing(&hub, &id)?.load_snapshot(&name).await?;
    Ok(Json(json!({"revision": revision})).into_response())
}

#[derive(Deserialize)]
struct WsQuery {
    ws: Option<String>,
    user: Option<String>,
}

async fn websocket(State(hub): State<Hub>, Query(q): Query<WsQuery>, upgrade: WebSocketUpgrade) -> Response {
    let preset = match (q.ws, q.user) {
        (Some(ws), Some(user)) if !ws.is_empty() && !user.is_empty() => {
            Some((WorkspaceId::new(ws), UserId::new(user)))
        }
        _ => None,
    };
    upgrade.on_upgrade(move |socket| serve_socket(hub, preset, socket))
}

async fn serve_socket(hub: Hub, preset: Option<(WorkspaceId, UserId)>, socket: WebSocket) {
    let (sink, stream) = socket.split();
    let sink = sink.with(|msg: ServerMessage| future::ready(Ok::<_, axum::Error>(Message::Text(encode(&msg).into()))));
    let stream = stream
        .take_while(|frame| future::ready(matches!(frame, Ok(m) if !matches!(m, Message::Close(_)))))
        .filter_map(|frame| {
            future::ready(match frame {
                Ok(Message::Text(text)) => Some(decode(text.as_str())),
                Ok(Message::Binary(bytes)) => Some(
                    std::str::from_utf8(&bytes)
                        .map_err(|_| ProtocolError::NotText)
                        .and_then(decode),
                ),
                _ => None,
            })
        });
    hub.serve(preset, Box::pin(stream), Box::pin(sink)).await
}
