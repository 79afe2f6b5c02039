//! `GET /stream`: the websocket the viewer consumes.

use std::future::Future;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use crate::hub::Hub;
use crate::live::Controller;
use crate::patch::PatchError;
use crate::protocol::{ClientMessage, ServerMessage};

pub const STREAM_PATH: &str = "/stream";

#[derive(Clone)]
pub struct AppState {
    pub hub: Arc<Hub>,
    /// `None` during replay: patches are answered with an error ack.
    pub control: Option<Controller>,
}

pub fn router(state: AppState) -> Router {
    Router::new().route(STREAM_PATH, get(stream)).with_state(state)
}

pub async fn serve(listener: TcpListener, state: AppState, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn stream(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| consumer(socket, state))
}

fn text(msg: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(msg).expect("server messages serialize"))
}

async fn handle_client_text(raw: &str, control: Option<Controller>) -> ServerMessage {
    let nack = |request_id, error: String| ServerMessage::Ack { request_id, ok: false, error: Some(error), config: None };
    let msg: ClientMessage = match serde_json::from_str(raw) {
        Ok(m) => m,
        Err(e) => return nack(None, format!("unreadable message: {e}")),
    };
    let ClientMessage::ConfigPatch { request_id, patch } = msg;
    let Some(control) = control else {
        return nack(request_id, "this session does not accept config patches".into());
    };
    // waits for the next cycle boundary, which may take a while
    let result = tokio::task::spawn_blocking(move || control.apply_patch(patch))
        .await
        .unwrap_or(Err(PatchError::SessionClosed));
    match result {
        Ok(config) => ServerMessage::Ack { request_id, ok: true, error: None, config: Some(config) },
        Err(e) => nack(request_id, e.to_string()),
    }
}

async fn consumer(socket: WebSocket, state: AppState) {
    let sub = state.hub.subscribe();
    let (mut sink, mut incoming) = socket.split();
    let (ack_tx, mut ack_rx) = mpsc::unbounded_channel::<ServerMessage>();

    let control = state.control.clone();
    let mut reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = incoming.next().await {
            match msg {
                Message::Text(raw) => {
                    let tx = ack_tx.clone();
                    let control = control.clone();
                    tokio::spawn(async move {
                        let _ = tx.send(handle_client_text(&raw, control).await);
                    });
                }
                Message::Close(_) => break,
                _ => {}
            }
        }
    });

    loop {
        tokio::select! {
            ev = sub.recv() => {
                let Some(ev) = ev else { break };
                let (json, frames) = ev.to_wire();
                if sink.send(text(&json)).await.is_err() {
                    break;
                }
                let mut ok = true;
                for f in frames {
                    if sink.send(Message::Binary(f.encode())).await.is_err() {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    break;
                }
            }
            Some(ack) = ack_rx.recv() => {
                if sink.send(text(&ack)).await.is_err() {
                    break;
                }
            }
            _ = &mut reader => break,
        }
    }
    let _ = sink.send(Message::Close(None)).await;
    reader.abort();
}
