// Copyright 2026 The altgrasp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! WebSocket host for a [`Session`].
//!
//! One task owns the session and the client table. Socket tasks only parse
//! incoming text and forward it as events; everything they receive back is
//! already serialized.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Serialize;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tokio::time::MissedTickBehavior;

use crate::protocol::{
    error_envelope, ClientMessage, Envelope, ModelDescriptionPayload, Role, RolePayload,
};
use crate::session::Session;

/// Outbound queue depth per client. A client that falls this far behind
/// is disconnected.
const CLIENT_QUEUE: usize = 256;

type ClientId = u64;

#[derive(Debug)]
enum Event {
    Connected {
        id: ClientId,
        outbox: mpsc::Sender<String>,
    },
    Disconnected {
        id: ClientId,
    },
    Message {
        id: ClientId,
        seq: u64,
        message: ClientMessage,
    },
}

#[derive(Clone)]
struct AppState {
    events: mpsc::UnboundedSender<Event>,
    tick: watch::Receiver<u64>,
    next_id: Arc<AtomicU64>,
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    tick: u64,
}

/// Serves `/session` and `/health` on `listener` until the listener fails.
/// The session advances every `tick_period`.
pub async fn serve(
    listener: TcpListener,
    session: Session,
    tick_period: Duration,
) -> std::io::Result<()> {
    let (events_tx, events_rx) = mpsc::unbounded_channel();
    let (tick_tx, tick_rx) = watch::channel(session.tick_count());
    tokio::spawn(run_loop(session, events_rx, tick_tx, tick_period));
    let state = AppState {
        events: events_tx,
        tick: tick_rx,
        next_id: Arc::new(AtomicU64::new(1)),
    };
    let app = Router::new()
        .route("/session", get(session_upgrade))
        .route("/health", get(health))
        .with_state(state);
    axum::serve(listener, app).await
}

async fn health(State(state): State<AppState>) -> impl IntoResponse {
    Json(Health {
        status: "ok",
        tick: *state.tick.borrow(),
    })
}

async fn session_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_task(socket, state))
}

async fn client_task(socket: WebSocket, state: AppState) {
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let (outbox, mut inbox) = mpsc::channel::<String>(CLIENT_QUEUE);
    if state
        .events
        .send(Event::Connected {
            id,
            outbox: outbox.clone(),
        })
        .is_err()
    {
        return;
    }
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(text) = inbox.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(text) => text,
            Message::Close(_) => break,
            Message::Binary(_) => {
                let reply = error_envelope(None, "binary frames are not supported");
                let _ = outbox.try_send(reply.to_text());
                continue;
            }
            _ => continue,
        };
        match validate(text.as_str()) {
            Ok((seq, message)) => {
                if state
                    .events
                    .send(Event::Message { id, seq, message })
                    .is_err()
                {
                    break;
                }
            }
            Err(reply) => {
                let _ = outbox.try_send(reply.to_text());
            }
        }
    }
    let _ = state.events.send(Event::Disconnected { id });
    drop(outbox);
    writer.abort();
}

fn validate(text: &str) -> Result<(u64, ClientMessage), Envelope> {
    let envelope: Envelope = serde_json::from_str(text)
        .map_err(|e| error_envelope(None, format!("malformed message: {e}")))?;
    let message = ClientMessage::from_envelope(&envelope)
        .map_err(|e| error_envelope(Some(envelope.seq), e.to_string()))?;
    Ok((envelope.seq, message))
}

struct Client {
    outbox: mpsc::Sender<String>,
}

/// Role bookkeeping and fan-out, separate from the session itself.
#[derive(Default)]
struct Clients {
    clients: BTreeMap<ClientId, Client>,
    operator: Option<ClientId>,
}

impl Clients {
    fn send(&mut self, id: ClientId, text: String) {
        if let Some(client) = self.clients.get(&id) {
            if client.outbox.try_send(text).is_err() {
                self.remove(id);
            }
        }
    }

    fn send_role(&mut self, id: ClientId) {
        let role = if self.operator == Some(id) {
            Role::Operator
        } else {
            Role::Observer
        };
        self.send(id, Envelope::new("role", 0, RolePayload { role }).to_text());
    }

    fn remove(&mut self, id: ClientId) {
        self.clients.remove(&id);
        if self.operator == Some(id) {
            self.operator = None;
        }
    }

    fn broadcast(&mut self, text: &str) {
        let stale: Vec<ClientId> = self
            .clients
            .iter()
            .filter(|(_, c)| c.outbox.try_send(text.to_string()).is_err())
            .map(|(id, _)| *id)
            .collect();
        for id in stale {
            tracing::warn!(client = id, "dropping client with a full outbound queue");
            self.remove(id);
        }
    }
}

async fn run_loop(
    mut session: Session,
    mut events: mpsc::UnboundedReceiver<Event>,
    tick_tx: watch::Sender<u64>,
    period: Duration,
) {
    let mut clients = Clients::default();
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let model_description = Envelope::new(
        "model_description",
        0,
        ModelDescriptionPayload {
            model: session.model().clone(),
            libraries: session.libraries().to_vec(),
        },
    )
    .to_text();

    loop {
        interval.tick().await;
        let mut pending: Vec<(ClientId, u64, ClientMessage)> = Vec::new();
        loop {
            match events.try_recv() {
                Ok(Event::Connected { id, outbox }) => {
                    tracing::debug!(client = id, "connected");
                    clients.clients.insert(id, Client { outbox });
                    if clients.operator.is_none() {
                        clients.operator = Some(id);
                    }
                    clients.send_role(id);
                }
                Ok(Event::Disconnected { id }) => {
                    tracing::debug!(client = id, "disconnected");
                    clients.remove(id);
                }
                Ok(Event::Message { id, seq, message }) => match message {
                    ClientMessage::ModelDescription => clients.send(id, model_description.clone()),
                    ClientMessage::ClaimOperator => {
                        if clients.operator.is_none() || clients.operator == Some(id) {
                            clients.operator = Some(id);
                            clients.send_role(id);
                        } else {
                            let reply = error_envelope(Some(seq), "operator role is taken");
                            clients.send(id, reply.to_text());
                        }
                    }
                    message if clients.operator != Some(id) => {
                        let reply = error_envelope(
                            Some(seq),
                            format!("{} requires the operator role", message.kind()),
                        );
                        clients.send(id, reply.to_text());
                    }
                    message => pending.push((id, seq, message)),
                },
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }

        let messages: Vec<ClientMessage> = pending.iter().map(|(_, _, m)| m.clone()).collect();
        let output = session.tick(&messages);
        for (index, error) in output.errors {
            let (id, seq, _) = pending[index];
            clients.send(id, error_envelope(Some(seq), error.to_string()).to_text());
        }
        clients.broadcast(&output.snapshot.to_envelope().to_text());
        let _ = tick_tx.send(output.snapshot.tick);
    }
}
