//! TCP front end. Each connection gets a writer task fed by a channel, so
//! responses and frames from many sessions share one ordered stream.

use std::future::Future;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use lab_core::schema;
use serde_json::{json, Value};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;

use crate::protocol::{parse_request, read_message, write_message, ErrorBody, FramingError, Outgoing, Request};
use crate::session::{Command, SessionManager, Sink};

pub struct Server {
    manager: Arc<SessionManager>,
    connections: AtomicU64,
}

impl Server {
    pub fn new(manager: Arc<SessionManager>) -> Arc<Self> {
        Arc::new(Server {
            manager,
            connections: AtomicU64::new(0),
        })
    }

    pub fn manager(&self) -> &Arc<SessionManager> {
        &self.manager
    }

    /// Accepts connections until `shutdown` resolves, then closes every
    /// session.
    pub async fn serve(self: Arc<Self>, listener: TcpListener, shutdown: impl Future<Output = ()>) {
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                accepted = listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        let conn = self.connections.fetch_add(1, Ordering::Relaxed);
                        log::debug!("connection {conn} from {peer}");
                        tokio::spawn(self.clone().connection(stream, conn));
                    }
                    Err(e) => log::warn!("accept failed: {e}"),
                },
                _ = &mut shutdown => break,
            }
        }
        let manager = self.manager.clone();
        let _ = tokio::task::spawn_blocking(move || manager.shutdown()).await;
    }

    async fn connection(self: Arc<Self>, stream: TcpStream, conn: u64) {
        let _ = stream.set_nodelay(true);
        let (mut reader, mut writer) = stream.into_split();
        let (tx, mut rx) = mpsc::unbounded_channel::<Outgoing>();
        let writer_task = tokio::spawn(async move {
            while let Some(msg) = rx.recv().await {
                if let Err(e) = write_message(&mut writer, &msg.to_json()).await {
                    log::debug!("connection {conn}: write failed: {e}");
                    break;
                }
            }
        });

        loop {
            match read_message(&mut reader).await {
                Ok(Some(msg)) => self.dispatch(conn, &msg, &tx),
                Ok(None) => break,
                Err(FramingError::Json(e)) => {
                    let _ = tx.send(Outgoing::Error {
                        id: None,
                        error: ErrorBody::new("bad_request", format!("malformed JSON: {e}")),
                    });
                }
                Err(e) => {
                    let _ = tx.send(Outgoing::Error {
                        id: None,
                        error: ErrorBody::new("bad_request", e.to_string()),
                    });
                    break;
                }
            }
        }
        self.manager.disconnect(conn);
        drop(tx);
        let _ = writer_task.await;
        log::debug!("connection {conn} closed");
    }

    fn dispatch(&self, conn: u64, msg: &Value, tx: &Sink) {
        let (id, request) = parse_request(msg);
        let respond = |r: Result<Value, ErrorBody>| {
            let _ = tx.send(match r {
                Ok(result) => Outgoing::Response { id, result },
                Err(error) => Outgoing::Error { id, error },
            });
        };
        let request = match request {
            Ok(r) => r,
            Err(e) => return respond(Err(e)),
        };
        let m = &self.manager;
        let pending = match request {
            Request::Create {
                experiment,
                params,
                seed,
            } => return respond(m.create(&experiment, &params, seed)),
            Request::Health => return respond(Ok(m.health())),
            Request::Schema { experiment } => return respond(schema_listing(experiment.as_deref())),
            Request::Subscribe { session, after_step } => {
                let sent = m.send(
                    &session,
                    Command::Subscribe {
                        conn,
                        id,
                        after_step,
                        sink: tx.clone(),
                    },
                );
                if let Err(e) = sent {
                    respond(Err(e));
                }
                return;
            }
            Request::Close { session } => match m.close(&session) {
                Ok((rx, thread)) => {
                    let tx = tx.clone();
                    tokio::spawn(async move {
                        let r = rx
                            .await
                            .unwrap_or_else(|_| Err(ErrorBody::new("session_closed", "worker already stopped")));
                        let _ = tokio::task::spawn_blocking(move || thread.join()).await;
                        let _ = tx.send(match r {
                            Ok(result) => Outgoing::Response { id, result },
                            Err(error) => Outgoing::Error { id, error },
                        });
                    });
                    return;
                }
                Err(e) => return respond(Err(e)),
            },
            Request::Patch { session, patch } => m.request(&session, |r| Command::Patch(patch, r)),
            Request::Run { session, cadence } => m.request(&session, |r| Command::Run(cadence, r)),
            Request::Pause { session } => m.request(&session, Command::Pause),
            Request::Step { session, n, cadence } => m.request(&session, |r| Command::Step(n, cadence, r)),
            Request::Unsubscribe { session } => m.request(&session, |r| Command::Unsubscribe(conn, r)),
            Request::Status { session } => m.request(&session, Command::Status),
        };
        match pending {
            Err(e) => respond(Err(e)),
            Ok(rx) => {
                let tx = tx.clone();
                tokio::spawn(async move {
                    let r = rx
                        .await
                        .unwrap_or_else(|_| Err(ErrorBody::new("session_closed", "session closed")));
                    let _ = tx.send(match r {
                        Ok(result) => Outgoing::Response { id, result },
                        Err(error) => Outgoing::Error { id, error },
                    });
                });
            }
        }
    }
}

fn schema_listing(experiment: Option<&str>) -> Result<Value, ErrorBody> {
    match experiment {
        Some(name) => Ok(json!({ "experiments": [schema::lookup(name)?] })),
        None => Ok(json!({ "experiments": schema::registry() })),
    }
}
