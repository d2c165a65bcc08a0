//! Sessions: one worker thread per running experiment.
//!
//! The worker owns the simulation outright. Everything else talks to it
//! through a command queue that is drained between steps, so a parameter
//! patch can never land in the middle of a step.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, AtomicU8, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use lab_core::schema::{self, ExperimentSchema, Params};
use serde_json::{json, Map, Value};
use tokio::sync::{mpsc as tmpsc, oneshot};

use crate::config::ServerConfig;
use crate::protocol::{Cadence, ErrorBody, Frame, Outgoing};
use crate::sim::{self, Simulation};

pub type Reply = oneshot::Sender<Result<Value, ErrorBody>>;
pub type Sink = tmpsc::UnboundedSender<Outgoing>;
pub type Pending = oneshot::Receiver<Result<Value, ErrorBody>>;

/// Longest stretch of stepping between looks at the command queue.
const SLICE: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Paused = 0,
    Running = 1,
    Failed = 2,
    Closed = 3,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Paused => "paused",
            Status::Running => "running",
            Status::Failed => "failed",
            Status::Closed => "closed",
        }
    }

    fn from_u8(v: u8) -> Status {
        match v {
            1 => Status::Running,
            2 => Status::Failed,
            3 => Status::Closed,
            _ => Status::Paused,
        }
    }
}

pub enum Command {
    Patch(Map<String, Value>, Reply),
    Run(Option<Cadence>, Reply),
    Pause(Reply),
    Step(u64, Option<Cadence>, Reply),
    Subscribe {
        conn: u64,
        id: Option<u64>,
        after_step: Option<u64>,
        sink: Sink,
    },
    Unsubscribe(u64, Reply),
    Status(Reply),
    Close(Reply),
}

struct Handle {
    experiment: String,
    tx: mpsc::Sender<Command>,
    status: Arc<AtomicU8>,
    thread: JoinHandle<()>,
}

/// Counts worker threads still alive; decremented when a worker exits.
struct LiveGuard(Arc<AtomicUsize>);

impl Drop for LiveGuard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

pub struct SessionManager {
    config: ServerConfig,
    sessions: Mutex<HashMap<String, Handle>>,
    counter: AtomicU64,
    id_base: u64,
    live_workers: Arc<AtomicUsize>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn not_found(session: &str) -> ErrorBody {
    ErrorBody::new("unknown_session", format!("no session `{session}`")).with("session", session)
}

impl SessionManager {
    pub fn new(config: ServerConfig) -> Self {
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        SessionManager {
            config,
            sessions: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
            id_base: splitmix(nanos ^ std::process::id() as u64),
            live_workers: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn create(&self, experiment: &str, raw: &Map<String, Value>, seed: u64) -> Result<Value, ErrorBody> {
        let schema = schema::lookup(experiment)?;
        let params = schema.validate(raw)?;
        let mut sessions = self.sessions.lock().expect("session table");
        if sessions.len() >= self.config.max_sessions {
            return Err(ErrorBody::new(
                "capacity",
                format!("{} sessions open; try again later", sessions.len()),
            )
            .with("retry_after_ms", self.config.retry_after_ms));
        }
        let sim = sim::build(&params, seed, self.config.tile_batch)
            .map_err(|m| ErrorBody::new("invalid_params", m).with("experiment", experiment))?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let id = format!("{:016x}", splitmix(self.id_base.wrapping_add(n)));

        let (tx, rx) = mpsc::channel();
        let status = Arc::new(AtomicU8::new(Status::Paused as u8));
        let created = json!({
            "session": id,
            "experiment": experiment,
            "status": "paused",
            "step": 0,
            "param_epoch": 0,
            "params": params.to_json(),
        });
        let worker = Worker {
            id: id.clone(),
            schema,
            params,
            sim,
            step: 0,
            epoch: 0,
            cadence: Cadence {
                steps: self.config.cadence_steps,
                ms: self.config.cadence_ms,
            },
            pending: 0,
            last_emit: Instant::now(),
            running: false,
            stepping: None,
            failure: None,
            replay: VecDeque::new(),
            replay_cap: self.config.replay_frames,
            evicted_through: None,
            subscribers: HashMap::new(),
            status: status.clone(),
        };
        self.live_workers.fetch_add(1, Ordering::SeqCst);
        let guard = LiveGuard(self.live_workers.clone());
        let thread = std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || {
                let _guard = guard;
                worker.run(rx);
            })
            .map_err(|e| ErrorBody::new("internal", e.to_string()))?;
        sessions.insert(
            id.clone(),
            Handle {
                experiment: experiment.to_string(),
                tx,
                status,
                thread,
            },
        );
        log::debug!("created session {id} ({experiment})");
        Ok(created)
    }

    /// Queues a command for a session's worker.
    pub fn send(&self, session: &str, cmd: Command) -> Result<(), ErrorBody> {
        let sessions = self.sessions.lock().expect("session table");
        let handle = sessions.get(session).ok_or_else(|| not_found(session))?;
        handle
            .tx
            .send(cmd)
            .map_err(|_| ErrorBody::new("session_closed", "session worker has stopped").with("session", session))
    }

    /// Issues a command that answers through a reply channel.
    pub fn request(
        &self,
        session: &str,
        make: impl FnOnce(Reply) -> Command,
    ) -> Result<Pending, ErrorBody> {
        let (reply, rx) = oneshot::channel();
        self.send(session, make(reply))?;
        Ok(rx)
    }

    /// Removes a session from the table and asks its worker to stop. The
    /// caller awaits the reply and then joins the returned thread.
    pub fn close(
        &self,
        session: &str,
    ) -> Result<(Pending, JoinHandle<()>), ErrorBody> {
        let handle = self
            .sessions
            .lock()
            .expect("session table")
            .remove(session)
            .ok_or_else(|| not_found(session))?;
        let (reply, rx) = oneshot::channel();
        // A worker that already exited has dropped its receiver; the reply
        // channel then closes and the caller sees that.
        let _ = handle.tx.send(Command::Close(reply));
        log::debug!("closing session {session} ({})", handle.experiment);
        Ok((rx, handle.thread))
    }

    /// Drops a connection's subscriptions everywhere.
    pub fn disconnect(&self, conn: u64) {
        let sessions = self.sessions.lock().expect("session table");
        for handle in sessions.values() {
            let (reply, _) = oneshot::channel();
            let _ = handle.tx.send(Command::Unsubscribe(conn, reply));
        }
    }

    /// Stops every worker and waits for them.
    pub fn shutdown(&self) {
        let handles: Vec<Handle> = self.sessions.lock().expect("session table").drain().map(|(_, h)| h).collect();
        for h in &handles {
            let (reply, _) = oneshot::channel();
            let _ = h.tx.send(Command::Close(reply));
        }
        for h in handles {
            let _ = h.thread.join();
        }
    }

    pub fn health(&self) -> Value {
        let sessions = self.sessions.lock().expect("session table");
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for h in sessions.values() {
            *counts.entry(Status::from_u8(h.status.load(Ordering::SeqCst)).name()).or_default() += 1;
        }
        let count = |s: Status| counts.get(s.name()).copied().unwrap_or(0);
        json!({
            "status": "ok",
            "version": env!("CARGO_PKG_VERSION"),
            "sessions": sessions.len(),
            "running": count(Status::Running),
            "paused": count(Status::Paused),
            "failed": count(Status::Failed),
            "max_sessions": self.config.max_sessions,
            "live_workers": self.live_workers.load(Ordering::SeqCst),
        })
    }

    pub fn live_workers(&self) -> usize {
        self.live_workers.load(Ordering::SeqCst)
    }
}

impl Drop for SessionManager {
    fn drop(&mut self) {
        self.shutdown();
    }
}

struct Stepping {
    remaining: u64,
    taken: u64,
    reply: Reply,
}

struct Worker {
    id: String,
    schema: &'static ExperimentSchema,
    params: Params,
    sim: Box<dyn Simulation>,
    step: u64,
    epoch: u64,
    cadence: Cadence,
    /// Steps taken since the last emitted frame.
    pending: u64,
    last_emit: Instant,
    running: bool,
    stepping: Option<Stepping>,
    failure: Option<ErrorBody>,
    replay: VecDeque<Arc<Frame>>,
    replay_cap: usize,
    /// Highest step whose frame has fallen out of the replay buffer.
    evicted_through: Option<u64>,
    subscribers: HashMap<u64, Sink>,
    status: Arc<AtomicU8>,
}

impl Worker {
    fn run(mut self, rx: mpsc::Receiver<Command>) {
        loop {
            let busy = self.stepping.is_some() || (self.running && !self.sim.idle());
            if !busy {
                match rx.recv() {
                    Ok(cmd) => {
                        if self.handle(cmd) {
                            return;
                        }
                    }
                    Err(_) => return,
                }
            }
            loop {
                match rx.try_recv() {
                    Ok(cmd) => {
                        if self.handle(cmd) {
                            return;
                        }
                    }
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => return,
                }
            }
            self.advance();
        }
    }

    fn set_status(&self, s: Status) {
        self.status.store(s as u8, Ordering::SeqCst);
    }

    fn base(&self) -> Value {
        json!({"session": self.id, "step": self.step, "param_epoch": self.epoch})
    }

    fn failed(&self) -> Option<ErrorBody> {
        self.failure.clone()
    }

    /// Returns true when the worker should exit.
    fn handle(&mut self, cmd: Command) -> bool {
        match cmd {
            Command::Patch(patch, reply) => {
                let _ = reply.send(self.patch(&patch));
            }
            Command::Run(cadence, reply) => {
                let r = if let Some(e) = self.failed() {
                    Err(e)
                } else if self.stepping.is_some() {
                    Err(ErrorBody::new("busy", "session is executing a step request"))
                } else if cadence.is_some_and(|c| c.steps == 0) {
                    Err(ErrorBody::new("bad_request", "cadence.steps must be at least 1"))
                } else {
                    if let Some(c) = cadence {
                        self.cadence = c;
                    }
                    self.running = true;
                    self.last_emit = Instant::now();
                    self.set_status(Status::Running);
                    let mut v = self.base();
                    v["status"] = json!("running");
                    v["cadence"] = json!(self.cadence);
                    Ok(v)
                };
                let _ = reply.send(r);
            }
            Command::Pause(reply) => {
                self.flush();
                self.running = false;
                if let Some(s) = self.stepping.take() {
                    let mut v = self.base();
                    v["steps_taken"] = json!(s.taken);
                    v["interrupted"] = json!(true);
                    let _ = s.reply.send(Ok(v));
                }
                if self.failure.is_none() {
                    self.set_status(Status::Paused);
                }
                let mut v = self.base();
                v["status"] = json!(Status::from_u8(self.status.load(Ordering::SeqCst)).name());
                let _ = reply.send(Ok(v));
            }
            Command::Step(n, cadence, reply) => {
                if let Some(e) = self.failed() {
                    let _ = reply.send(Err(e));
                } else if self.running || self.stepping.is_some() {
                    let _ = reply.send(Err(ErrorBody::new("busy", "pause the session before stepping")));
                } else if cadence.is_some_and(|c| c.steps == 0) {
                    let _ = reply.send(Err(ErrorBody::new("bad_request", "cadence.steps must be at least 1")));
                } else if n == 0 {
                    let mut v = self.base();
                    v["steps_taken"] = json!(0);
                    let _ = reply.send(Ok(v));
                } else {
                    if let Some(c) = cadence {
                        self.cadence = c;
                    }
                    self.last_emit = Instant::now();
                    self.stepping = Some(Stepping {
                        remaining: n,
                        taken: 0,
                        reply,
                    });
                    self.set_status(Status::Running);
                }
            }
            Command::Subscribe {
                conn,
                id,
                after_step,
                sink,
            } => self.subscribe(conn, id, after_step, sink),
            Command::Unsubscribe(conn, reply) => {
                let was = self.subscribers.remove(&conn).is_some();
                let mut v = self.base();
                v["subscribed"] = json!(was);
                let _ = reply.send(Ok(v));
            }
            Command::Status(reply) => {
                let mut v = self.base();
                v["experiment"] = json!(self.params.experiment);
                v["status"] = json!(Status::from_u8(self.status.load(Ordering::SeqCst)).name());
                v["params"] = self.params.to_json();
                v["idle"] = json!(self.sim.idle());
                v["cadence"] = json!(self.cadence);
                v["subscribers"] = json!(self.subscribers.len());
                if let Some(e) = &self.failure {
                    v["failure"] = json!(e);
                }
                let _ = reply.send(Ok(v));
            }
            Command::Close(reply) => {
                self.set_status(Status::Closed);
                if let Some(s) = self.stepping.take() {
                    let _ = s
                        .reply
                        .send(Err(ErrorBody::new("session_closed", "session closed while stepping")));
                }
                let mut v = self.base();
                v["status"] = json!("closed");
                let _ = reply.send(Ok(v));
                return true;
            }
        }
        false
    }

    fn patch(&mut self, patch: &Map<String, Value>) -> Result<Value, ErrorBody> {
        if let Some(e) = self.failed() {
            return Err(e);
        }
        let next = self.schema.apply_patch(&self.params, patch)?;
        // Frames already computed belong to the old epoch.
        self.flush();
        self.sim
            .apply(&next)
            .map_err(|m| ErrorBody::new("invalid_value", m).with("experiment", &self.params.experiment))?;
        self.params = next;
        self.epoch += 1;
        let mut v = self.base();
        v["params"] = self.params.to_json();
        Ok(v)
    }

    fn subscribe(&mut self, conn: u64, id: Option<u64>, after_step: Option<u64>, sink: Sink) {
        self.flush();
        let resumable = match (after_step, self.evicted_through) {
            (None, _) => true,
            (Some(_), None) => true,
            (Some(a), Some(e)) => a >= e,
        };
        let mut v = self.base();
        v["resumed"] = json!(after_step.is_some() && resumable);
        if sink.send(Outgoing::Response { id, result: v }).is_err() {
            return;
        }
        if let Some(after) = after_step {
            if resumable {
                for f in self.replay.iter().filter(|f| f.step > after) {
                    if sink.send(Outgoing::Frame(f.clone())).is_err() {
                        return;
                    }
                }
            } else {
                let (kind, payload) = self.sim.snapshot();
                let key = Frame {
                    session_id: self.id.clone(),
                    step: self.step,
                    kind,
                    param_epoch: self.epoch,
                    keyframe: true,
                    payload,
                };
                if sink.send(Outgoing::Frame(Arc::new(key))).is_err() {
                    return;
                }
            }
        }
        self.subscribers.insert(conn, sink);
    }

    /// Emits whatever has been computed since the last frame.
    fn flush(&mut self) {
        if self.pending == 0 {
            return;
        }
        self.pending = 0;
        self.last_emit = Instant::now();
        let payload = self.sim.drain();
        let frame = Arc::new(Frame {
            session_id: self.id.clone(),
            step: self.step,
            kind: self.sim.kind(),
            param_epoch: self.epoch,
            keyframe: false,
            payload,
        });
        self.replay.push_back(frame.clone());
        while self.replay.len() > self.replay_cap {
            if let Some(old) = self.replay.pop_front() {
                self.evicted_through = Some(old.step);
            }
        }
        self.subscribers
            .retain(|_, sink| sink.send(Outgoing::Frame(frame.clone())).is_ok());
    }

    fn due(&self) -> bool {
        self.sim.frame_per_step()
            || self.pending >= self.cadence.steps
            || (self.cadence.ms > 0 && self.last_emit.elapsed() >= Duration::from_millis(self.cadence.ms))
    }

    /// Steps for up to one time slice.
    fn advance(&mut self) {
        let start = Instant::now();
        loop {
            if let Some(s) = &self.stepping {
                if s.remaining == 0 {
                    break;
                }
            } else if !self.running {
                break;
            }
            if self.sim.idle() {
                if let Some(s) = &mut self.stepping {
                    // Nothing left to compute; report the shortfall.
                    s.remaining = 0;
                }
                break;
            }
            if let Err(message) = self.sim.step() {
                self.fail(message);
                return;
            }
            self.step += 1;
            self.pending += 1;
            if let Some(s) = &mut self.stepping {
                s.remaining -= 1;
                s.taken += 1;
            }
            if self.due() {
                self.flush();
            }
            if start.elapsed() >= SLICE {
                break;
            }
        }
        if self.stepping.as_ref().is_some_and(|s| s.remaining == 0) {
            let s = self.stepping.take().expect("checked above");
            self.flush();
            self.set_status(Status::Paused);
            let mut v = self.base();
            v["steps_taken"] = json!(s.taken);
            let _ = s.reply.send(Ok(v));
        } else if self.running && self.sim.idle() {
            self.flush();
        }
    }

    fn fail(&mut self, message: String) {
        self.flush();
        log::warn!("session {} failed at step {}: {message}", self.id, self.step);
        let err = ErrorBody::new("session_failed", message)
            .with("session", &self.id)
            .with("step", self.step);
        self.failure = Some(err.clone());
        self.running = false;
        self.set_status(Status::Failed);
        if let Some(s) = self.stepping.take() {
            let _ = s.reply.send(Err(err));
        }
    }
}
