//! The live service: one simulation loop, driven in wall-clock time, with
//! WebSocket clients injecting event-set updates and receiving state,
//! feedback, and status frames.
//!
//! Clients never touch the loop directly: commands flow in through a
//! channel, frames flow out through a broadcast. Events latch last-writer-
//! wins; with no client connected the letter stays empty. A sub-sample
//! toggle is two commands, both logged, but the letter is only read at
//! sample instants.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::process::ExitCode;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::any;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc};

use evstl::feedback::{FeedbackEvent, Severity};
use evstl::sim::{
    compile_cached, CompiledSpec, EventSource, SafeSetCircle, Scenario, SimSession,
    TerminalStatus,
};

/// State frames are throttled to at most this rate; feedback and status
/// frames always go out.
const MAX_STATE_HZ: f64 = 20.0;

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ClientFrame {
    SetEvents { events: Vec<String> },
    Start,
    Pause,
    Reset,
}

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ServerFrame {
    State {
        t: f64,
        x: Vec<f64>,
        sigma: Vec<String>,
        buchi_state: String,
        active_props: Vec<String>,
        safe_sets: Vec<SafeSetCircle>,
    },
    Feedback {
        kind: evstl::feedback::FeedbackKind,
        location: String,
        detail: String,
        severity: Severity,
    },
    Status {
        terminal: TerminalStatus,
    },
    Error {
        message: String,
    },
}

impl ServerFrame {
    fn feedback(event: &FeedbackEvent) -> Self {
        ServerFrame::Feedback {
            kind: event.kind,
            location: event.location.clone(),
            detail: event.detail.clone(),
            severity: event.severity,
        }
    }

    fn text(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }
}

enum Command {
    SetEvents(BTreeSet<String>),
    Start,
    Pause,
    Reset,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Command>,
    frames: broadcast::Sender<String>,
    declared_events: BTreeSet<String>,
}

pub fn cmd_serve(path: &std::path::Path, port: u16, speed: f64) -> Result<ExitCode, String> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err("--speed must be a positive number".into());
    }
    let (scenario, compiled) = compile_cached(path).map_err(|e| e.to_string())?;
    if !matches!(scenario.event_source, EventSource::Interactive) {
        return Err(format!(
            "{} declares a scripted event source; `evstl run` replays it, the service needs \"interactive\"",
            path.display()
        ));
    }
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    runtime.block_on(serve(&scenario, &compiled, port, speed))
}

async fn serve(
    scenario: &Scenario,
    compiled: &CompiledSpec,
    port: u16,
    speed: f64,
) -> Result<ExitCode, String> {
    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let (frame_tx, _) = broadcast::channel(256);
    let state = AppState {
        commands: cmd_tx,
        frames: frame_tx.clone(),
        declared_events: scenario.events.clone(),
    };
    let app = Router::new().route("/ws", any(ws_handler)).with_state(state);
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| format!("bind {addr}: {e}"))?;
    let local = listener.local_addr().map_err(|e| e.to_string())?;
    println!("listening on {local}");

    let server = axum::serve(listener, app);
    tokio::select! {
        result = server => result.map_err(|e| e.to_string())?,
        result = sim_loop(scenario, compiled, cmd_rx, frame_tx, speed) => result?,
    }
    Ok(ExitCode::SUCCESS)
}

/// The one logical simulation loop. Paused until a client sends `start`;
/// `reset` rewinds to t = 0 with an empty event letter and pauses.
async fn sim_loop(
    scenario: &Scenario,
    compiled: &CompiledSpec,
    mut commands: mpsc::UnboundedReceiver<Command>,
    frames: broadcast::Sender<String>,
    speed: f64,
) -> Result<(), String> {
    let mut session = SimSession::new(compiled, scenario, &BTreeSet::new())
        .map_err(|e| format!("initial configuration rejected: {e}"))?;
    let mut sigma: BTreeSet<String> = BTreeSet::new();
    let mut running = false;
    let tick = Duration::from_secs_f64(scenario.dt / speed).max(Duration::from_micros(100));
    let mut interval = tokio::time::interval(tick);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let state_gap = Duration::from_secs_f64(1.0 / MAX_STATE_HZ);
    let mut last_state_frame: Option<tokio::time::Instant> = None;

    loop {
        tokio::select! {
            cmd = commands.recv() => {
                let Some(cmd) = cmd else { return Ok(()) };
                match cmd {
                    Command::SetEvents(events) => {
                        println!("events <- {{{}}} at sim t={:.3}", join(&events), session.time());
                        sigma = events;
                    }
                    Command::Start => running = true,
                    Command::Pause => running = false,
                    Command::Reset => {
                        session = SimSession::new(compiled, scenario, &BTreeSet::new())
                            .map_err(|e| format!("reset rejected: {e}"))?;
                        sigma.clear();
                        running = false;
                        last_state_frame = None;
                        println!("reset to t=0.000");
                    }
                }
            }
            _ = interval.tick(), if running && !session.finished() => {
                let record = session.step(&sigma).clone();
                for event in &record.feedback {
                    let _ = frames.send(ServerFrame::feedback(event).text());
                }
                let now = tokio::time::Instant::now();
                let due = last_state_frame.is_none_or(|prev| now - prev >= state_gap);
                if due || session.finished() {
                    last_state_frame = Some(now);
                    let frame = ServerFrame::State {
                        t: record.t,
                        x: record.x,
                        sigma: record.sigma,
                        buchi_state: record.state,
                        active_props: record.active_props,
                        safe_sets: session.safe_sets(),
                    };
                    let _ = frames.send(frame.text());
                }
                if session.finished() {
                    running = false;
                    let status = ServerFrame::Status { terminal: session.status() };
                    println!("finished: {:?}", session.status());
                    let _ = frames.send(status.text());
                }
            }
        }
    }
}

fn join(events: &BTreeSet<String>) -> String {
    events.iter().cloned().collect::<Vec<_>>().join(", ")
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

/// One client connection: forward broadcast frames out, parse commands in.
/// Malformed or unknown input earns an error frame on this socket only;
/// disconnects change nothing about the running loop.
async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut frames = state.frames.subscribe();
    loop {
        tokio::select! {
            frame = frames.recv() => {
                match frame {
                    Ok(text) => {
                        if sink.send(Message::Text(text.into())).await.is_err() {
                            return;
                        }
                    }
                    // Slow reader: skip what lag dropped and keep going.
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return,
                }
            }
            incoming = stream.next() => {
                let Some(Ok(message)) = incoming else { return };
                let Message::Text(text) = message else { continue };
                match parse_frame(&text, &state.declared_events) {
                    Ok(cmd) => {
                        if state.commands.send(cmd).is_err() {
                            return;
                        }
                    }
                    Err(message) => {
                        let error = ServerFrame::Error { message }.text();
                        if sink.send(Message::Text(error.into())).await.is_err() {
                            return;
                        }
                    }
                }
            }
        }
    }
}

fn parse_frame(text: &str, declared: &BTreeSet<String>) -> Result<Command, String> {
    let frame: ClientFrame =
        serde_json::from_str(text).map_err(|e| format!("malformed frame: {e}"))?;
    Ok(match frame {
        ClientFrame::SetEvents { events } => {
            let events: BTreeSet<String> = events.into_iter().collect();
            if let Some(unknown) = events.iter().find(|e| !declared.contains(*e)) {
                return Err(format!("unknown event \"{unknown}\""));
            }
            Command::SetEvents(events)
        }
        ClientFrame::Start => Command::Start,
        ClientFrame::Pause => Command::Pause,
        ClientFrame::Reset => Command::Reset,
    })
}
