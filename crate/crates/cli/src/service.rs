//! Live game service: humans play against agents over HTTP.
//!
//! All routes live under `/v1`:
//!
//! | method | path                      | body / result                                     |
//! |--------|---------------------------|---------------------------------------------------|
//! | POST   | `/games`                  | `{agents, human_seat?, seed?}` → `{game_id}`      |
//! | GET    | `/games/{id}`             | redacted [`View`] for the human seat              |
//! | POST   | `/games/{id}/moves`       | `{cards: [codes] \| "pass", revision?}`           |
//! | GET    | `/games/{id}/insight`     | identification series, 404 unless enabled         |
//! | GET    | `/games/{id}/events`      | server-sent [`Frame`]s, replayed from the start   |
//!
//! The server owns the game: every submitted move is re-checked against the
//! engine's legal set, and agents move automatically until it is the human's
//! turn again.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use parking_lot::{Mutex, RwLock};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use tokio_stream::wrappers::BroadcastStream;

use red10_core::agents::{act, AgentKind, Models};
use red10_core::engine::{CardSet, GameState, Move, Seat, Team, NUM_SEATS};
use red10_core::evaluation::{deck_seed, move_code, turn_rows, CurveRow};

/// Shared, read-only models plus the table of live games.
pub struct AppState {
    pub models: Option<Arc<Models>>,
    pub expose_insight: bool,
    games: RwLock<HashMap<u64, Arc<Mutex<GameSession>>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(models: Option<Models>, expose_insight: bool) -> Arc<AppState> {
        Arc::new(AppState {
            models: models.map(Arc::new),
            expose_insight,
            games: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    /// Server-side copy of a game's full state (tests and debugging).
    pub fn game_state(&self, id: u64) -> Option<GameState> {
        self.games.read().get(&id).map(|g| g.lock().state.clone())
    }

    fn game(&self, id: u64) -> Result<Arc<Mutex<GameSession>>, ApiError> {
        self.games.read().get(&id).cloned().ok_or(ApiError::new(StatusCode::NOT_FOUND, "unknown game"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    Human,
    Agent(AgentKind),
}

/// One live deck.
pub struct GameSession {
    pub id: u64,
    pub seed: u64,
    pub state: GameState,
    pub controllers: [Controller; NUM_SEATS],
    pub human_seat: Option<Seat>,
    pub revision: u64,
    /// Identification rows of every seat before every move (needs models).
    pub insight: Vec<CurveRow>,
    frames: Vec<Frame>,
    events: broadcast::Sender<Frame>,
    rng: ChaCha8Rng,
}

/// Pushed after every move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub revision: u64,
    pub seat: Seat,
    #[serde(rename = "move")]
    pub mv: String,
    pub terminal: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub winner: Seat,
    pub winning_team: Team,
    /// Red-ten holders, revealed once the deck is over.
    pub landlords: [bool; NUM_SEATS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seat: Seat,
    #[serde(rename = "move")]
    pub mv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lead {
    pub seat: Seat,
    pub cards: String,
    pub category: String,
}

/// What the human seat may see. Other seats' hands appear only as counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub game_id: u64,
    pub seat: Option<Seat>,
    pub hand: Vec<String>,
    pub hand_counts: [usize; NUM_SEATS],
    pub history: Vec<HistoryEntry>,
    pub turn: Seat,
    pub lead: Option<Lead>,
    /// Present only when the human is to move.
    pub legal_moves: Option<Vec<String>>,
    pub controllers: [String; NUM_SEATS],
    pub revision: u64,
    pub terminal: Option<Outcome>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum AgentsSpec {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateGame {
    /// One kind for every agent seat, or one per agent seat in seat order.
    pub agents: AgentsSpec,
    #[serde(default)]
    pub human_seat: Option<Seat>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub game_id: u64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum MoveCards {
    Pass(String),
    Cards(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostMove {
    #[serde(alias = "move")]
    pub cards: MoveCards,
    /// Optimistic concurrency: reject when the game has moved on.
    #[serde(default)]
    pub revision: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Accepted {
    pub accepted: bool,
    pub revision: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Insight {
    pub game_id: u64,
    pub rows: Vec<CurveRow>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    reason: String,
}

impl ApiError {
    fn new(status: StatusCode, reason: impl Into<String>) -> ApiError {
        ApiError { status, reason: reason.into() }
    }

    fn bad(reason: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, reason)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "accepted": false, "reason": self.reason }))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/games", post(create_game))
        .route("/v1/games/{id}", get(view_game))
        .route("/v1/games/{id}/moves", post(post_move))
        .route("/v1/games/{id}/insight", get(insight))
        .route("/v1/games/{id}/events", get(events))
        .with_state(state)
}

fn outcome(state: &GameState) -> Option<Outcome> {
    let winner = state.winner?;
    Some(Outcome { winner, winning_team: state.pattern.team_of(winner), landlords: state.pattern.landlords })
}

impl GameSession {
    /// Records insight rows, applies `mv`, bumps the revision and emits a frame.
    fn apply(&mut self, models: Option<&Models>, mv: Move) -> Result<(), ApiError> {
        let seat = self.state.turn;
        if let Some(m) = models {
            self.insight.extend(turn_rows(m, &self.state, 0, &mv));
        }
        self.state.apply(&mv).map_err(|e| ApiError::bad(e.to_string()))?;
        self.revision += 1;
        let frame = Frame { revision: self.revision, seat, mv: move_code(&mv), terminal: outcome(&self.state) };
        self.frames.push(frame.clone());
        // No subscribers is fine: frames are replayed on subscription.
        let _ = self.events.send(frame);
        Ok(())
    }

    /// Lets agents move until the human is to act or the deck ends.
    fn run_agents(&mut self, models: Option<&Models>) -> Result<(), ApiError> {
        while !self.state.is_terminal() {
            let Controller::Agent(kind) = self.controllers[self.state.turn] else {
                break;
            };
            let d = act(kind, models, &self.state, 0.0, &mut self.rng)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
            self.apply(models, d.mv)?;
        }
        Ok(())
    }

    pub fn view(&self) -> View {
        let s = &self.state;
        let hand = match self.human_seat {
            Some(h) => s.hands[h].iter().map(|c| c.code()).collect(),
            None => Vec::new(),
        };
        let human_turn = !s.is_terminal() && self.human_seat == Some(s.turn);
        let lead = s.lead.as_ref().map(|(seat, c)| Lead { seat: *seat, cards: c.cards.codes(), category: c.category.to_string() });
        View {
            game_id: self.id,
            seat: self.human_seat,
            hand,
            hand_counts: s.hand_sizes(),
            history: s.history.iter().map(|(seat, mv)| HistoryEntry { seat: *seat, mv: move_code(mv) }).collect(),
            turn: s.turn,
            lead,
            legal_moves: human_turn.then(|| s.legal_moves().iter().map(move_code).collect()),
            controllers: self.controllers.map(|c| match c {
                Controller::Human => "human".to_string(),
                Controller::Agent(k) => k.to_string(),
            }),
            revision: self.revision,
            terminal: outcome(s),
        }
    }
}

fn parse_controllers(req: &CreateGame, models: Option<&Models>) -> Result<[Controller; NUM_SEATS], ApiError> {
    if let Some(h) = req.human_seat {
        if h >= NUM_SEATS {
            return Err(ApiError::bad(format!("human_seat {h} out of range")));
        }
    }
    let agent_seats: Vec<Seat> = (0..NUM_SEATS).filter(|&s| Some(s) != req.human_seat).collect();
    let names: Vec<String> = match &req.agents {
        AgentsSpec::One(k) => vec![k.clone(); agent_seats.len()],
        AgentsSpec::Many(v) if v.len() == agent_seats.len() => v.clone(),
        AgentsSpec::Many(v) => {
            return Err(ApiError::bad(format!("expected {} agent kinds, got {}", agent_seats.len(), v.len())));
        }
    };
    let mut out = [Controller::Human; NUM_SEATS];
    for (seat, name) in agent_seats.into_iter().zip(names) {
        let kind: AgentKind = name.parse().map_err(|e: red10_core::agents::AgentError| ApiError::bad(e.to_string()))?;
        if kind.needs_models() && models.is_none() {
            return Err(ApiError::bad(format!("agent {kind} needs models; start the server with checkpoints")));
        }
        out[seat] = Controller::Agent(kind);
    }
    Ok(out)
}

async fn create_game(State(app): State<Arc<AppState>>, Json(req): Json<CreateGame>) -> Result<Json<Created>, ApiError> {
    let models = app.models.as_deref();
    let controllers = parse_controllers(&req, models)?;
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    let seed = req.seed.unwrap_or(id);
    let (events, _) = broadcast::channel(256);
    let mut session = GameSession {
        id,
        seed,
        state: GameState::deal(deck_seed(seed, 0)),
        controllers,
        human_seat: req.human_seat,
        revision: 0,
        insight: Vec::new(),
        frames: Vec::new(),
        events,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    session.run_agents(models)?;
    app.games.write().insert(id, Arc::new(Mutex::new(session)));
    Ok(Json(Created { game_id: id }))
}

async fn view_game(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Json<View>, ApiError> {
    Ok(Json(app.game(id)?.lock().view()))
}

fn parse_move(state: &GameState, cards: &MoveCards) -> Result<Move, ApiError> {
    let set = match cards {
        MoveCards::Pass(s) if s == "pass" => CardSet::EMPTY,
        MoveCards::Pass(s) => return Err(ApiError::bad(format!("expected \"pass\" or a card list, got {s:?}"))),
        MoveCards::Cards(codes) if codes.is_empty() => return Err(ApiError::bad("empty card list; send \"pass\"")),
        MoveCards::Cards(codes) => CardSet::parse_codes(&codes.join(" ")).map_err(|e| ApiError::bad(e.to_string()))?,
    };
    let not_legal = || ApiError::bad("not in legal set");
    let mv = state.move_from_cards(set).map_err(|_| not_legal())?;
    if !state.legal_moves().contains(&mv) {
        return Err(not_legal());
    }
    Ok(mv)
}

async fn post_move(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Json(req): Json<PostMove>,
) -> Result<Json<Accepted>, ApiError> {
    let game = app.game(id)?;
    let mut g = game.lock();
    if g.state.is_terminal() {
        return Err(ApiError::new(StatusCode::CONFLICT, "game over"));
    }
    if g.human_seat != Some(g.state.turn) {
        return Err(ApiError::new(StatusCode::CONFLICT, "not your turn"));
    }
    if let Some(r) = req.revision {
        if r != g.revision {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("stale revision {r}, current {}", g.revision)));
        }
    }
    let mv = parse_move(&g.state, &req.cards)?;
    let models = app.models.as_deref();
    g.apply(models, mv)?;
    g.run_agents(models)?;
    Ok(Json(Accepted { accepted: true, revision: g.revision }))
}

async fn insight(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Json<Insight>, ApiError> {
    if !app.expose_insight || app.models.is_none() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "insight disabled"));
    }
    let game = app.game(id)?;
    let g = game.lock();
    Ok(Json(Insight { game_id: id, rows: g.insight.clone() }))
}

async fn events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let game = app.game(id)?;
    // Subscribe under the lock so no frame falls between replay and live.
    let (past, live) = {
        let g = game.lock();
        (g.frames.clone(), (!g.state.is_terminal()).then(|| g.events.subscribe()))
    };
    let live = match live {
        Some(rx) => BroadcastStream::new(rx).filter_map(|f| async move { f.ok() }).boxed(),
        None => stream::empty().boxed(),
    };
    let mut done = false;
    let frames = stream::iter(past).chain(live).take_while(move |f| {
        let keep = !done;
        done = f.terminal.is_some();
        futures::future::ready(keep)
    });
    let events = frames.map(|f| Ok(Event::default().event("move").json_data(&f).expect("frame serializes")));
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

/// Binds and serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, bind: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((bind, port)).await?;
    axum::serve(listener, router(state)).await
}
