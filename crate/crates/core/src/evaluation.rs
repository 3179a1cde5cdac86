//! Paired-deck tournaments, ablations and identification curve export.
//!
//! Deck `g` of a match replays deal `g / 2`. Even decks put X at seat 0 and
//! Y at seats 1–3; odd decks swap the roles. X scores when the seat-0 team
//! wins while X holds seat 0, and when it loses while Y holds seat 0, so the
//! statistic is zero-sum and symmetric under relabeling.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{act, identify_step, AgentError, AgentKind, InsightRecord, Models};
use crate::engine::{EngineError, GameState, Move, PatternId, Seat, Team, TeamMask, NUM_SEATS};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("no results")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Controller {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub deck: u64,
    pub seed: u64,
    pub pattern: PatternId,
    pub seat0_team: Team,
    pub winner: Seat,
    pub winning_team: Team,
    pub controllers: [Controller; NUM_SEATS],
    pub moves: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub insights: Option<Vec<InsightRecord>>,
}

impl MatchResult {
    pub fn x_at_seat0(&self) -> bool {
        self.controllers[0] == Controller::X
    }

    pub fn x_scores(&self) -> bool {
        (self.winning_team == self.seat0_team) == self.x_at_seat0()
    }

    /// The team X scores for: seat 0's team when X holds seat 0, the other otherwise.
    pub fn x_identity(&self) -> Team {
        if self.x_at_seat0() {
            self.seat0_team
        } else {
            other(self.seat0_team)
        }
    }
}

fn other(t: Team) -> Team {
    match t {
        Team::Landlord => Team::Peasant,
        Team::Peasant => Team::Landlord,
    }
}

/// Deal seed of paired deck index `k`.
pub fn deck_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(k)
}

#[derive(Debug, Clone)]
pub struct MatchOptions {
    pub epsilon: f64,
    pub threads: usize,
    pub record_insights: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { epsilon: 0.0, threads: 1, record_insights: false }
    }
}

/// Plays deck `g` of a match.
pub fn play_deck(
    x: AgentKind,
    y: AgentKind,
    models: Option<&Models>,
    g: u64,
    seed: u64,
    opts: &MatchOptions,
) -> Result<MatchResult, EvalError> {
    let k = g / 2;
    let x_first = g % 2 == 0;
    let controllers: [Controller; NUM_SEATS] = std::array::from_fn(|s| match (s == 0, x_first) {
        (true, true) | (false, false) => Controller::X,
        _ => Controller::Y,
    });
    let dseed = deck_seed(seed, k);
    let mut state = GameState::deal(dseed);
    let mut rng = ChaCha8Rng::seed_from_u64(dseed ^ (g << 1 | 1));
    let mut insights = Vec::new();
    while !state.is_terminal() {
        let kind = match controllers[state.turn] {
            Controller::X => x,
            Controller::Y => y,
        };
        let d = act(kind, models, &state, opts.epsilon, &mut rng)?;
        if opts.record_insights {
            insights.extend(d.insight);
        }
        state.apply(&d.mv)?;
    }
    let winner = state.winner.expect("terminal deck has a winner");
    Ok(MatchResult {
        deck: g,
        seed: dseed,
        pattern: state.pattern.id,
        seat0_team: state.pattern.team_of(0),
        winner,
        winning_team: state.pattern.team_of(winner),
        controllers,
        moves: state.history.len(),
        insights: opts.record_insights.then_some(insights),
    })
}

/// Plays `decks` paired decks (rounded up to even) between X and Y.
pub fn play_match(
    x: AgentKind,
    y: AgentKind,
    models: Option<&Models>,
    decks: u64,
    seed: u64,
    opts: &MatchOptions,
) -> Result<Vec<MatchResult>, EvalError> {
    let total = decks + decks % 2;
    let threads = opts.threads.max(1).min(total.max(1) as usize);
    if threads == 1 {
        return (0..total).map(|g| play_deck(x, y, models, g, seed, opts)).collect();
    }
    let chunks: Vec<Result<Vec<MatchResult>, EvalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads as u64)
            .map(|w| {
                scope.spawn(move || {
                    (w..total)
                        .step_by(threads)
                        .map(|g| play_deck(x, y, models, g, seed, opts))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("match worker panicked")).collect()
    });
    let mut all = Vec::with_capacity(total as usize);
    for c in chunks {
        all.extend(c?);
    }
    all.sort_by_key(|r| r.deck);
    Ok(all)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub decks: u64,
    pub x_score: u64,
}

impl Tally {
    pub fn rate(&self) -> f64 {
        if self.decks == 0 {
            0.0
        } else {
            self.x_score as f64 / self.decks as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateReport {
    pub x: String,
    pub y: String,
    pub decks: u64,
    pub x_score: u64,
    pub rate: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
    pub per_pattern: BTreeMap<String, Tally>,
    pub per_identity: BTreeMap<String, Tally>,
    pub decks_per_second: Option<f64>,
}

pub fn normalized_win_rate(results: &[MatchResult]) -> Result<WinRateReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut per_pattern: BTreeMap<String, Tally> = BTreeMap::new();
    let mut per_identity: BTreeMap<String, Tally> = BTreeMap::new();
    let mut x_score = 0;
    for r in results {
        let s = r.x_scores() as u64;
        x_score += s;
        let p = per_pattern.entry(r.pattern.name().to_string()).or_default();
        p.decks += 1;
        p.x_score += s;
        let i = per_identity.entry(format!("{:?}", r.x_identity()).to_lowercase()).or_default();
        i.decks += 1;
        i.x_score += s;
    }
    let decks = results.len() as u64;
    let rate = x_score as f64 / decks as f64;
    Ok(WinRateReport {
        x: String::new(),
        y: String::new(),
        decks,
        x_score,
        rate,
        ci95: 1.96 * (rate * (1.0 - rate) / decks as f64).sqrt(),
        per_pattern,
        per_identity,
        decks_per_second: None,
    })
}

/// Plays a match and summarizes it, timing the tournament.
pub fn evaluate(
    x: AgentKind,
    y: AgentKind,
    models: Option<&Models>,
    decks: u64,
    seed: u64,
    opts: &MatchOptions,
) -> Result<WinRateReport, EvalError> {
    let start = Instant::now();
    let results = play_match(x, y, models, decks, seed, opts)?;
    let mut report = normalized_win_rate(&results)?;
    report.x = x.to_string();
    report.y = y.to_string();
    report.decks_per_second = Some(results.len() as f64 / start.elapsed().as_secs_f64().max(1e-9));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ablation {
    DangerConstant(f32),
    NoIdentification,
}

/// Full IDRL (X) against an ablated variant (Y).
pub fn run_ablation(models: &Models, kind: Ablation, decks: u64, seed: u64, opts: &MatchOptions) -> Result<WinRateReport, EvalError> {
    let y = match kind {
        Ablation::DangerConstant(nu) => AgentKind::ConstantRisk(nu),
        Ablation::NoIdentification => AgentKind::MonteCarloOnly(TeamMask::LONE),
    };
    evaluate(AgentKind::Idrl, y, Some(models), decks, seed, opts)
}

pub const CURVE_HEADER: &str = "deck,turn,seat,c_up,c_front,c_down,d,mask,move,event";

/// One seat's identification state before a move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub deck: u64,
    pub turn: u32,
    pub seat: Seat,
    pub c: [f32; 3],
    pub d: f32,
    pub mask: TeamMask,
    /// Card codes of the move, only on the mover's row; `pass` for a pass.
    pub mv: Option<String>,
    /// `red10` / `black10` tags when the mover plays tens.
    pub event: String,
}

pub fn move_code(mv: &Move) -> String {
    match mv {
        Move::Pass => "pass".to_string(),
        Move::Play(c) => c.cards.codes(),
    }
}

pub fn ten_event(mv: &Move) -> String {
    let cards = mv.cards();
    let mut tags = Vec::new();
    if !cards.red_tens().is_empty() {
        tags.push("red10");
    }
    if cards.tens().len() > cards.red_tens().len() {
        tags.push("black10");
    }
    tags.join("+")
}

/// Identification of every seat at `state`, annotated with the move about to be played.
pub fn turn_rows(models: &Models, state: &GameState, deck: u64, mv: &Move) -> Vec<CurveRow> {
    (0..NUM_SEATS)
        .map(|seat| {
            let (c, d, mask) = identify_step(&models.identifier, state, seat, None);
            let mover = seat == state.turn;
            CurveRow {
                deck,
                turn: state.t,
                seat,
                c,
                d,
                mask,
                mv: mover.then(|| move_code(mv)),
                event: if mover { ten_event(mv) } else { String::new() },
            }
        })
        .collect()
}

impl CurveRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            self.deck,
            self.turn,
            self.seat,
            self.c[0],
            self.c[1],
            self.c[2],
            self.d,
            self.mask.code(),
            self.mv.as_deref().unwrap_or(""),
            self.event
        )
    }
}

/// Plays one all-IDRL deck greedily from `seed` and returns its curve rows.
pub fn curve_deck(models: &Models, deck: u64, seed: u64) -> Result<Vec<CurveRow>, EvalError> {
    let mut state = GameState::deal(deck_seed(seed, deck));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut rows = Vec::new();
    while !state.is_terminal() {
        let d = act(AgentKind::Idrl, Some(models), &state, 0.0, &mut rng)?;
        rows.extend(turn_rows(models, &state, deck, &d.mv));
        state.apply(&d.mv)?;
    }
    Ok(rows)
}

/// Writes the curve file for `decks` all-IDRL decks.
pub fn export_curves<W: Write>(models: &Models, decks: u64, seed: u64, out: &mut W) -> Result<(), EvalError> {
    writeln!(out, "{CURVE_HEADER}")?;
    for deck in 0..decks {
        for row in curve_deck(models, deck, seed)? {
            writeln!(out, "{}", row.to_csv())?;
        }
    }
    Ok(())
}
