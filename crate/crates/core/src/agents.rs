//! Players: the identification-driven agent, its ablations, and baselines.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{GameState, Move, Seat, TeamMask};
use crate::features::build_identify_features;
use crate::identify::{decide_mask, ConfidenceVector, Identifier, RiskRatio};
use crate::policy::{select_action, PolicyBank};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("agent {0} needs trained models")]
    MissingModels(AgentKind),
    #[error("unknown agent kind: {0}")]
    UnknownKind(String),
    #[error("constant risk must lie in [0, 1], got {0}")]
    BadRisk(f32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AgentKind {
    Idrl,
    /// Policy bank only, with a fixed mask instead of identification.
    MonteCarloOnly(TeamMask),
    Random,
    RuleBased,
    /// Identification with the danger output replaced by a constant.
    ConstantRisk(f32),
}

impl AgentKind {
    pub fn needs_models(self) -> bool {
        matches!(self, AgentKind::Idrl | AgentKind::MonteCarloOnly(_) | AgentKind::ConstantRisk(_))
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentKind::Idrl => f.write_str("idrl"),
            AgentKind::MonteCarloOnly(m) => write!(f, "mc:{m}"),
            AgentKind::Random => f.write_str("random"),
            AgentKind::RuleBased => f.write_str("rule"),
            AgentKind::ConstantRisk(nu) => write!(f, "nu:{nu}"),
        }
    }
}

/// Parses `idrl`, `random`, `rule`, `mc` (mask 000), `mc:<bits>` and `nu:<value>`.
impl FromStr for AgentKind {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || AgentError::UnknownKind(s.to_string());
        match s {
            "idrl" => return Ok(AgentKind::Idrl),
            "random" => return Ok(AgentKind::Random),
            "rule" | "rule-based" => return Ok(AgentKind::RuleBased),
            "mc" => return Ok(AgentKind::MonteCarloOnly(TeamMask::LONE)),
            _ => {}
        }
        if let Some(bits) = s.strip_prefix("mc:") {
            return TeamMask::parse(bits).map(AgentKind::MonteCarloOnly).ok_or_else(unknown);
        }
        if let Some(v) = s.strip_prefix("nu:") {
            let nu: f32 = v.parse().map_err(|_| unknown())?;
            if !(0.0..=1.0).contains(&nu) {
                return Err(AgentError::BadRisk(nu));
            }
            return Ok(AgentKind::ConstantRisk(nu));
        }
        Err(unknown())
    }
}

/// Everything a learned agent reads; shared read-only between games.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub bank: PolicyBank,
    pub identifier: Identifier,
}

/// Per-turn identification trace of a learned agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightRecord {
    pub t: u32,
    pub seat: Seat,
    pub c: ConfidenceVector,
    pub d: RiskRatio,
    pub mask: TeamMask,
    pub mv: Move,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub mv: Move,
    pub insight: Option<InsightRecord>,
}

/// Identification step of the learned agent: (c, d, mask). `nu` replaces d.
pub fn identify_step(id: &Identifier, state: &GameState, seat: Seat, nu: Option<f32>) -> (ConfidenceVector, RiskRatio, TeamMask) {
    let feats = build_identify_features(state, seat);
    let (c, d) = id.identify(&feats);
    let d = nu.unwrap_or(d);
    (c, d, decide_mask(c, d))
}

/// Identify, pick the head for the decided mask, act ε-greedily on it.
/// `override_mask` bypasses the decision rule (c and d are still reported).
pub fn idrl_act<R: Rng>(
    models: &Models,
    state: &GameState,
    nu: Option<f32>,
    override_mask: Option<TeamMask>,
    epsilon: f64,
    rng: &mut R,
) -> Decision {
    let seat = state.turn;
    let (c, d, decided) = identify_step(&models.identifier, state, seat, nu);
    let mask = override_mask.unwrap_or(decided);
    let moves = state.legal_moves();
    let mv = moves[select_action(&models.bank, mask, state, &moves, epsilon, rng)];
    Decision { mv, insight: Some(InsightRecord { t: state.t, seat, c, d, mask, mv }) }
}

pub fn random_act<R: Rng>(state: &GameState, rng: &mut R) -> Move {
    let moves = state.legal_moves();
    moves[rng.gen_range(0..moves.len())]
}

/// Deterministic greedy baseline. Leading: lowest key rank, then fewest
/// cards. Following: the lowest non-bomb beat, else the lowest bomb, else pass.
pub fn rule_act(state: &GameState) -> Move {
    let moves = state.legal_moves();
    let plays = moves.iter().filter_map(|m| m.combination().map(|c| (m, c)));
    let pick = if state.lead_combination().is_none() {
        plays.min_by_key(|(_, c)| (c.key_rank, c.len())).map(|(m, _)| *m)
    } else {
        plays.min_by_key(|(_, c)| (c.is_bomb(), c.key_rank, c.len())).map(|(m, _)| *m)
    };
    pick.unwrap_or(Move::Pass)
}

/// Chooses a move for the seat to act.
pub fn act<R: Rng>(
    kind: AgentKind,
    models: Option<&Models>,
    state: &GameState,
    epsilon: f64,
    rng: &mut R,
) -> Result<Decision, AgentError> {
    let need = || models.ok_or(AgentError::MissingModels(kind));
    Ok(match kind {
        AgentKind::Idrl => idrl_act(need()?, state, None, None, epsilon, rng),
        AgentKind::ConstantRisk(nu) => idrl_act(need()?, state, Some(nu), None, epsilon, rng),
        AgentKind::MonteCarloOnly(mask) => {
            let m = need()?;
            let moves = state.legal_moves();
            Decision { mv: moves[select_action(&m.bank, mask, state, &moves, epsilon, rng)], insight: None }
        }
        AgentKind::Random => Decision { mv: random_act(state, rng), insight: None },
        AgentKind::RuleBased => Decision { mv: rule_act(state), insight: None },
    })
}
