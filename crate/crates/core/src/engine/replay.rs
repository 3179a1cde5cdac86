//! Line-delimited replay files.
//!
//! ```text
//! seed=42
//! 0,Pair,3H 3D
//! 1,Pass,
//! ```

use std::fmt::Write as _;

use super::card::CardSet;
use super::combo::{classify, Category};
use super::movegen::Move;
use super::state::{GameState, Seat, NUM_SEATS};
use super::EngineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub seed: u64,
    pub moves: Vec<(Seat, Move)>,
}

impl Replay {
    pub fn from_game(seed: u64, state: &GameState) -> Replay {
        Replay { seed, moves: state.history.clone() }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("seed={}\n", self.seed);
        for (seat, mv) in &self.moves {
            match mv {
                Move::Pass => writeln!(out, "{seat},Pass,").unwrap(),
                Move::Play(c) => writeln!(out, "{seat},{},{}", c.category, c.cards.codes()).unwrap(),
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Replay, EngineError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| EngineError::Replay { line: 1, reason: "empty file".into() })?;
        let seed = header
            .trim()
            .strip_prefix("seed=")
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| EngineError::Replay { line: 1, reason: "expected seed=<u64>".into() })?;
        let mut moves = Vec::new();
        for (i, line) in lines {
            let err = |reason: String| EngineError::Replay { line: i + 1, reason };
            let mut parts = line.trim().splitn(3, ',');
            let (seat, cat, cards) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(err("expected seat,category,cards".into())),
            };
            let seat: Seat = seat.parse().map_err(|_| err(format!("bad seat {seat:?}")))?;
            if seat >= NUM_SEATS {
                return Err(err(format!("seat {seat} out of range")));
            }
            let mv = if cat == "Pass" {
                if !cards.trim().is_empty() {
                    return Err(err("pass with cards".into()));
                }
                Move::Pass
            } else {
                let category: Category = cat.parse().map_err(|e: EngineError| err(e.to_string()))?;
                let set = CardSet::parse_codes(cards).map_err(|e| err(e.to_string()))?;
                let combo = classify(set).map_err(|e| err(e.to_string()))?;
                if combo.category != category {
                    return Err(err(format!("cards form {} not {}", combo.category, category)));
                }
                Move::Play(combo)
            };
            moves.push((seat, mv));
        }
        Ok(Replay { seed, moves })
    }

    /// Re-deals from the seed and re-applies every move, checking turn order
    /// and legality against the engine.
    pub fn verify(&self) -> Result<GameState, EngineError> {
        let mut g = GameState::deal(self.seed);
        for (i, (seat, mv)) in self.moves.iter().enumerate() {
            if *seat != g.turn {
                return Err(EngineError::Replay { line: i + 2, reason: format!("seat {seat} moved out of turn") });
            }
            g.apply(mv).map_err(|e| EngineError::Replay { line: i + 2, reason: e.to_string() })?;
        }
        Ok(g)
    }
}
