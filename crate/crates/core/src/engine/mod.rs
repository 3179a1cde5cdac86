//! Red-10 rules: cards, combinations, legal moves and deck state.

mod card;
mod combo;
mod movegen;
mod replay;
mod state;

use thiserror::Error;

pub use card::{Card, CardSet, Rank, Suit, DECK_SIZE, NUM_RANKS, NUM_SUITS};
pub use combo::{beats, classify, classify_counts, Category, Combination};
pub use movegen::{combination_census, expand, legal_moves, rank_combos, Move, RankCombo};
pub use replay::Replay;
pub use state::{
    down_of, front_of, ground_truth_mask, relative_seats, up_of, GameState, Pattern, PatternId, Seat, Team,
    TeamMask, NUM_SEATS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("not a combination: {0:?}")]
    NotACombination(CardSet),
    #[error("illegal move: {0}")]
    IllegalMove(String),
    #[error("game is over")]
    GameOver,
    #[error("bad card code {0:?}")]
    BadCardCode(String),
    #[error("unknown category {0:?}")]
    BadCategory(String),
    #[error("replay line {line}: {reason}")]
    Replay { line: usize, reason: String },
}
