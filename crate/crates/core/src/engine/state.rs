use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::card::{Card, CardSet};
use super::combo::{classify, Combination};
use super::movegen::{legal_moves, Move};
use super::EngineError;

pub const NUM_SEATS: usize = 4;

pub type Seat = usize;

pub fn up_of(seat: Seat) -> Seat {
    (seat + 3) % NUM_SEATS
}

pub fn front_of(seat: Seat) -> Seat {
    (seat + 2) % NUM_SEATS
}

pub fn down_of(seat: Seat) -> Seat {
    (seat + 1) % NUM_SEATS
}

/// The (up, front, down) seats relative to `seat`.
pub fn relative_seats(seat: Seat) -> [Seat; 3] {
    [up_of(seat), front_of(seat), down_of(seat)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Team {
    Landlord,
    Peasant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternId {
    /// Two landlords sitting next to each other.
    P1100,
    /// Two landlords sitting opposite.
    P1010,
    /// One seat holds both red tens.
    P1000,
    /// Everyone on one team. Only used in training.
    P0000,
}

impl PatternId {
    pub const ALL: [PatternId; 4] = [PatternId::P1100, PatternId::P1010, PatternId::P1000, PatternId::P0000];

    pub fn name(self) -> &'static str {
        match self {
            PatternId::P1100 => "1100",
            PatternId::P1010 => "1010",
            PatternId::P1000 => "1000",
            PatternId::P0000 => "0000",
        }
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A team layout: the pattern plus which seats are landlords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pattern {
    pub id: PatternId,
    pub landlords: [bool; NUM_SEATS],
}

impl Pattern {
    /// Derives the layout from who holds the red tens.
    pub fn from_hands(hands: &[CardSet; NUM_SEATS]) -> Pattern {
        let landlords = [0, 1, 2, 3].map(|s| !hands[s].red_tens().is_empty());
        let seats: Vec<Seat> = (0..NUM_SEATS).filter(|&s| landlords[s]).collect();
        let id = match seats.as_slice() {
            [_] => PatternId::P1000,
            [a, b] if (b - a) % 2 == 0 => PatternId::P1010,
            [_, _] => PatternId::P1100,
            // A variant deck without red tens has no landlords at all.
            _ => PatternId::P0000,
        };
        Pattern { id, landlords }
    }

    pub fn all_cooperative() -> Pattern {
        Pattern { id: PatternId::P0000, landlords: [false; NUM_SEATS] }
    }

    pub fn team_of(&self, seat: Seat) -> Team {
        if self.landlords[seat] {
            Team::Landlord
        } else {
            Team::Peasant
        }
    }

    pub fn same_team(&self, a: Seat, b: Seat) -> bool {
        self.landlords[a] == self.landlords[b]
    }

    /// Bitmap with bit `s` set when seat `s` is a landlord.
    pub fn team_bits(&self) -> u8 {
        (0..NUM_SEATS).filter(|&s| self.landlords[s]).fold(0, |acc, s| acc | 1 << s)
    }
}

/// Cooperation decisions toward the (up, front, down) players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct TeamMask {
    pub up: bool,
    pub front: bool,
    pub down: bool,
}

impl TeamMask {
    pub const LONE: TeamMask = TeamMask { up: false, front: false, down: false };
    pub const ALL_TEAM: TeamMask = TeamMask { up: true, front: true, down: true };

    pub fn new(up: bool, front: bool, down: bool) -> TeamMask {
        TeamMask { up, front, down }
    }

    /// Index 0..8 with `up` as the most significant bit.
    pub fn index(self) -> usize {
        (self.up as usize) << 2 | (self.front as usize) << 1 | self.down as usize
    }

    pub fn from_index(i: usize) -> TeamMask {
        TeamMask { up: i & 4 != 0, front: i & 2 != 0, down: i & 1 != 0 }
    }

    pub fn all() -> impl Iterator<Item = TeamMask> {
        (0..8).map(TeamMask::from_index)
    }

    pub fn bits(self) -> [bool; 3] {
        [self.up, self.front, self.down]
    }

    pub fn from_bits(b: [bool; 3]) -> TeamMask {
        TeamMask { up: b[0], front: b[1], down: b[2] }
    }

    /// Three-character form such as `101`.
    pub fn code(self) -> String {
        self.bits().iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn parse(s: &str) -> Option<TeamMask> {
        let b: Vec<bool> = s
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<_>>()?;
        (b.len() == 3).then(|| TeamMask::from_bits([b[0], b[1], b[2]]))
    }
}

impl fmt::Display for TeamMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

/// The relative cooperation mask `seat` would use if identities were public.
pub fn ground_truth_mask(pattern: &Pattern, seat: Seat) -> TeamMask {
    let [u, f, d] = relative_seats(seat);
    TeamMask::new(pattern.same_team(seat, u), pattern.same_team(seat, f), pattern.same_team(seat, d))
}

/// Authoritative state of one deck.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    /// Every card in play for this deck (the full deck unless a variant).
    pub deck: CardSet,
    pub hands: [CardSet; NUM_SEATS],
    /// Cards each seat has played so far.
    pub played: [CardSet; NUM_SEATS],
    /// Most recent non-pass play per seat.
    pub last_play: [Option<CardSet>; NUM_SEATS],
    pub history: Vec<(Seat, Move)>,
    pub lead: Option<(Seat, Combination)>,
    pub consecutive_passes: u8,
    pub turn: Seat,
    pub t: u32,
    pub pattern: Pattern,
    pub winner: Option<Seat>,
}

impl GameState {
    /// Shuffles the full deck with `seed` and deals it round-robin; seat 0 leads.
    pub fn deal(seed: u64) -> GameState {
        let mut cards: Vec<Card> = CardSet::FULL.iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cards.shuffle(&mut rng);
        let mut hands = [CardSet::EMPTY; NUM_SEATS];
        for (i, c) in cards.into_iter().enumerate() {
            hands[i % NUM_SEATS].insert(c);
        }
        GameState::from_hands(hands)
    }

    /// A deck with explicit hands; the team layout follows the red tens.
    pub fn from_hands(hands: [CardSet; NUM_SEATS]) -> GameState {
        let pattern = Pattern::from_hands(&hands);
        GameState::with_pattern(hands, pattern)
    }

    pub fn with_pattern(hands: [CardSet; NUM_SEATS], pattern: Pattern) -> GameState {
        let deck = hands.iter().fold(CardSet::EMPTY, |a, h| a.union(*h));
        GameState {
            deck,
            hands,
            played: [CardSet::EMPTY; NUM_SEATS],
            last_play: [None; NUM_SEATS],
            history: Vec::new(),
            lead: None,
            consecutive_passes: 0,
            turn: 0,
            t: 0,
            pattern,
            winner: None,
        }
    }

    /// Replaces the team layout, e.g. to force the all-cooperative pattern.
    pub fn force_pattern(&mut self, pattern: Pattern) {
        self.pattern = pattern;
    }

    pub fn is_terminal(&self) -> bool {
        self.winner.is_some()
    }

    pub fn winning_team(&self) -> Option<Team> {
        self.winner.map(|s| self.pattern.team_of(s))
    }

    /// Whether `seat` is on the winning team of a finished deck.
    pub fn seat_won(&self, seat: Seat) -> Option<bool> {
        self.winner.map(|w| self.pattern.same_team(w, seat))
    }

    pub fn lead_combination(&self) -> Option<&Combination> {
        self.lead.as_ref().map(|(_, c)| c)
    }

    pub fn legal_moves(&self) -> Vec<Move> {
        if self.is_terminal() {
            return Vec::new();
        }
        legal_moves(self.hands[self.turn], self.lead_combination())
    }

    pub fn all_played(&self) -> CardSet {
        self.played.iter().fold(CardSet::EMPTY, |a, p| a.union(*p))
    }

    pub fn hand_sizes(&self) -> [usize; NUM_SEATS] {
        self.hands.map(|h| h.len())
    }

    /// Checks that `mv` is legal for the seat to move.
    pub fn check(&self, mv: &Move) -> Result<(), EngineError> {
        if self.is_terminal() {
            return Err(EngineError::GameOver);
        }
        match mv {
            Move::Pass => {
                if self.lead.is_none() {
                    return Err(EngineError::IllegalMove("cannot pass while leading".into()));
                }
            }
            Move::Play(c) => {
                if !c.cards.is_subset(self.hands[self.turn]) {
                    return Err(EngineError::IllegalMove("cards not in hand".into()));
                }
                let actual = classify(c.cards).map_err(|_| EngineError::IllegalMove("not a combination".into()))?;
                if actual != *c {
                    return Err(EngineError::IllegalMove("category or rank mismatch".into()));
                }
                if let Some(lead) = self.lead_combination() {
                    if !c.beats(lead) {
                        return Err(EngineError::IllegalMove("does not beat the lead".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies a legal move in place.
    pub fn apply(&mut self, mv: &Move) -> Result<(), EngineError> {
        self.check(mv)?;
        let seat = self.turn;
        match mv {
            Move::Pass => {
                self.consecutive_passes += 1;
                if self.consecutive_passes >= 3 {
                    self.lead = None;
                    self.consecutive_passes = 0;
                }
            }
            Move::Play(c) => {
                self.hands[seat] = self.hands[seat].minus(c.cards);
                self.played[seat] = self.played[seat].union(c.cards);
                self.last_play[seat] = Some(c.cards);
                self.lead = Some((seat, *c));
                self.consecutive_passes = 0;
                if self.hands[seat].is_empty() {
                    self.winner = Some(seat);
                }
            }
        }
        self.history.push((seat, *mv));
        self.t += 1;
        self.turn = (seat + 1) % NUM_SEATS;
        Ok(())
    }

    /// Returns the successor state, leaving `self` untouched.
    pub fn step(&self, mv: &Move) -> Result<GameState, EngineError> {
        let mut next = self.clone();
        next.apply(mv)?;
        Ok(next)
    }

    /// Parses a play from card codes for the seat to move.
    pub fn move_from_cards(&self, cards: CardSet) -> Result<Move, EngineError> {
        if cards.is_empty() {
            return Ok(Move::Pass);
        }
        let c = classify(cards).map_err(|_| EngineError::IllegalMove("not a combination".into()))?;
        Ok(Move::Play(c))
    }
}
