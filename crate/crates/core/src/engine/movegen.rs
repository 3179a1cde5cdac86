//! Legal move generation.
//!
//! Combinations are first generated at the rank level (how many cards of
//! each rank), then expanded into every concrete choice of suits the hand
//! allows. The rank-level generator is independent of [`classify`]; the
//! tests cross-check the two.
//!
//! [`classify`]: super::combo::classify

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::card::{CardSet, Rank, NUM_RANKS, NUM_SUITS};
use super::combo::{Category, Combination};

/// Highest rank index that may take part in a chain (the ace).
const LAST_CHAIN_RANK: usize = 11;

/// A move is either a pass or a combination taken from the mover's hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Pass,
    Play(Combination),
}

impl Move {
    pub fn cards(&self) -> CardSet {
        match self {
            Move::Pass => CardSet::EMPTY,
            Move::Play(c) => c.cards,
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Move::Pass)
    }

    pub fn combination(&self) -> Option<&Combination> {
        match self {
            Move::Pass => None,
            Move::Play(c) => Some(c),
        }
    }
}

/// Canonical order: plays by (category, key rank, card list), then pass.
impl Ord for Move {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Move::Pass, Move::Pass) => Ordering::Equal,
            (Move::Pass, Move::Play(_)) => Ordering::Greater,
            (Move::Play(_), Move::Pass) => Ordering::Less,
            (Move::Play(a), Move::Play(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Move {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Pass => f.write_str("pass"),
            Move::Play(c) => c.fmt(f),
        }
    }
}

/// A combination described only by its rank multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankCombo {
    pub category: Category,
    pub key_rank: Rank,
    pub counts: [u8; NUM_RANKS],
}

impl RankCombo {
    pub fn len(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Gen<'a> {
    avail: &'a [u8; NUM_RANKS],
    max_cards: usize,
    out: Vec<RankCombo>,
}

impl Gen<'_> {
    fn push(&mut self, category: Category, key: usize, counts: [u8; NUM_RANKS]) {
        let n: usize = counts.iter().map(|&c| c as usize).sum();
        if n <= self.max_cards {
            self.out.push(RankCombo { category, key_rank: Rank::from_index(key), counts });
        }
    }

    fn ranks_with(&self, min: u8, exclude: &[usize]) -> Vec<usize> {
        (0..NUM_RANKS).filter(|r| self.avail[*r] >= min && !exclude.contains(r)).collect()
    }

    fn singles(&mut self) {
        for r in 0..NUM_RANKS {
            let a = self.avail[r];
            for (need, cat) in [(1, Category::Solo), (2, Category::Pair), (3, Category::Trio), (4, Category::Bomb)] {
                if a >= need {
                    let mut counts = [0; NUM_RANKS];
                    counts[r] = need;
                    self.push(cat, r, counts);
                }
            }
        }
    }

    fn trio_with_kicker(&mut self) {
        for r in 0..NUM_RANKS {
            if self.avail[r] < 3 {
                continue;
            }
            for (need, cat) in [(1, Category::TrioSolo), (2, Category::TrioPair)] {
                for k in self.ranks_with(need, &[r]) {
                    let mut counts = [0; NUM_RANKS];
                    counts[r] = 3;
                    counts[k] = need;
                    self.push(cat, r, counts);
                }
            }
        }
    }

    /// Runs of `per_rank` cards over consecutive ranks, each at least `min_len` long.
    fn runs(&self, per_rank: u8, min_len: usize) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        for start in 0..=LAST_CHAIN_RANK {
            let mut len = 0;
            while start + len <= LAST_CHAIN_RANK && self.avail[start + len] >= per_rank {
                len += 1;
                if len >= min_len {
                    runs.push((start, len));
                }
            }
        }
        runs
    }

    fn chains(&mut self) {
        for (per_rank, min_len, cat) in [
            (1u8, 5usize, Category::SoloChain),
            (2, 3, Category::PairChain),
            (3, 2, Category::Airplane),
        ] {
            for (start, len) in self.runs(per_rank, min_len) {
                let mut counts = [0; NUM_RANKS];
                for c in &mut counts[start..start + len] {
                    *c = per_rank;
                }
                self.push(cat, start, counts);
            }
        }
    }

    fn airplanes_with_wings(&mut self) {
        for (start, len) in self.runs(3, 2) {
            let run: Vec<usize> = (start..start + len).collect();
            for (need, cat, per_trio) in [(1u8, Category::AirplaneSmall, 4), (2, Category::AirplaneLarge, 5)] {
                if len * per_trio > self.max_cards {
                    continue;
                }
                let candidates = self.ranks_with(need, &run);
                for wings in choose(&candidates, len) {
                    let mut counts = [0; NUM_RANKS];
                    for &r in &run {
                        counts[r] = 3;
                    }
                    for &w in &wings {
                        counts[w] = need;
                    }
                    self.push(cat, start, counts);
                }
            }
        }
    }

    fn four_with_two(&mut self) {
        for r in 0..NUM_RANKS {
            if self.avail[r] < 4 {
                continue;
            }
            for (need, cat) in [(1u8, Category::FourTwoSingles), (2, Category::FourTwoPairs)] {
                let candidates = self.ranks_with(need, &[r]);
                for pair in choose(&candidates, 2) {
                    let mut counts = [0; NUM_RANKS];
                    counts[r] = 4;
                    counts[pair[0]] = need;
                    counts[pair[1]] = need;
                    self.push(cat, r, counts);
                }
            }
        }
    }
}

/// All k-element subsets of `items`, in lexicographic order.
fn choose(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], k: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in from..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Every rank-level combination formable from `avail` with at most `max_cards` cards.
pub fn rank_combos(avail: &[u8; NUM_RANKS], max_cards: usize) -> Vec<RankCombo> {
    let mut g = Gen { avail, max_cards, out: Vec::new() };
    g.singles();
    g.trio_with_kicker();
    g.chains();
    g.airplanes_with_wings();
    g.four_with_two();
    g.out
}

/// Number of distinct rank-level combinations playable from a 13-card hand
/// drawn from the full 52-card deck.
pub fn combination_census() -> usize {
    rank_combos(&[NUM_SUITS as u8; NUM_RANKS], 13).len()
}

fn rank_lead_beats(rc: &RankCombo, lead: &Combination) -> bool {
    let challenger_bomb = rc.category == Category::Bomb;
    match (challenger_bomb, lead.is_bomb()) {
        (true, false) => true,
        (false, true) => false,
        _ => rc.category == lead.category && rc.len() == lead.len() && rc.key_rank > lead.key_rank,
    }
}

/// Suit masks with exactly `n` bits chosen from `avail`.
fn suit_choices(avail: u8, n: u8) -> impl Iterator<Item = u8> {
    (0u8..16).filter(move |m| m & !avail == 0 && m.count_ones() as u8 == n)
}

/// Every concrete card set in `hand` realizing the rank-level combination.
pub fn expand(hand: CardSet, rc: &RankCombo) -> Vec<CardSet> {
    let mut out = vec![0u64];
    for r in 0..NUM_RANKS {
        let need = rc.counts[r];
        if need == 0 {
            continue;
        }
        let avail = hand.suits_of(Rank::from_index(r));
        let shift = r * NUM_SUITS;
        let mut next = Vec::with_capacity(out.len() * 4);
        for m in suit_choices(avail, need) {
            for &base in &out {
                next.push(base | (m as u64) << shift);
            }
        }
        out = next;
    }
    out.into_iter().map(CardSet).collect()
}

/// All legal moves for `hand` facing `lead`, in canonical order. Pass is
/// offered only when following.
pub fn legal_moves(hand: CardSet, lead: Option<&Combination>) -> Vec<Move> {
    let counts = hand.rank_counts();
    let mut moves = Vec::new();
    for rc in rank_combos(&counts, hand.len()) {
        if let Some(l) = lead {
            if !rank_lead_beats(&rc, l) {
                continue;
            }
        }
        for cards in expand(hand, &rc) {
            moves.push(Move::Play(Combination { category: rc.category, key_rank: rc.key_rank, cards }));
        }
    }
    moves.sort_unstable();
    if lead.is_some() {
        moves.push(Move::Pass);
    }
    moves
}
