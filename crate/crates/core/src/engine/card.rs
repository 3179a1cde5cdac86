use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EngineError;

pub const NUM_RANKS: usize = 13;
pub const NUM_SUITS: usize = 4;
pub const DECK_SIZE: usize = NUM_RANKS * NUM_SUITS;

/// Card ranks in ascending strength: 3 is the lowest, 2 the highest.
#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rank {
    Three = 0,
    Four,
    Five,
    Six,
    Seven,
    Eight,
    Nine,
    Ten,
    Jack,
    Queen,
    King,
    Ace,
    Two,
}

impl Rank {
    pub const ALL: [Rank; NUM_RANKS] = [
        Rank::Three,
        Rank::Four,
        Rank::Five,
        Rank::Six,
        Rank::Seven,
        Rank::Eight,
        Rank::Nine,
        Rank::Ten,
        Rank::Jack,
        Rank::Queen,
        Rank::King,
        Rank::Ace,
        Rank::Two,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Rank {
        Rank::ALL[i]
    }

    pub fn code(self) -> char {
        b"3456789TJQKA2"[self.index()] as char
    }

    pub fn from_code(c: char) -> Option<Rank> {
        "3456789TJQKA2".find(c.to_ascii_uppercase()).map(Rank::from_index)
    }

    /// Whether the rank may appear in a chain or airplane.
    pub fn chainable(self) -> bool {
        self != Rank::Two
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Ten => f.write_str("10"),
            r => write!(f, "{}", r.code()),
        }
    }
}

/// Suits in the fixed (Heart, Diamond, Club, Spade) order used by every encoder.
#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Suit {
    Heart = 0,
    Diamond,
    Club,
    Spade,
}

impl Suit {
    pub const ALL: [Suit; NUM_SUITS] = [Suit::Heart, Suit::Diamond, Suit::Club, Suit::Spade];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_red(self) -> bool {
        matches!(self, Suit::Heart | Suit::Diamond)
    }

    pub fn code(self) -> char {
        b"HDCS"[self.index()] as char
    }

    pub fn from_code(c: char) -> Option<Suit> {
        "HDCS".find(c.to_ascii_uppercase()).map(|i| Suit::ALL[i])
    }
}

/// A single card, packed as `rank * 4 + suit`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Card(u8);

impl Card {
    pub fn new(rank: Rank, suit: Suit) -> Card {
        Card(rank as u8 * NUM_SUITS as u8 + suit as u8)
    }

    pub fn from_index(i: usize) -> Card {
        debug_assert!(i < DECK_SIZE);
        Card(i as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn rank(self) -> Rank {
        Rank::from_index(self.index() / NUM_SUITS)
    }

    pub fn suit(self) -> Suit {
        Suit::ALL[self.index() % NUM_SUITS]
    }

    pub fn is_red_ten(self) -> bool {
        self.rank() == Rank::Ten && self.suit().is_red()
    }

    /// Two-character code such as `TH` (ten of hearts) or `3S`.
    pub fn code(self) -> String {
        let mut s = String::with_capacity(2);
        s.push(self.rank().code());
        s.push(self.suit().code());
        s
    }
}

impl fmt::Debug for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for Card {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        let (r, su) = match (chars.next(), chars.next(), chars.next()) {
            (Some(r), Some(su), None) => (r, su),
            _ => return Err(EngineError::BadCardCode(s.to_string())),
        };
        match (Rank::from_code(r), Suit::from_code(su)) {
            (Some(rank), Some(suit)) => Ok(Card::new(rank, suit)),
            _ => Err(EngineError::BadCardCode(s.to_string())),
        }
    }
}

/// A set of distinct cards as a 52-bit mask. Iteration order is ascending
/// by (rank, suit), which is the canonical card-list order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CardSet(pub u64);

impl CardSet {
    pub const EMPTY: CardSet = CardSet(0);
    pub const FULL: CardSet = CardSet((1u64 << DECK_SIZE) - 1);

    pub fn from_cards<I: IntoIterator<Item = Card>>(cards: I) -> CardSet {
        let mut s = CardSet::EMPTY;
        for c in cards {
            s.insert(c);
        }
        s
    }

    /// All cards of the given ranks.
    pub fn of_ranks(ranks: &[Rank]) -> CardSet {
        let mut s = CardSet::EMPTY;
        for &r in ranks {
            s.0 |= 0xF << (r.index() * NUM_SUITS);
        }
        s
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, c: Card) -> bool {
        self.0 >> c.index() & 1 == 1
    }

    pub fn insert(&mut self, c: Card) {
        self.0 |= 1 << c.index();
    }

    pub fn remove(&mut self, c: Card) {
        self.0 &= !(1 << c.index());
    }

    pub fn union(self, other: CardSet) -> CardSet {
        CardSet(self.0 | other.0)
    }

    pub fn intersect(self, other: CardSet) -> CardSet {
        CardSet(self.0 & other.0)
    }

    pub fn minus(self, other: CardSet) -> CardSet {
        CardSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: CardSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> CardIter {
        CardIter(self.0)
    }

    pub fn to_vec(self) -> Vec<Card> {
        self.iter().collect()
    }

    /// Cards of one rank, as a 4-bit suit mask.
    pub fn suits_of(self, rank: Rank) -> u8 {
        (self.0 >> (rank.index() * NUM_SUITS) & 0xF) as u8
    }

    pub fn rank_counts(self) -> [u8; NUM_RANKS] {
        let mut counts = [0u8; NUM_RANKS];
        for (r, c) in counts.iter_mut().enumerate() {
            *c = (self.0 >> (r * NUM_SUITS) & 0xF).count_ones() as u8;
        }
        counts
    }

    pub fn tens(self) -> CardSet {
        CardSet(self.0 & CardSet::of_ranks(&[Rank::Ten]).0)
    }

    pub fn red_tens(self) -> CardSet {
        CardSet(self.0 & red_tens_mask())
    }

    /// Lexicographic comparison of the two sorted card lists.
    pub fn cmp_lex(self, other: CardSet) -> std::cmp::Ordering {
        let mut a = self.iter();
        let mut b = other.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return std::cmp::Ordering::Equal,
                (None, Some(_)) => return std::cmp::Ordering::Less,
                (Some(_), None) => return std::cmp::Ordering::Greater,
                (Some(x), Some(y)) => match x.cmp(&y) {
                    std::cmp::Ordering::Equal => continue,
                    o => return o,
                },
            }
        }
    }

    /// Space-separated card codes.
    pub fn codes(self) -> String {
        self.iter().map(Card::code).collect::<Vec<_>>().join(" ")
    }

    pub fn parse_codes(s: &str) -> Result<CardSet, EngineError> {
        let mut set = CardSet::EMPTY;
        for tok in s.split_whitespace() {
            let c: Card = tok.parse()?;
            if set.contains(c) {
                return Err(EngineError::BadCardCode(format!("duplicate card {tok}")));
            }
            set.insert(c);
        }
        Ok(set)
    }
}

fn red_tens_mask() -> u64 {
    (1 << Card::new(Rank::Ten, Suit::Heart).index()) | (1 << Card::new(Rank::Ten, Suit::Diamond).index())
}

impl fmt::Debug for CardSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.codes())
    }
}

impl FromIterator<Card> for CardSet {
    fn from_iter<T: IntoIterator<Item = Card>>(iter: T) -> Self {
        CardSet::from_cards(iter)
    }
}

pub struct CardIter(u64);

impl Iterator for CardIter {
    type Item = Card;

    fn next(&mut self) -> Option<Card> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(Card(i as u8))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for CardIter {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deck_has_52_distinct_cards() {
        let all: Vec<Card> = CardSet::FULL.iter().collect();
        assert_eq!(all.len(), 52);
        let mut pairs: Vec<(Rank, Suit)> = all.iter().map(|c| (c.rank(), c.suit())).collect();
        pairs.dedup();
        assert_eq!(pairs.len(), 52);
    }

    #[test]
    fn rank_order_three_lowest_two_highest() {
        assert!(Rank::Three < Rank::Four);
        assert!(Rank::Ace < Rank::Two);
        assert_eq!(Rank::ALL.iter().max(), Some(&Rank::Two));
    }

    #[test]
    fn card_codes_round_trip() {
        for c in CardSet::FULL.iter() {
            assert_eq!(c.code().parse::<Card>().unwrap(), c);
        }
        assert_eq!("TH".parse::<Card>().unwrap(), Card::new(Rank::Ten, Suit::Heart));
        assert!("1H".parse::<Card>().is_err());
        assert!("THX".parse::<Card>().is_err());
    }

    #[test]
    fn rank_counts_and_red_tens() {
        let s = CardSet::parse_codes("TH TD TS 3C").unwrap();
        let counts = s.rank_counts();
        assert_eq!(counts[Rank::Ten.index()], 3);
        assert_eq!(counts[Rank::Three.index()], 1);
        assert_eq!(s.red_tens().len(), 2);
        assert_eq!(s.tens().len(), 3);
    }

    #[test]
    fn lexicographic_order_on_card_lists() {
        let a = CardSet::parse_codes("3H 4H").unwrap();
        let b = CardSet::parse_codes("3H 4D").unwrap();
        let c = CardSet::parse_codes("3H").unwrap();
        assert_eq!(a.cmp_lex(b), std::cmp::Ordering::Less);
        assert_eq!(c.cmp_lex(a), std::cmp::Ordering::Less);
        assert_eq!(a.cmp_lex(a), std::cmp::Ordering::Equal);
    }
}
