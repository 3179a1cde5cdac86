use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::card::{CardSet, Rank, NUM_RANKS};
use super::EngineError;

/// Combination categories, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Solo,
    Pair,
    Trio,
    TrioSolo,
    TrioPair,
    SoloChain,
    PairChain,
    Airplane,
    AirplaneSmall,
    AirplaneLarge,
    FourTwoSingles,
    FourTwoPairs,
    Bomb,
}

impl Category {
    pub const ALL: [Category; 13] = [
        Category::Solo,
        Category::Pair,
        Category::Trio,
        Category::TrioSolo,
        Category::TrioPair,
        Category::SoloChain,
        Category::PairChain,
        Category::Airplane,
        Category::AirplaneSmall,
        Category::AirplaneLarge,
        Category::FourTwoSingles,
        Category::FourTwoPairs,
        Category::Bomb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Solo => "Solo",
            Category::Pair => "Pair",
            Category::Trio => "Trio",
            Category::TrioSolo => "TrioSolo",
            Category::TrioPair => "TrioPair",
            Category::SoloChain => "SoloChain",
            Category::PairChain => "PairChain",
            Category::Airplane => "Airplane",
            Category::AirplaneSmall => "AirplaneSmall",
            Category::AirplaneLarge => "AirplaneLarge",
            Category::FourTwoSingles => "FourTwoSingles",
            Category::FourTwoPairs => "FourTwoPairs",
            Category::Bomb => "Bomb",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| EngineError::BadCategory(s.to_string()))
    }
}

/// A categorized group of cards that can be played as one move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Combination {
    pub category: Category,
    pub key_rank: Rank,
    pub cards: CardSet,
}

impl Combination {
    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn is_bomb(&self) -> bool {
        self.category == Category::Bomb
    }

    /// Whether this combination may be played on top of `lead`.
    pub fn beats(&self, lead: &Combination) -> bool {
        beats(self, lead)
    }
}

impl Ord for Combination {
    fn cmp(&self, other: &Self) -> Ordering {
        self.category
            .cmp(&other.category)
            .then(self.key_rank.cmp(&other.key_rank))
            .then_with(|| self.cards.cmp_lex(other.cards))
    }
}

impl PartialOrd for Combination {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}: {})", self.category, self.key_rank, self.cards.codes())
    }
}

/// Same category with equal size and a higher key rank, or a bomb over a
/// non-bomb, or a higher bomb over a bomb.
pub fn beats(challenger: &Combination, lead: &Combination) -> bool {
    match (challenger.is_bomb(), lead.is_bomb()) {
        (true, false) => true,
        (false, true) => false,
        _ => {
            challenger.category == lead.category
                && challenger.len() == lead.len()
                && challenger.key_rank > lead.key_rank
        }
    }
}

/// Category and key rank of a rank-count vector, without reference to suits.
pub fn classify_counts(counts: &[u8; NUM_RANKS]) -> Option<(Category, Rank)> {
    let total: usize = counts.iter().map(|&c| c as usize).sum();
    if total == 0 {
        return None;
    }
    let mut by_count: [Vec<usize>; 5] = Default::default();
    for (r, &c) in counts.iter().enumerate() {
        if c > 4 {
            return None;
        }
        if c > 0 {
            by_count[c as usize].push(r);
        }
    }
    let distinct = by_count[1].len() + by_count[2].len() + by_count[3].len() + by_count[4].len();
    let rank = Rank::from_index;

    if distinct == 1 {
        let r = rank(by_count[total].first().copied()?);
        return Some(match total {
            1 => (Category::Solo, r),
            2 => (Category::Pair, r),
            3 => (Category::Trio, r),
            _ => (Category::Bomb, r),
        });
    }

    let (ones, twos, threes, fours) = (&by_count[1], &by_count[2], &by_count[3], &by_count[4]);

    if fours.len() == 1 && threes.is_empty() {
        if ones.len() == 2 && twos.is_empty() {
            return Some((Category::FourTwoSingles, rank(fours[0])));
        }
        if twos.len() == 2 && ones.is_empty() {
            return Some((Category::FourTwoPairs, rank(fours[0])));
        }
        return None;
    }
    if !fours.is_empty() {
        return None;
    }

    if threes.len() == 1 {
        if ones.len() == 1 && twos.is_empty() {
            return Some((Category::TrioSolo, rank(threes[0])));
        }
        if twos.len() == 1 && ones.is_empty() {
            return Some((Category::TrioPair, rank(threes[0])));
        }
        return None;
    }

    if threes.len() >= 2 {
        if !is_chain(threes) {
            return None;
        }
        let n = threes.len();
        let low = rank(threes[0]);
        return match (ones.len(), twos.len()) {
            (0, 0) => Some((Category::Airplane, low)),
            (k, 0) if k == n => Some((Category::AirplaneSmall, low)),
            (0, k) if k == n => Some((Category::AirplaneLarge, low)),
            _ => None,
        };
    }

    if twos.len() >= 3 && ones.is_empty() && is_chain(twos) {
        return Some((Category::PairChain, rank(twos[0])));
    }
    if ones.len() >= 5 && twos.is_empty() && is_chain(ones) {
        return Some((Category::SoloChain, rank(ones[0])));
    }
    None
}

/// Consecutive ascending rank indices that never include rank 2.
fn is_chain(ranks: &[usize]) -> bool {
    ranks.windows(2).all(|w| w[1] == w[0] + 1)
        && ranks.iter().all(|&r| Rank::from_index(r).chainable())
}

/// Classifies a non-empty set of cards into its unique combination.
pub fn classify(cards: CardSet) -> Result<Combination, EngineError> {
    if cards.is_empty() {
        return Err(EngineError::NotACombination(cards));
    }
    let (category, key_rank) =
        classify_counts(&cards.rank_counts()).ok_or(EngineError::NotACombination(cards))?;
    Ok(Combination { category, key_rank, cards })
}
