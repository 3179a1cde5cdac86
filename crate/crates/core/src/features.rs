//! Observation encoders.
//!
//! Card groups become 4×13 indicator matrices (one column per rank, filled
//! top-down so a column sums to the number of cards of that rank), stored
//! row-major as 52 values. The suits of the tens are a 4-wide indicator in
//! (Heart, Diamond, Club, Spade) order. The last 20 moves form a 5×208
//! window, oldest first, four 52-wide move blocks per row.
//!
//! Both observation vectors are fixed layouts; [`q_layout`] and
//! [`identify_layout`] publish them.

use serde::Serialize;

use crate::engine::{relative_seats, CardSet, GameState, Move, Rank, Seat, Suit, NUM_RANKS, NUM_SUITS};

pub const CARD_WIDTH: usize = 52;
pub const ACTION_WIDTH: usize = CARD_WIDTH;
pub const COUNT_WIDTH: usize = 13;
pub const SUIT_WIDTH: usize = 4;
pub const HISTORY_MOVES: usize = 20;
pub const HISTORY_ROWS: usize = 5;
pub const HISTORY_ROW_WIDTH: usize = 4 * CARD_WIDTH;
pub const HISTORY_WIDTH: usize = HISTORY_ROWS * HISTORY_ROW_WIDTH;
/// Flat part of the action-value input (everything but action and history).
pub const Q_FLAT_WIDTH: usize = 9 * CARD_WIDTH + 3 * COUNT_WIDTH;
/// Flat part of the relation/danger input.
pub const IDENTIFY_FLAT_WIDTH: usize = 8 * CARD_WIDTH + 3 * COUNT_WIDTH + 5 * SUIT_WIDTH;

/// Writes the 4×13 matrix of `cards` into `out[..52]`.
pub fn encode_cards_into(cards: CardSet, out: &mut [f32]) {
    debug_assert!(out.len() >= CARD_WIDTH);
    out[..CARD_WIDTH].fill(0.0);
    for (rank, &n) in cards.rank_counts().iter().enumerate() {
        for row in 0..n as usize {
            out[row * NUM_RANKS + rank] = 1.0;
        }
    }
}

pub fn encode_cards(cards: CardSet) -> [f32; CARD_WIDTH] {
    let mut out = [0.0; CARD_WIDTH];
    encode_cards_into(cards, &mut out);
    out
}

/// Per-rank counts recovered from an encoded matrix (column sums).
pub fn decode_counts(matrix: &[f32]) -> [u8; NUM_RANKS] {
    let mut counts = [0u8; NUM_RANKS];
    for (rank, c) in counts.iter_mut().enumerate() {
        *c = (0..NUM_SUITS).map(|row| matrix[row * NUM_RANKS + rank]).sum::<f32>() as u8;
    }
    counts
}

pub fn encode_suits10(suits: &[Suit]) -> [f32; SUIT_WIDTH] {
    let mut out = [0.0; SUIT_WIDTH];
    for s in suits {
        out[s.index()] = 1.0;
    }
    out
}

/// Suit indicator of the tens contained in `cards`.
pub fn encode_tens(cards: CardSet) -> [f32; SUIT_WIDTH] {
    let suits: Vec<Suit> = cards.tens().iter().map(|c| c.suit()).collect();
    encode_suits10(&suits)
}

fn encode_count_into(count: usize, out: &mut [f32]) {
    out[..COUNT_WIDTH].fill(0.0);
    if count > 0 {
        out[count.min(COUNT_WIDTH) - 1] = 1.0;
    }
}

/// Writes the 5×208 history window into `out`.
pub fn history_window_into(history: &[(Seat, Move)], out: &mut [f32]) {
    debug_assert!(out.len() >= HISTORY_WIDTH);
    out[..HISTORY_WIDTH].fill(0.0);
    let recent = &history[history.len().saturating_sub(HISTORY_MOVES)..];
    let first_slot = HISTORY_MOVES - recent.len();
    for (i, (_, mv)) in recent.iter().enumerate() {
        if let Move::Play(c) = mv {
            let slot = first_slot + i;
            encode_cards_into(c.cards, &mut out[slot * CARD_WIDTH..(slot + 1) * CARD_WIDTH]);
        }
    }
}

pub fn history_window(history: &[(Seat, Move)]) -> Vec<f32> {
    let mut out = vec![0.0; HISTORY_WIDTH];
    history_window_into(history, &mut out);
    out
}

pub fn encode_action(mv: &Move) -> [f32; ACTION_WIDTH] {
    encode_cards(mv.cards())
}

/// Input of the action-value network for one (state, action) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QFeatures {
    pub action: Vec<f32>,
    pub flat: Vec<f32>,
    pub history: Vec<f32>,
}

/// Input of the relation and danger networks.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyFeatures {
    pub flat: Vec<f32>,
    pub history: Vec<f32>,
}

/// Zones shared by both observation vectors: own hand, the others' union,
/// and per relative player the latest play and all plays.
fn write_common(state: &GameState, seat: Seat, include_lead: bool, out: &mut [f32]) -> usize {
    let rel = relative_seats(seat);
    let own = state.hands[seat];
    let others = state.deck.minus(own).minus(state.all_played());
    let mut at = 0;
    let mut put = |cards: CardSet, at: &mut usize| {
        encode_cards_into(cards, &mut out[*at..*at + CARD_WIDTH]);
        *at += CARD_WIDTH;
    };
    put(own, &mut at);
    put(others, &mut at);
    if include_lead {
        put(state.lead_combination().map(|c| c.cards).unwrap_or_default(), &mut at);
    }
    for s in rel {
        put(state.last_play[s].unwrap_or_default(), &mut at);
    }
    for s in rel {
        put(state.played[s], &mut at);
    }
    for s in rel {
        encode_count_into(state.hands[s].len(), &mut out[at..at + COUNT_WIDTH]);
        at += COUNT_WIDTH;
    }
    at
}

/// The flat state part of the action-value input.
pub fn q_flat(state: &GameState, seat: Seat) -> Vec<f32> {
    let mut flat = vec![0.0; Q_FLAT_WIDTH];
    let n = write_common(state, seat, true, &mut flat);
    debug_assert_eq!(n, Q_FLAT_WIDTH);
    flat
}

pub fn build_q_features(state: &GameState, seat: Seat, action: &Move) -> QFeatures {
    QFeatures {
        action: encode_action(action).to_vec(),
        flat: q_flat(state, seat),
        history: history_window(&state.history),
    }
}

pub fn identify_flat(state: &GameState, seat: Seat) -> Vec<f32> {
    let mut flat = vec![0.0; IDENTIFY_FLAT_WIDTH];
    let mut at = write_common(state, seat, false, &mut flat);
    let rel = relative_seats(seat);
    let own_ever = state.hands[seat].union(state.played[seat]);
    let tens_left = state.deck.tens().minus(state.hands[seat]).minus(state.all_played());
    for cards in [state.played[rel[0]], state.played[rel[1]], state.played[rel[2]], own_ever, tens_left] {
        flat[at..at + SUIT_WIDTH].copy_from_slice(&encode_tens(cards));
        at += SUIT_WIDTH;
    }
    debug_assert_eq!(at, IDENTIFY_FLAT_WIDTH);
    flat
}

pub fn build_identify_features(state: &GameState, seat: Seat) -> IdentifyFeatures {
    IdentifyFeatures { flat: identify_flat(state, seat), history: history_window(&state.history) }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Zone {
    pub name: &'static str,
    pub offset: usize,
    pub width: usize,
}

fn layout(names: &[(&'static str, usize)]) -> Vec<Zone> {
    let mut offset = 0;
    names
        .iter()
        .map(|&(name, width)| {
            let z = Zone { name, offset, width };
            offset += width;
            z
        })
        .collect()
}

const COMMON_TAIL: [(&str, usize); 9] = [
    ("up_recent", CARD_WIDTH),
    ("front_recent", CARD_WIDTH),
    ("down_recent", CARD_WIDTH),
    ("up_history", CARD_WIDTH),
    ("front_history", CARD_WIDTH),
    ("down_history", CARD_WIDTH),
    ("up_count", COUNT_WIDTH),
    ("front_count", COUNT_WIDTH),
    ("down_count", COUNT_WIDTH),
];

/// Action-value input: action, flat state, then the history window.
pub fn q_layout() -> Vec<Zone> {
    let mut names = vec![
        ("action", ACTION_WIDTH),
        ("hand", CARD_WIDTH),
        ("others_union", CARD_WIDTH),
        ("recent_lead", CARD_WIDTH),
    ];
    names.extend_from_slice(&COMMON_TAIL);
    names.push(("history", HISTORY_WIDTH));
    layout(&names)
}

/// Relation/danger input: flat state, then the history window.
pub fn identify_layout() -> Vec<Zone> {
    let mut names = vec![("hand", CARD_WIDTH), ("others_union", CARD_WIDTH)];
    names.extend_from_slice(&COMMON_TAIL);
    names.extend_from_slice(&[
        ("up_tens", SUIT_WIDTH),
        ("front_tens", SUIT_WIDTH),
        ("down_tens", SUIT_WIDTH),
        ("own_tens_ever", SUIT_WIDTH),
        ("others_tens", SUIT_WIDTH),
        ("history", HISTORY_WIDTH),
    ]);
    layout(&names)
}

/// Looks up a zone's (offset, width) in a layout.
pub fn zone(layout: &[Zone], name: &str) -> Option<(usize, usize)> {
    layout.iter().find(|z| z.name == name).map(|z| (z.offset, z.width))
}

/// Indicator of which suits of ten are in `cards`, as suits.
pub fn ten_suits(cards: CardSet) -> Vec<Suit> {
    cards.tens().iter().map(|c| c.suit()).collect()
}

/// Number of cards of rank `rank` in an encoded matrix.
pub fn column_sum(matrix: &[f32], rank: Rank) -> f32 {
    (0..NUM_SUITS).map(|row| matrix[row * NUM_RANKS + rank.index()]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{classify, Card};

    fn set(codes: &str) -> CardSet {
        CardSet::parse_codes(codes).unwrap()
    }

    #[test]
    fn encode_cards_examples() {
        assert!(encode_cards(CardSet::EMPTY).iter().all(|&v| v == 0.0));
        let m = encode_cards(set("3H 3D"));
        assert_eq!(column_sum(&m, Rank::Three), 2.0);
        assert_eq!(m.iter().sum::<f32>(), 2.0);
        let hand = GameState::deal(11).hands[0];
        assert_eq!(encode_cards(hand).iter().sum::<f32>(), 13.0);
        assert_eq!(decode_counts(&encode_cards(hand)), hand.rank_counts());
    }

    #[test]
    fn suit_vector_examples() {
        assert_eq!(encode_suits10(&[Suit::Heart]), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(encode_suits10(&[]), [0.0; 4]);
        assert_eq!(encode_suits10(&Suit::ALL), [1.0; 4]);
    }

    /// Reference packer: builds the 20 slots as a list then flattens.
    fn reference_window(history: &[(Seat, Move)]) -> Vec<f32> {
        let mut slots: Vec<[f32; 52]> = vec![[0.0; 52]; 20];
        let n = history.len().min(20);
        for k in 0..n {
            let mv = &history[history.len() - 1 - k].1;
            slots[19 - k] = encode_cards(mv.cards());
        }
        slots.concat()
    }

    #[test]
    fn history_window_packing() {
        assert!(history_window(&[]).iter().all(|&v| v == 0.0));
        let one = vec![(0, Move::Play(classify(set("5H")).unwrap()))];
        let w = history_window(&one);
        let last_block = HISTORY_WIDTH - CARD_WIDTH;
        assert!(w[..last_block].iter().all(|&v| v == 0.0));
        assert_eq!(w[last_block..].iter().sum::<f32>(), 1.0);
        assert_eq!(w, reference_window(&one));

        let mut hist = Vec::new();
        for i in 0..25 {
            let card = Card::from_index(i);
            hist.push((i % 4, Move::Play(classify(CardSet::from_cards([card])).unwrap())));
        }
        let w = history_window(&hist);
        assert_eq!(w, reference_window(&hist));
        // First slot holds move 6 (index 5).
        assert_eq!(&w[..52], &encode_cards(hist[5].1.cards())[..]);
    }

    #[test]
    fn q_layout_is_frozen() {
        let got: Vec<(&str, usize, usize)> = q_layout().iter().map(|z| (z.name, z.offset, z.width)).collect();
        let want = vec![
            ("action", 0, 52),
            ("hand", 52, 52),
            ("others_union", 104, 52),
            ("recent_lead", 156, 52),
            ("up_recent", 208, 52),
            ("front_recent", 260, 52),
            ("down_recent", 312, 52),
            ("up_history", 364, 52),
            ("front_history", 416, 52),
            ("down_history", 468, 52),
            ("up_count", 520, 13),
            ("front_count", 533, 13),
            ("down_count", 546, 13),
            ("history", 559, 1040),
        ];
        assert_eq!(got, want);
        assert_eq!(Q_FLAT_WIDTH, 507);
    }

    #[test]
    fn identify_layout_is_frozen() {
        let got: Vec<(&str, usize, usize)> =
            identify_layout().iter().map(|z| (z.name, z.offset, z.width)).collect();
        let want = vec![
            ("hand", 0, 52),
            ("others_union", 52, 52),
            ("up_recent", 104, 52),
            ("front_recent", 156, 52),
            ("down_recent", 208, 52),
            ("up_history", 260, 52),
            ("front_history", 312, 52),
            ("down_history", 364, 52),
            ("up_count", 416, 13),
            ("front_count", 429, 13),
            ("down_count", 442, 13),
            ("up_tens", 455, 4),
            ("front_tens", 459, 4),
            ("down_tens", 463, 4),
            ("own_tens_ever", 467, 4),
            ("others_tens", 471, 4),
            ("history", 475, 1040),
        ];
        assert_eq!(got, want);
        assert_eq!(IDENTIFY_FLAT_WIDTH, 475);
    }

    #[test]
    fn initial_state_zones() {
        let g = GameState::deal(4);
        let f = build_q_features(&g, 0, &Move::Pass);
        assert!(f.action.iter().all(|&v| v == 0.0));
        let layout = q_layout();
        let (off, w) = zone(&layout, "others_union").unwrap();
        // Offsets in the layout include the 52-wide action zone.
        let flat_off = off - ACTION_WIDTH;
        assert_eq!(f.flat[flat_off..flat_off + w].iter().sum::<f32>(), 39.0);
        let (off, _) = zone(&layout, "up_count").unwrap();
        let count = &f.flat[off - ACTION_WIDTH..off - ACTION_WIDTH + 13];
        assert_eq!(count[12], 1.0);
        assert_eq!(count.iter().sum::<f32>(), 1.0);
    }

    #[test]
    fn identify_tens_zones() {
        let mut g = GameState::deal(0);
        let holder = (0..4).find(|&s| g.hands[s].contains(Card::new(Rank::Ten, Suit::Heart))).unwrap();
        let f = build_identify_features(&g, holder);
        let layout = identify_layout();
        let get = |f: &IdentifyFeatures, name: &str| {
            let (o, w) = zone(&layout, name).unwrap();
            f.flat[o..o + w].to_vec()
        };
        assert_eq!(get(&f, "own_tens_ever")[0], 1.0);
        assert_eq!(get(&f, "others_tens")[0], 0.0);

        // Play until every ten is gone (random legal play).
        let mut step = 0u64;
        while !g.is_terminal() {
            let moves = g.legal_moves();
            let mv = moves[(step as usize * 7919) % moves.len()];
            g.apply(&mv).unwrap();
            step += 1;
            if let Move::Play(c) = mv {
                let mover = g.history.last().unwrap().0;
                if !c.cards.tens().is_empty() {
                    let observer = (mover + 2) % 4;
                    let f = build_identify_features(&g, observer);
                    let front = get(&f, "front_tens");
                    for t in c.cards.tens().iter() {
                        assert_eq!(front[t.suit().index()], 1.0);
                    }
                }
            }
        }
        if g.all_played().tens().len() == 4 {
            for s in 0..4 {
                assert_eq!(get(&build_identify_features(&g, s), "others_tens"), vec![0.0; 4]);
            }
        }
    }

    #[test]
    fn zones_partition_the_deck() {
        let mut g = GameState::deal(21);
        let layout = q_layout();
        let mut k = 0usize;
        while !g.is_terminal() {
            let seat = g.turn;
            let f = build_q_features(&g, seat, &Move::Pass);
            let (hand_off, _) = zone(&layout, "hand").unwrap();
            let (union_off, _) = zone(&layout, "others_union").unwrap();
            let own = decode_counts(&f.flat[hand_off - 52..hand_off]);
            let others = decode_counts(&f.flat[union_off - 52..union_off]);
            let played = g.all_played().rank_counts();
            for r in 0..NUM_RANKS {
                assert_eq!(own[r] + others[r] + played[r], 4);
            }
            let moves = g.legal_moves();
            g.apply(&moves[k % moves.len()]).unwrap();
            k += 3;
        }
    }

    #[test]
    fn builders_are_pure() {
        let g = GameState::deal(8);
        let mv = g.legal_moves()[0];
        assert_eq!(build_q_features(&g, 0, &mv), build_q_features(&g, 0, &mv));
        assert_eq!(build_identify_features(&g, 2), build_identify_features(&g, 2));
        let _ = ten_suits(g.hands[0]);
    }
}
