//! Self-play and learner throughput at a given network size.
//!
//! `cargo run --release -p red10-core --example throughput -- 32 128`

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use red10_core::engine::GameState;
use red10_core::policy::{learner_update, PolicyBank, RLConfig};
use red10_core::training::play_policy_deck;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let hidden = args.first().copied().unwrap_or(32);
    let width = args.get(1).copied().unwrap_or(128);
    let mut bank = PolicyBank::init(hidden, width, 0).unwrap();
    let config = RLConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let t0 = Instant::now();
    let mut transitions = Vec::new();
    let decks = 50;
    for seed in 0..decks {
        let (trajs, _) = play_policy_deck(&bank, GameState::deal(seed), &config, &mut rng).unwrap();
        transitions.extend(trajs.into_iter().flat_map(|t| t.steps));
    }
    let play = t0.elapsed().as_secs_f64();
    println!("self-play: {:.1} decks/s, {:.1} decisions/deck", decks as f64 / play, transitions.len() as f64 / decks as f64);

    let batch = &transitions[..config.batch_size.min(transitions.len())];
    let t1 = Instant::now();
    let reps = 5;
    for _ in 0..reps {
        learner_update(&mut bank.nets[0], batch, 1e-4).unwrap();
    }
    println!("learner: {:.3} s per batch of {}", t1.elapsed().as_secs_f64() / reps as f64, batch.len());
}
