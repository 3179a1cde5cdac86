//! Deep Monte Carlo policy bank: one action-value network per [`TeamMask`].

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{GameState, Move, Seat, TeamMask, NUM_RANKS};
use crate::features::{encode_action, history_window, q_flat, ACTION_WIDTH, HISTORY_WIDTH, Q_FLAT_WIDTH};
use crate::neural::{backward, forward, predict_shared, q_spec, Direction, NetSpec, NeuralError, ParamStore};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("trajectory has no terminal step")]
    IncompleteTrajectory,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Hyperparameters shared by the learners and the identification phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RLConfig {
    /// Discount for competitive masks.
    pub gamma: f64,
    /// Discount for the all-teammates mask, whose reward is always positive.
    pub cooperative_gamma: f64,
    pub epsilon: f64,
    pub learning_rate: f32,
    /// Transitions an actor accumulates before flushing to the shared buffer.
    pub flush_size: usize,
    /// Transitions per learner update.
    pub batch_size: usize,
    /// Weight of the identification loss inside the intrinsic reward.
    pub lambda: f32,
    /// Temperature of the soft policy selection.
    pub tau: f32,
    /// Constant risk replacing the danger network (ablation only).
    pub nu: Option<f32>,
    /// Also update the policy heads during fine-tuning, by Monte Carlo
    /// regression on the heads the identification pipeline selected.
    pub finetune_policy: bool,
}

impl Default for RLConfig {
    fn default() -> Self {
        RLConfig {
            gamma: 1.0,
            cooperative_gamma: 0.99,
            epsilon: 0.05,
            learning_rate: 1e-4,
            flush_size: 128,
            batch_size: 1024,
            lambda: 1.0,
            tau: 0.1,
            nu: None,
            finetune_policy: false,
        }
    }
}

impl RLConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::BadConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.cooperative_gamma) {
            return bad("discounts must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.flush_size == 0 || self.batch_size < self.flush_size {
            return bad("need 0 < flush_size <= batch_size");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if let Some(nu) = self.nu {
            if !(0.0..=1.0).contains(&nu) {
                return bad("nu must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn discount_for(&self, mask: TeamMask) -> f64 {
        if mask == TeamMask::ALL_TEAM {
            self.cooperative_gamma
        } else {
            self.gamma
        }
    }
}

/// Eight action-value networks indexed by [`TeamMask::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBank {
    pub nets: Vec<ParamStore>,
}

pub fn q_net_name(mask: TeamMask) -> String {
    format!("q_{}", mask.code())
}

impl PolicyBank {
    pub fn init(hidden: usize, width: usize, seed: u64) -> Result<PolicyBank, NeuralError> {
        let spec = q_spec(hidden, width);
        let nets = TeamMask::all()
            .map(|m| ParamStore::init(&spec, seed.wrapping_mul(31).wrapping_add(m.index() as u64)))
            .collect::<Result<_, _>>()?;
        Ok(PolicyBank { nets })
    }

    pub fn zeros(hidden: usize, width: usize) -> Result<PolicyBank, NeuralError> {
        let spec = q_spec(hidden, width);
        let nets = TeamMask::all().map(|_| ParamStore::zeros(&spec)).collect::<Result<_, _>>()?;
        Ok(PolicyBank { nets })
    }

    pub fn net(&self, mask: TeamMask) -> &ParamStore {
        &self.nets[mask.index()]
    }

    pub fn net_mut(&mut self, mask: TeamMask) -> &mut ParamStore {
        &mut self.nets[mask.index()]
    }

    pub fn spec(&self) -> &NetSpec {
        &self.nets[0].spec
    }

    /// One checkpoint per mask, named `q_<mask-bits>`, each in its own directory.
    pub fn save(&self, dir: &Path) -> Result<(), NeuralError> {
        self.save_with(dir, None)
    }

    pub fn save_with(&self, dir: &Path, config: Option<&serde_json::Value>) -> Result<(), NeuralError> {
        for m in TeamMask::all() {
            let name = q_net_name(m);
            self.net(m).save_with(&dir.join(&name), &name, config)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<PolicyBank, NeuralError> {
        let nets = TeamMask::all()
            .map(|m| {
                let name = q_net_name(m);
                ParamStore::load(&dir.join(&name), &name)
            })
            .collect::<Result<_, _>>()?;
        Ok(PolicyBank { nets })
    }
}

/// State features shared by every action at one decision.
#[derive(Debug, Clone)]
pub struct DecisionInput {
    pub flat: Vec<f32>,
    pub history: Vec<f32>,
}

impl DecisionInput {
    pub fn new(state: &GameState, seat: Seat) -> DecisionInput {
        DecisionInput { flat: q_flat(state, seat), history: history_window(&state.history) }
    }
}

/// Moves grouped by action encoding; moves differing only in suits share one.
#[derive(Debug, Clone)]
pub struct ActionGroups {
    /// Group index of every move.
    pub group_of: Vec<usize>,
    /// Action rows, one per group, `groups × 52`.
    pub rows: Vec<f32>,
}

impl ActionGroups {
    pub fn new(moves: &[Move]) -> ActionGroups {
        let mut index: HashMap<[u8; NUM_RANKS], usize> = HashMap::new();
        let mut group_of = Vec::with_capacity(moves.len());
        let mut rows = Vec::new();
        for mv in moves {
            let key = mv.cards().rank_counts();
            let next = index.len();
            let g = *index.entry(key).or_insert_with(|| {
                rows.extend_from_slice(&encode_action(mv));
                next
            });
            group_of.push(g);
        }
        ActionGroups { group_of, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len() / ACTION_WIDTH
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Q value of every move under one network.
pub fn q_values_with(net: &ParamStore, input: &DecisionInput, groups: &ActionGroups) -> Vec<f32> {
    let per_group = predict_shared(&net.spec, &net.data, &input.history, &input.flat, &groups.rows, ACTION_WIDTH)
        .expect("decision input matches the action-value spec");
    groups.group_of.iter().map(|&g| per_group[g]).collect()
}

pub fn q_values(bank: &PolicyBank, mask: TeamMask, state: &GameState, moves: &[Move]) -> Vec<f32> {
    let input = DecisionInput::new(state, state.turn);
    q_values_with(bank.net(mask), &input, &ActionGroups::new(moves))
}

/// Index of the first maximum, so ties go to the earliest canonical move.
pub fn greedy_index(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice among `moves` (in canonical order); returns the index.
pub fn select_action<R: Rng>(
    bank: &PolicyBank,
    mask: TeamMask,
    state: &GameState,
    moves: &[Move],
    epsilon: f64,
    rng: &mut R,
) -> usize {
    assert!(!moves.is_empty(), "no legal moves");
    if epsilon > 0.0 && rng.gen_bool(epsilon) {
        return rng.gen_range(0..moves.len());
    }
    if moves.len() == 1 {
        return 0;
    }
    greedy_index(&q_values(bank, mask, state, moves))
}

/// Greedy value `max_a Q_m(s, a)` under every head.
pub fn greedy_values_all_masks(bank: &PolicyBank, state: &GameState, moves: &[Move]) -> [f32; 8] {
    let input = DecisionInput::new(state, state.turn);
    let groups = ActionGroups::new(moves);
    let mut out = [0.0; 8];
    for m in TeamMask::all() {
        let q = q_values_with(bank.net(m), &input, &groups);
        out[m.index()] = q[greedy_index(&q)];
    }
    out
}

/// One decision of one seat, stored compactly as 0/1 bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub flat: Vec<u8>,
    pub history: Vec<u8>,
    pub action: Vec<u8>,
    pub reward: f32,
    pub ret: f32,
    pub mask: TeamMask,
    pub seat: Seat,
    /// Index of this decision in the seat's trajectory.
    pub t: u32,
    /// Length of the seat's trajectory.
    pub len: u32,
}

pub fn to_bytes(x: &[f32]) -> Vec<u8> {
    x.iter().map(|&v| v as u8).collect()
}

impl Transition {
    pub fn new(input: &DecisionInput, mv: &Move, mask: TeamMask, seat: Seat) -> Transition {
        Transition {
            flat: to_bytes(&input.flat),
            history: to_bytes(&input.history),
            action: to_bytes(&encode_action(mv)),
            reward: 0.0,
            ret: 0.0,
            mask,
            seat,
            t: 0,
            len: 0,
        }
    }
}

/// Decisions of one seat over one deck, in order.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    pub terminal: bool,
}

/// `G^t = r^t + γ·G^{t+1}` with `G^T = 0`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for t in (0..rewards.len()).rev() {
        g = rewards[t] + gamma * g;
        out[t] = g;
    }
    out
}

/// Fills `ret`, `t` and `len` of every step.
pub fn mc_returns(traj: &mut Trajectory, gamma: f64) -> Result<(), PolicyError> {
    if !traj.terminal {
        return Err(PolicyError::IncompleteTrajectory);
    }
    let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward as f64).collect();
    let returns = discounted_returns(&rewards, gamma);
    let len = traj.steps.len() as u32;
    for (t, (s, g)) in traj.steps.iter_mut().zip(returns).enumerate() {
        s.ret = g as f32;
        s.t = t as u32;
        s.len = len;
    }
    Ok(())
}

/// Terminal reward of a seat: +1 for the winning team, −1 otherwise.
pub fn terminal_reward(state: &GameState, seat: Seat) -> f32 {
    match state.seat_won(seat) {
        Some(true) => 1.0,
        Some(false) => -1.0,
        None => 0.0,
    }
}

/// Unpacks a batch into dense network inputs: (history, flat, targets).
pub fn batch_inputs(batch: &[Transition]) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let fw = ACTION_WIDTH + Q_FLAT_WIDTH;
    let mut history = Vec::with_capacity(batch.len() * HISTORY_WIDTH);
    let mut flat = Vec::with_capacity(batch.len() * fw);
    for tr in batch {
        history.extend(tr.history.iter().map(|&b| b as f32));
        flat.extend(tr.action.iter().map(|&b| b as f32));
        flat.extend(tr.flat.iter().map(|&b| b as f32));
    }
    let targets = batch.iter().map(|t| t.ret).collect();
    (history, flat, targets)
}

/// One descent step on the mean squared error between Q(s, a) and G.
/// Returns the loss before the step.
pub fn learner_update(net: &mut ParamStore, batch: &[Transition], learning_rate: f32) -> Result<f32, PolicyError> {
    if batch.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    let n = batch.len();
    let (history, flat, targets) = batch_inputs(batch);
    let cache = forward(&net.spec, &net.data, &history, &flat, n)?;
    let q = cache.output();
    let mut loss = 0.0f64;
    let mut d_out = vec![0.0f32; n];
    for i in 0..n {
        let e = q[i] - targets[i];
        loss += (e as f64) * (e as f64);
        d_out[i] = 2.0 * e / n as f32;
    }
    let grads = backward(&net.spec, &net.data, &cache, &d_out)?;
    net.optimize_step(&grads, learning_rate, Direction::Descend)?;
    Ok((loss / n as f64) as f32)
}
