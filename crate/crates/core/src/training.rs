//! Actor/learner training and the three-phase schedule.
//!
//! Actors self-play whole decks with a snapshot of the global parameters,
//! turn them into transitions and flush batches into a bounded
//! [`SharedBuffer`]; learners pop fixed-size batches and publish new
//! snapshots. Phase 1 trains the eight policy heads under public
//! identities, phase 2 fits the relation and danger networks on decks
//! played by the frozen bank, and phase 3 fine-tunes them on the
//! intrinsic reward.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};
use parking_lot::{Mutex, RwLock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{idrl_act, Models};
use crate::engine::{ground_truth_mask, EngineError, GameState, Pattern, TeamMask, NUM_SEATS};
use crate::identify::{intrinsic_finetune_step, record_deck, train_step, IdentifySample, Identifier};
use crate::neural::{manifest_path, NeuralError, ParamStore};
use crate::policy::{
    learner_update, mc_returns, q_net_name, select_action, terminal_reward, DecisionInput, PolicyBank,
    PolicyError, RLConfig, Trajectory, Transition,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("shared buffer closed")]
    BufferClosed,
    #[error("missing checkpoint {0}; run the earlier phase first")]
    MissingCheckpoint(PathBuf),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid run: {0}")]
    BadRun(String),
}

/// Bounded multi-producer queue of batches with transition counters.
#[derive(Debug)]
pub struct SharedBuffer<T> {
    tx: Sender<Vec<T>>,
    rx: Receiver<Vec<T>>,
    closed: AtomicBool,
    pushed: AtomicU64,
    popped: AtomicU64,
}

impl<T> SharedBuffer<T> {
    /// A buffer holding at most `capacity` batches; producers block when full.
    pub fn new(capacity: usize) -> SharedBuffer<T> {
        let (tx, rx) = bounded(capacity.max(1));
        SharedBuffer { tx, rx, closed: AtomicBool::new(false), pushed: AtomicU64::new(0), popped: AtomicU64::new(0) }
    }

    /// A buffer that never blocks producers, for a single thread that both
    /// produces and consumes.
    pub fn unbounded() -> SharedBuffer<T> {
        let (tx, rx) = unbounded();
        SharedBuffer { tx, rx, closed: AtomicBool::new(false), pushed: AtomicU64::new(0), popped: AtomicU64::new(0) }
    }

    pub fn push(&self, batch: Vec<T>) -> Result<(), TrainError> {
        let n = batch.len() as u64;
        let mut batch = batch;
        loop {
            if self.closed.load(Ordering::Acquire) {
                return Err(TrainError::BufferClosed);
            }
            match self.tx.send_timeout(batch, Duration::from_millis(20)) {
                Ok(()) => {
                    self.pushed.fetch_add(n, Ordering::AcqRel);
                    return Ok(());
                }
                Err(crossbeam_channel::SendTimeoutError::Timeout(b)) => batch = b,
                Err(crossbeam_channel::SendTimeoutError::Disconnected(_)) => return Err(TrainError::BufferClosed),
            }
        }
    }

    pub fn try_pop(&self) -> Option<Vec<T>> {
        let b = self.rx.try_recv().ok()?;
        self.popped.fetch_add(b.len() as u64, Ordering::AcqRel);
        Some(b)
    }

    /// Waits for a batch; `None` once closed and drained.
    pub fn pop(&self) -> Option<Vec<T>> {
        loop {
            match self.rx.recv_timeout(Duration::from_millis(20)) {
                Ok(b) => {
                    self.popped.fetch_add(b.len() as u64, Ordering::AcqRel);
                    return Some(b);
                }
                Err(RecvTimeoutError::Timeout) if !self.closed.load(Ordering::Acquire) => continue,
                Err(_) => return self.try_pop(),
            }
        }
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::Release);
    }

    pub fn pushed(&self) -> u64 {
        self.pushed.load(Ordering::Acquire)
    }

    pub fn popped(&self) -> u64 {
        self.popped.load(Ordering::Acquire)
    }

    /// Transitions pushed but not yet popped.
    pub fn resident(&self) -> u64 {
        self.pushed() - self.popped()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Policy,
    Identify,
    Finetune,
}

/// Where training decks come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DeckSource {
    /// Seeded full-deck deals; a fraction is forced to the all-teammates pattern.
    Deal { cooperative_fraction: f64 },
    /// The same start state every deck (small rigged games).
    Fixed(GameState),
}

impl DeckSource {
    pub fn start<R: Rng>(&self, rng: &mut R) -> GameState {
        match self {
            DeckSource::Deal { cooperative_fraction } => {
                let mut g = GameState::deal(rng.gen());
                if *cooperative_fraction > 0.0 && rng.gen_bool(*cooperative_fraction) {
                    g.force_pattern(Pattern::all_cooperative());
                }
                g
            }
            DeckSource::Fixed(g) => g.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub hidden: usize,
    pub width: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { hidden: crate::neural::DEFAULT_HIDDEN, width: crate::neural::DEFAULT_WIDTH }
    }
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub phase: Phase,
    pub config: RLConfig,
    pub net: NetConfig,
    pub actors: usize,
    /// Decks to self-play in this phase.
    pub decks: u64,
    /// Optional wall-clock cap; breaks bit-exact reproducibility when hit.
    pub max_seconds: Option<f64>,
    pub seed: u64,
    pub dir: PathBuf,
    /// One thread interleaving one actor with all learners.
    pub deterministic: bool,
    pub source: DeckSource,
    /// Buffer capacity in batches (parallel mode).
    pub buffer_batches: usize,
    /// Configuration echoed into saved checkpoint manifests.
    pub echo: Option<serde_json::Value>,
}

impl TrainRun {
    pub fn new(phase: Phase, dir: impl Into<PathBuf>) -> TrainRun {
        TrainRun {
            phase,
            config: RLConfig::default(),
            net: NetConfig::default(),
            actors: 1,
            decks: 1000,
            max_seconds: None,
            seed: 0,
            dir: dir.into(),
            deterministic: true,
            source: DeckSource::Deal { cooperative_fraction: 0.1 },
            buffer_batches: 64,
            echo: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub phase: Phase,
    pub loss: f32,
    pub decks: u64,
    pub buffer_depth: u64,
    /// Head trained by this step (policy phase only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub decks: u64,
    /// Decisions recorded: moves played (policy phase) or identification
    /// samples (later phases).
    pub moves: u64,
    pub updates: u64,
    pub pushed: u64,
    pub popped: u64,
    pub log: Vec<LogRecord>,
    pub seconds: f64,
}

fn append_log(dir: &Path, log: &[LogRecord]) -> Result<(), TrainError> {
    fs::create_dir_all(dir)?;
    let mut f = OpenOptions::new().create(true).append(true).open(dir.join("train_log.jsonl"))?;
    for r in log {
        writeln!(f, "{}", serde_json::to_string(r).expect("log record serializes"))?;
    }
    Ok(())
}

/// Self-plays one deck with every seat on its ground-truth head and returns
/// the per-seat trajectories (returns filled) and the finished state.
pub fn play_policy_deck<R: Rng>(
    bank: &PolicyBank,
    start: GameState,
    config: &RLConfig,
    rng: &mut R,
) -> Result<(Vec<Trajectory>, GameState), TrainError> {
    let mut state = start;
    let masks: [TeamMask; NUM_SEATS] = std::array::from_fn(|s| ground_truth_mask(&state.pattern, s));
    let mut trajs: Vec<Trajectory> = (0..NUM_SEATS).map(|_| Trajectory::default()).collect();
    while !state.is_terminal() {
        let seat = state.turn;
        let moves = state.legal_moves();
        let i = select_action(bank, masks[seat], &state, &moves, config.epsilon, rng);
        let mv = moves[i];
        trajs[seat].steps.push(Transition::new(&DecisionInput::new(&state, seat), &mv, masks[seat], seat));
        state.apply(&mv)?;
    }
    for (seat, traj) in trajs.iter_mut().enumerate() {
        traj.terminal = true;
        if let Some(last) = traj.steps.last_mut() {
            last.reward = terminal_reward(&state, seat);
        }
        mc_returns(traj, config.discount_for(masks[seat]))?;
    }
    Ok((trajs, state))
}

/// Per-actor local buffers, one per head, flushed in batches of `flush_size`.
struct LocalBuffers {
    pending: Vec<Vec<Transition>>,
    flush_size: usize,
}

impl LocalBuffers {
    fn new(flush_size: usize) -> LocalBuffers {
        LocalBuffers { pending: (0..8).map(|_| Vec::new()).collect(), flush_size }
    }

    fn add(&mut self, trajs: Vec<Trajectory>, buffers: &[SharedBuffer<Transition>]) -> Result<(), TrainError> {
        for traj in trajs {
            for tr in traj.steps {
                self.pending[tr.mask.index()].push(tr);
            }
        }
        for (m, pending) in self.pending.iter_mut().enumerate() {
            while pending.len() >= self.flush_size {
                let rest = pending.split_off(self.flush_size);
                buffers[m].push(std::mem::replace(pending, rest))?;
            }
        }
        Ok(())
    }
}

/// Accumulates popped batches and updates one head whenever `batch_size`
/// transitions are available.
struct QLearner {
    mask: TeamMask,
    net: ParamStore,
    pending: Vec<Transition>,
}

impl QLearner {
    fn drain(
        &mut self,
        buffer: &SharedBuffer<Transition>,
        config: &RLConfig,
        blocking: bool,
        mut on_update: impl FnMut(&ParamStore, f32),
    ) -> Result<u64, TrainError> {
        let mut updates = 0;
        loop {
            while self.pending.len() >= config.batch_size {
                let rest = self.pending.split_off(config.batch_size);
                let batch = std::mem::replace(&mut self.pending, rest);
                let loss = learner_update(&mut self.net, &batch, config.learning_rate)?;
                updates += 1;
                on_update(&self.net, loss);
            }
            let next = if blocking { buffer.pop() } else { buffer.try_pop() };
            match next {
                Some(b) => self.pending.extend(b),
                None => return Ok(updates),
            }
        }
    }
}

fn actor_rng(seed: u64, actor: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (actor as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn out_of_time(start: Instant, max_seconds: Option<f64>) -> bool {
    max_seconds.is_some_and(|s| start.elapsed().as_secs_f64() >= s)
}

/// Phase 1: trains all eight heads from scratch (or from `initial`).
pub fn train_policy(run: &TrainRun, initial: Option<PolicyBank>) -> Result<(PolicyBank, TrainReport), TrainError> {
    run.config.validate()?;
    let started = Instant::now();
    let bank = match initial {
        Some(b) => b,
        None => PolicyBank::init(run.net.hidden, run.net.width, run.seed)?,
    };
    let buffers: Vec<SharedBuffer<Transition>> = (0..8)
        .map(|_| if run.deterministic { SharedBuffer::unbounded() } else { SharedBuffer::new(run.buffer_batches) })
        .collect();
    let mut report = TrainReport::default();

    if run.deterministic {
        let mut rng = actor_rng(run.seed, 0);
        let mut local = LocalBuffers::new(run.config.flush_size);
        let mut learners: Vec<QLearner> = TeamMask::all()
            .map(|m| QLearner { mask: m, net: bank.net(m).clone(), pending: Vec::new() })
            .collect();
        let mut snapshot = bank;
        let mut step = 0u64;
        for deck in 0..run.decks {
            if out_of_time(started, run.max_seconds) {
                break;
            }
            let start = run.source.start(&mut rng);
            let (trajs, end) = play_policy_deck(&snapshot, start, &run.config, &mut rng)?;
            local.add(trajs, &buffers)?;
            report.decks = deck + 1;
            report.moves += end.history.len() as u64;
            for l in learners.iter_mut() {
                let m = l.mask.index();
                let updated = l.drain(&buffers[m], &run.config, false, |_, loss| {
                    step += 1;
                    report.log.push(LogRecord {
                        step,
                        phase: Phase::Policy,
                        loss,
                        decks: deck + 1,
                        buffer_depth: buffers[m].resident(),
                        mask: Some(TeamMask::from_index(m).code()),
                    });
                })?;
                if updated > 0 {
                    snapshot.nets[m] = l.net.clone();
                    report.updates += updated;
                }
            }
        }
        report.pushed = buffers.iter().map(|b| b.pushed()).sum();
        report.popped = buffers.iter().map(|b| b.popped()).sum();
        report.seconds = started.elapsed().as_secs_f64();
        let bank = PolicyBank { nets: learners.into_iter().map(|l| l.net).collect() };
        return Ok((bank, report));
    }

    // Parallel mode: actor threads plus one learner thread per head.
    let globals: Vec<RwLock<Arc<ParamStore>>> = bank.nets.iter().map(|n| RwLock::new(Arc::new(n.clone()))).collect();
    let decks_done = AtomicU64::new(0);
    let moves = AtomicU64::new(0);
    let step = AtomicU64::new(0);
    let log = Mutex::new(Vec::new());
    let updates = AtomicU64::new(0);
    let actor_error: Mutex<Option<TrainError>> = Mutex::new(None);
    std::thread::scope(|scope| {
        let mut learner_handles = Vec::new();
        for m in TeamMask::all() {
            let (globals, buffers, log, step, updates, decks_done) = (&globals, &buffers, &log, &step, &updates, &decks_done);
            let config = &run.config;
            learner_handles.push(scope.spawn(move || -> Result<ParamStore, TrainError> {
                let mut learner = QLearner { mask: m, net: (**globals[m.index()].read()).clone(), pending: Vec::new() };
                learner.drain(&buffers[m.index()], config, true, |net, loss| {
                    *globals[m.index()].write() = Arc::new(net.clone());
                    updates.fetch_add(1, Ordering::Relaxed);
                    let s = step.fetch_add(1, Ordering::Relaxed) + 1;
                    log.lock().push(LogRecord {
                        step: s,
                        phase: Phase::Policy,
                        loss,
                        decks: decks_done.load(Ordering::Relaxed),
                        buffer_depth: buffers[m.index()].resident(),
                        mask: Some(m.code()),
                    });
                })?;
                Ok(learner.net)
            }));
        }
        let mut actor_handles = Vec::new();
        for a in 0..run.actors.max(1) {
            let (globals, buffers, decks_done, actor_error, moves) = (&globals, &buffers, &decks_done, &actor_error, &moves);
            actor_handles.push(scope.spawn(move || {
                let mut rng = actor_rng(run.seed, a);
                let mut local = LocalBuffers::new(run.config.flush_size);
                loop {
                    if decks_done.fetch_add(1, Ordering::AcqRel) >= run.decks || out_of_time(started, run.max_seconds) {
                        break;
                    }
                    // Refresh the snapshot at deck boundaries.
                    let snapshot = PolicyBank { nets: globals.iter().map(|g| (**g.read()).clone()).collect() };
                    let start = run.source.start(&mut rng);
                    let res = play_policy_deck(&snapshot, start, &run.config, &mut rng).and_then(|(trajs, end)| {
                        moves.fetch_add(end.history.len() as u64, Ordering::Relaxed);
                        local.add(trajs, buffers)
                    });
                    if let Err(e) = res {
                        *actor_error.lock() = Some(e);
                        break;
                    }
                }
            }));
        }
        for h in actor_handles {
            h.join().expect("actor thread panicked");
        }
        for b in &buffers {
            b.close();
        }
        let mut nets = Vec::new();
        for h in learner_handles {
            nets.push(h.join().expect("learner thread panicked"));
        }
        nets
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .and_then(|nets| {
        if let Some(e) = actor_error.lock().take() {
            return Err(e);
        }
        report.decks = decks_done.load(Ordering::Acquire).min(run.decks);
        report.updates = updates.load(Ordering::Acquire);
        report.moves = moves.load(Ordering::Acquire);
        report.pushed = buffers.iter().map(|b| b.pushed()).sum();
        report.popped = buffers.iter().map(|b| b.popped()).sum();
        let mut log = log.into_inner();
        log.sort_by_key(|r| r.step);
        report.log = log;
        report.seconds = started.elapsed().as_secs_f64();
        Ok((PolicyBank { nets }, report))
    })
}

/// Plays one deck with every seat on its ground-truth head.
pub fn play_ground_truth_deck<R: Rng>(bank: &PolicyBank, start: GameState, epsilon: f64, rng: &mut R) -> Result<GameState, TrainError> {
    let mut state = start;
    let masks: [TeamMask; NUM_SEATS] = std::array::from_fn(|s| ground_truth_mask(&state.pattern, s));
    while !state.is_terminal() {
        let moves = state.legal_moves();
        let mv = moves[select_action(bank, masks[state.turn], &state, &moves, epsilon, rng)];
        state.apply(&mv)?;
    }
    Ok(state)
}

/// Plays one deck with every seat running the identification pipeline.
/// Also returns each decision as a transition on the head it used, with
/// its Monte Carlo return filled in.
pub fn play_idrl_deck<R: Rng>(
    models: &Models,
    start: GameState,
    config: &RLConfig,
    rng: &mut R,
) -> Result<(GameState, Vec<Transition>), TrainError> {
    let mut state = start;
    let mut steps = Vec::new();
    while !state.is_terminal() {
        let d = idrl_act(models, &state, None, None, config.epsilon, rng);
        let mask = d.insight.as_ref().map_or(TeamMask::LONE, |i| i.mask);
        steps.push(Transition::new(&DecisionInput::new(&state, state.turn), &d.mv, mask, state.turn));
        state.apply(&d.mv)?;
    }
    // Terminal-only reward: G = r·γ(mask)^(own decisions remaining).
    let mut remaining = [0i32; NUM_SEATS];
    for tr in steps.iter_mut().rev() {
        let r = terminal_reward(&state, tr.seat);
        tr.ret = r * config.discount_for(tr.mask).powi(remaining[tr.seat]) as f32;
        remaining[tr.seat] += 1;
    }
    Ok((state, steps))
}

/// Samples from a batch of held-out or training decks under ground-truth masks.
pub fn identification_samples(bank: &PolicyBank, seeds: impl IntoIterator<Item = u64>, epsilon: f64) -> Result<Vec<IdentifySample>, TrainError> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for seed in seeds {
        let start = GameState::deal(seed);
        let end = play_ground_truth_deck(bank, start.clone(), epsilon, &mut rng)?;
        out.extend(record_deck(&start, &end, &[0, 1, 2, 3], None)?);
    }
    Ok(out)
}

/// Drains samples into fixed-size identification updates.
struct IdLearner {
    pending: Vec<IdentifySample>,
}

impl IdLearner {
    fn take_batches(&mut self, size: usize) -> Vec<Vec<IdentifySample>> {
        let mut out = Vec::new();
        while self.pending.len() >= size {
            let rest = self.pending.split_off(size);
            out.push(std::mem::replace(&mut self.pending, rest));
        }
        out
    }
}

fn require(dir: &Path, name: &str) -> Result<(), TrainError> {
    let path = manifest_path(&dir.join(name), name);
    if path.exists() {
        Ok(())
    } else {
        Err(TrainError::MissingCheckpoint(path))
    }
}

pub fn require_bank(dir: &Path) -> Result<(), TrainError> {
    for m in TeamMask::all() {
        require(dir, &q_net_name(m))?;
    }
    Ok(())
}

pub fn require_identifier(dir: &Path) -> Result<(), TrainError> {
    require(dir, crate::identify::RELATION)?;
    require(dir, crate::identify::DANGER)
}

/// Phases 2 and 3: identification training on decks generated by `play`.
/// Phase 2 decks use the frozen bank under ground-truth masks and record all
/// four seats; phase 3 decks use the current identification pipeline and
/// record only the mover, with per-head greedy values.
fn train_identification(
    run: &TrainRun,
    bank: &PolicyBank,
    initial: Identifier,
) -> Result<(Models, TrainReport), TrainError> {
    run.config.validate()?;
    let started = Instant::now();
    let finetune = run.phase == Phase::Finetune;
    let mut models = Models { bank: bank.clone(), identifier: initial };
    let mut report = TrainReport::default();
    let buffer: SharedBuffer<IdentifySample> = SharedBuffer::unbounded();
    let mut learner = IdLearner { pending: Vec::new() };
    let mut policy_pending: Vec<Vec<Transition>> = (0..8).map(|_| Vec::new()).collect();
    let mut rng = actor_rng(run.seed, 0);
    let mut step = 0;
    // Generation and learning interleave in one thread: the sample stream
    // of phase 3 depends on the parameters being tuned.
    for deck in 0..run.decks {
        if out_of_time(started, run.max_seconds) {
            break;
        }
        let start = match &run.source {
            DeckSource::Deal { .. } => GameState::deal(rng.gen()),
            DeckSource::Fixed(g) => g.clone(),
        };
        let samples = if finetune {
            let (end, transitions) = play_idrl_deck(&models, start.clone(), &run.config, &mut rng)?;
            if run.config.finetune_policy {
                for tr in transitions {
                    policy_pending[tr.mask.index()].push(tr);
                }
                for (m, pending) in policy_pending.iter_mut().enumerate() {
                    while pending.len() >= run.config.batch_size {
                        let rest = pending.split_off(run.config.batch_size);
                        let batch = std::mem::replace(pending, rest);
                        let loss = learner_update(&mut models.bank.nets[m], &batch, run.config.learning_rate)?;
                        step += 1;
                        report.updates += 1;
                        report.log.push(LogRecord {
                            step,
                            phase: run.phase,
                            loss,
                            decks: deck + 1,
                            buffer_depth: 0,
                            mask: Some(TeamMask::from_index(m).code()),
                        });
                    }
                }
            }
            record_deck(&start, &end, &[0, 1, 2, 3], Some(&models.bank))?
        } else {
            let end = play_ground_truth_deck(bank, start.clone(), run.config.epsilon, &mut rng)?;
            record_deck(&start, &end, &[0, 1, 2, 3], None)?
        };
        for chunk in samples.chunks(run.config.flush_size) {
            buffer.push(chunk.to_vec())?;
        }
        while let Some(b) = buffer.try_pop() {
            learner.pending.extend(b);
        }
        report.decks = deck + 1;
        report.moves += samples.len() as u64;
        for batch in learner.take_batches(run.config.batch_size) {
            let loss = if finetune {
                let obj = intrinsic_finetune_step(&mut models.identifier, &batch, run.config.lambda, run.config.tau, run.config.learning_rate)?;
                obj.value
            } else {
                train_step(&mut models.identifier, &batch, run.config.learning_rate)?
            };
            step += 1;
            report.updates += 1;
            report.log.push(LogRecord { step, phase: run.phase, loss, decks: deck + 1, buffer_depth: buffer.resident(), mask: None });
        }
    }
    report.pushed = buffer.pushed();
    report.popped = buffer.popped();
    report.seconds = started.elapsed().as_secs_f64();
    Ok((models, report))
}

/// Runs one phase against the checkpoint directory: checks that earlier
/// phases left their checkpoints, trains, saves, and appends the log.
pub fn run_phase(run: &TrainRun) -> Result<TrainReport, TrainError> {
    let dir = &run.dir;
    let report = match run.phase {
        Phase::Policy => {
            let (bank, report) = train_policy(run, None)?;
            bank.save_with(dir, run.echo.as_ref())?;
            report
        }
        Phase::Identify => {
            require_bank(dir)?;
            let bank = PolicyBank::load(dir)?;
            let id = Identifier::init(run.net.hidden, run.net.width, run.seed)?;
            let (models, report) = train_identification(run, &bank, id)?;
            models.identifier.save_with(dir, run.echo.as_ref())?;
            report
        }
        Phase::Finetune => {
            require_bank(dir)?;
            require_identifier(dir)?;
            let bank = PolicyBank::load(dir)?;
            let id = Identifier::load(dir)?;
            let (models, report) = train_identification(run, &bank, id)?;
            models.identifier.save_with(dir, run.echo.as_ref())?;
            if run.config.finetune_policy {
                models.bank.save_with(dir, run.echo.as_ref())?;
            }
            report
        }
    };
    append_log(dir, &report.log)?;
    Ok(report)
}

/// Identification training without touching disk (used by tests and the
/// acceptance harness).
pub fn train_identifier(run: &TrainRun, bank: &PolicyBank, initial: Identifier) -> Result<(Identifier, TrainReport), TrainError> {
    train_identification(run, bank, initial).map(|(m, r)| (m.identifier, r))
}

/// Fine-tuning without touching disk; the bank changes only when
/// `finetune_policy` is set.
pub fn finetune_models(run: &TrainRun, models: Models) -> Result<(Models, TrainReport), TrainError> {
    train_identification(run, &models.bank, models.identifier)
}
