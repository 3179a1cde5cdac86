//! Relation and danger networks: who is a teammate, and how costly a
//! wrong guess would be at this point of the deck.

use std::path::Path;

use crate::engine::{ground_truth_mask, EngineError, GameState, Seat, TeamMask, NUM_SEATS};
use crate::features::{build_identify_features, IdentifyFeatures, HISTORY_WIDTH, IDENTIFY_FLAT_WIDTH};
use crate::neural::{
    backward, danger_spec, forward, predict, relation_spec, Direction, NeuralError, ParamStore, Real,
};
use crate::policy::{greedy_values_all_masks, to_bytes, PolicyBank};

/// Confidence that each of (up, front, down) is a teammate.
pub type ConfidenceVector = [f32; 3];
/// Risk of treating an opponent as a teammate, in [0, 1].
pub type RiskRatio = f32;

pub const RELATION: &str = "relation";
pub const DANGER: &str = "danger";

/// Relation (θ) and danger (α) parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Identifier {
    pub relation: ParamStore,
    pub danger: ParamStore,
}

impl Identifier {
    pub fn init(hidden: usize, width: usize, seed: u64) -> Result<Identifier, NeuralError> {
        Ok(Identifier {
            relation: ParamStore::init(&relation_spec(hidden, width), seed)?,
            danger: ParamStore::init(&danger_spec(hidden, width), seed.wrapping_add(1))?,
        })
    }

    pub fn zeros(hidden: usize, width: usize) -> Result<Identifier, NeuralError> {
        Ok(Identifier {
            relation: ParamStore::zeros(&relation_spec(hidden, width))?,
            danger: ParamStore::zeros(&danger_spec(hidden, width))?,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), NeuralError> {
        self.save_with(dir, None)
    }

    pub fn save_with(&self, dir: &Path, config: Option<&serde_json::Value>) -> Result<(), NeuralError> {
        self.relation.save_with(&dir.join(RELATION), RELATION, config)?;
        self.danger.save_with(&dir.join(DANGER), DANGER, config)
    }

    pub fn load(dir: &Path) -> Result<Identifier, NeuralError> {
        Ok(Identifier {
            relation: ParamStore::load(&dir.join(RELATION), RELATION)?,
            danger: ParamStore::load(&dir.join(DANGER), DANGER)?,
        })
    }

    pub fn identify(&self, feats: &IdentifyFeatures) -> (ConfidenceVector, RiskRatio) {
        (relation_forward(&self.relation, feats), danger_forward(&self.danger, feats))
    }
}

pub fn relation_forward(theta: &ParamStore, feats: &IdentifyFeatures) -> ConfidenceVector {
    let out = predict(&theta.spec, &theta.data, &feats.history, &feats.flat, 1).expect("relation input widths");
    [out[0], out[1], out[2]]
}

pub fn danger_forward(alpha: &ParamStore, feats: &IdentifyFeatures) -> RiskRatio {
    predict(&alpha.spec, &alpha.data, &feats.history, &feats.flat, 1).expect("danger input widths")[0]
}

/// Cooperate with position j iff its confidence strictly exceeds the risk.
pub fn decide_mask(c: ConfidenceVector, d: RiskRatio) -> TeamMask {
    TeamMask::new(c[0] > d, c[1] > d, c[2] > d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationTargets {
    /// Teammate indicators per seat, in (up, front, down) order.
    pub target_r: [[f32; 3]; NUM_SEATS],
    /// `t / T` for every step of the deck.
    pub target_d: Vec<f32>,
}

pub fn mask_target(mask: TeamMask) -> [f32; 3] {
    mask.bits().map(|b| if b { 1.0 } else { 0.0 })
}

/// Targets for a finished deck of `T` moves.
pub fn make_targets(finished: &GameState) -> IdentificationTargets {
    let big_t = finished.history.len();
    let target_r = std::array::from_fn(|s| mask_target(ground_truth_mask(&finished.pattern, s)));
    let target_d = (0..big_t).map(|t| t as f32 / big_t as f32).collect();
    IdentificationTargets { target_r, target_d }
}

/// One (state, seat) observation with its identification targets.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifySample {
    pub flat: Vec<u8>,
    pub history: Vec<u8>,
    pub target_r: [f32; 3],
    pub target_d: f32,
    pub seat: Seat,
    /// Greedy value of every policy head at this decision, present only for
    /// the seat to move (needed by fine-tuning).
    pub greedy_q: Option<[f32; 8]>,
}

/// Replays `finished` from `initial` and emits one sample per step for each
/// seat in `seats`. With a bank, the mover's sample also gets per-head
/// greedy values and non-movers are skipped.
pub fn record_deck(
    initial: &GameState,
    finished: &GameState,
    seats: &[Seat],
    bank: Option<&PolicyBank>,
) -> Result<Vec<IdentifySample>, EngineError> {
    let targets = make_targets(finished);
    let mut state = initial.clone();
    state.force_pattern(finished.pattern);
    let mut out = Vec::new();
    for (t, (mover, mv)) in finished.history.iter().enumerate() {
        for &seat in seats {
            if bank.is_some() && seat != *mover {
                continue;
            }
            let f = build_identify_features(&state, seat);
            let greedy_q = bank.map(|b| greedy_values_all_masks(b, &state, &state.legal_moves()));
            out.push(IdentifySample {
                flat: to_bytes(&f.flat),
                history: to_bytes(&f.history),
                target_r: targets.target_r[seat],
                target_d: targets.target_d[t],
                seat,
                greedy_q,
            });
        }
        state.apply(mv)?;
    }
    Ok(out)
}

/// Dense inputs of a sample batch, in any precision.
#[derive(Debug, Clone)]
pub struct IdentifyBatch<R> {
    pub n: usize,
    pub history: Vec<R>,
    pub flat: Vec<R>,
    pub target_r: Vec<R>,
    pub target_d: Vec<R>,
    /// `n × 8`, empty when the samples carry no greedy values.
    pub greedy_q: Vec<R>,
}

impl<R: Real> IdentifyBatch<R> {
    pub fn new(samples: &[IdentifySample]) -> IdentifyBatch<R> {
        let n = samples.len();
        let byte = |b: &u8| R::from_f64(*b as f64);
        let mut b = IdentifyBatch {
            n,
            history: Vec::with_capacity(n * HISTORY_WIDTH),
            flat: Vec::with_capacity(n * IDENTIFY_FLAT_WIDTH),
            target_r: Vec::with_capacity(n * 3),
            target_d: Vec::with_capacity(n),
            greedy_q: Vec::new(),
        };
        for s in samples {
            b.history.extend(s.history.iter().map(byte));
            b.flat.extend(s.flat.iter().map(byte));
            b.target_r.extend(s.target_r.iter().map(|&x| R::from_f64(x as f64)));
            b.target_d.push(R::from_f64(s.target_d as f64));
        }
        if samples.iter().all(|s| s.greedy_q.is_some()) {
            for s in samples {
                b.greedy_q.extend(s.greedy_q.unwrap().iter().map(|&x| R::from_f64(x as f64)));
            }
        }
        b
    }
}

/// Value and parameter gradients of an identification objective.
#[derive(Debug, Clone)]
pub struct Objective<R> {
    pub loss_rd: R,
    /// Batch mean of the soft-selected greedy value (zero without greedy values).
    pub q_hat: R,
    pub value: R,
    pub grad_relation: Vec<R>,
    pub grad_danger: Vec<R>,
}

/// `Loss_RD`: mean squared relation error over the three outputs and the
/// batch, plus mean squared danger error over the batch.
pub fn loss_rd_value<R: Real>(c: &[R], d: &[R], batch: &IdentifyBatch<R>) -> R {
    let n = R::from_f64(batch.n as f64);
    let mut rel = R::ZERO;
    for (x, y) in c.iter().zip(&batch.target_r) {
        rel += (*x - *y) * (*x - *y);
    }
    let mut dan = R::ZERO;
    for (x, y) in d.iter().zip(&batch.target_d) {
        dan += (*x - *y) * (*x - *y);
    }
    rel / (R::from_f64(3.0) * n) + dan / n
}

/// Soft policy selection: returns `Q̂ = Σ_m weight(m)·q_m` and its
/// derivatives with respect to (c_up, c_front, c_down) and d.
pub fn soft_selection<R: Real>(c: &[R], d: R, q: &[R], tau: R) -> (R, [R; 3], R) {
    let w: [R; 3] = std::array::from_fn(|j| ((c[j] - d) / tau).sigmoid());
    let mut value = R::ZERO;
    let mut dw = [R::ZERO; 3];
    for (m, &qm) in q.iter().enumerate().take(8) {
        let bits = TeamMask::from_index(m).bits();
        let f: [R; 3] = std::array::from_fn(|j| if bits[j] { w[j] } else { R::ONE - w[j] });
        value += qm * f[0] * f[1] * f[2];
        for j in 0..3 {
            let others = f[(j + 1) % 3] * f[(j + 2) % 3];
            let sign = if bits[j] { R::ONE } else { -R::ONE };
            dw[j] += qm * others * sign;
        }
    }
    let mut dc = [R::ZERO; 3];
    let mut dd = R::ZERO;
    for j in 0..3 {
        let s = w[j] * (R::ONE - w[j]) / tau;
        dc[j] = dw[j] * s;
        dd -= dw[j] * s;
    }
    (value, dc, dd)
}

/// Evaluates the objective and its gradients.
///
/// Without greedy values the objective is `Loss_RD` itself. With them it is
/// the intrinsic reward `mean Q̂ − λ·Loss_RD`.
pub fn objective<R: Real>(
    relation: (&crate::neural::NetSpec, &[R]),
    danger: (&crate::neural::NetSpec, &[R]),
    batch: &IdentifyBatch<R>,
    lambda: R,
    tau: R,
) -> Result<Objective<R>, NeuralError> {
    let n = batch.n;
    let nr = R::from_f64(n as f64);
    let rc = forward(relation.0, relation.1, &batch.history, &batch.flat, n)?;
    let dc = forward(danger.0, danger.1, &batch.history, &batch.flat, n)?;
    let c = rc.output();
    let d = dc.output();
    let loss_rd = loss_rd_value(c, d, batch);

    // Loss_RD gradients.
    let three = R::from_f64(3.0);
    let two = R::from_f64(2.0);
    let mut g_c: Vec<R> = c.iter().zip(&batch.target_r).map(|(x, y)| two * (*x - *y) / (three * nr)).collect();
    let mut g_d: Vec<R> = d.iter().zip(&batch.target_d).map(|(x, y)| two * (*x - *y) / nr).collect();

    let intrinsic = !batch.greedy_q.is_empty();
    let mut q_hat = R::ZERO;
    let value;
    if intrinsic {
        g_c.iter_mut().for_each(|g| *g = -lambda * *g);
        g_d.iter_mut().for_each(|g| *g = -lambda * *g);
        for i in 0..n {
            let (v, dci, ddi) = soft_selection(&c[i * 3..i * 3 + 3], d[i], &batch.greedy_q[i * 8..i * 8 + 8], tau);
            q_hat += v / nr;
            for j in 0..3 {
                g_c[i * 3 + j] += dci[j] / nr;
            }
            g_d[i] += ddi / nr;
        }
        value = q_hat - lambda * loss_rd;
    } else {
        value = loss_rd;
    }
    Ok(Objective {
        loss_rd,
        q_hat,
        value,
        grad_relation: backward(relation.0, relation.1, &rc, &g_c)?,
        grad_danger: backward(danger.0, danger.1, &dc, &g_d)?,
    })
}

/// One descent step on `Loss_RD`; returns the pre-step loss.
pub fn train_step(id: &mut Identifier, samples: &[IdentifySample], learning_rate: f32) -> Result<f32, NeuralError> {
    let mut batch = IdentifyBatch::<f32>::new(samples);
    batch.greedy_q.clear();
    let obj = objective((&id.relation.spec, &id.relation.data), (&id.danger.spec, &id.danger.data), &batch, 0.0, 1.0)?;
    id.relation.optimize_step(&obj.grad_relation, learning_rate, Direction::Descend)?;
    id.danger.optimize_step(&obj.grad_danger, learning_rate, Direction::Descend)?;
    Ok(obj.loss_rd)
}

/// One ascent step on the intrinsic reward. The policy bank is only read
/// (through the precomputed greedy values), never updated.
pub fn intrinsic_finetune_step(
    id: &mut Identifier,
    samples: &[IdentifySample],
    lambda: f32,
    tau: f32,
    learning_rate: f32,
) -> Result<Objective<f32>, NeuralError> {
    let batch = IdentifyBatch::<f32>::new(samples);
    if batch.greedy_q.is_empty() {
        return Err(NeuralError::ShapeMismatch { what: "greedy values", expected: samples.len() * 8, got: 0 });
    }
    let obj = objective((&id.relation.spec, &id.relation.data), (&id.danger.spec, &id.danger.data), &batch, lambda, tau)?;
    id.relation.optimize_step(&obj.grad_relation, learning_rate, Direction::Ascend)?;
    id.danger.optimize_step(&obj.grad_danger, learning_rate, Direction::Ascend)?;
    Ok(obj)
}

/// Mean absolute danger error against `t/T` and mean confidences, over samples.
pub fn danger_mae(id: &Identifier, samples: &[IdentifySample]) -> f32 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut total = 0.0f64;
    for chunk in samples.chunks(512) {
        let b = IdentifyBatch::<f32>::new(chunk);
        let d = predict(&id.danger.spec, &id.danger.data, &b.history, &b.flat, b.n).expect("danger input widths");
        total += d.iter().zip(&b.target_d).map(|(x, y)| (x - y).abs() as f64).sum::<f64>();
    }
    (total / samples.len() as f64) as f32
}
