use serde::{Deserialize, Serialize};

use super::real::{gemm, Real, View};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
}

/// Topology of a recurrent-history network: an LSTM reads `history_steps`
/// rows of `history_width`, and its last hidden state is appended to the
/// flat input of a ReLU perceptron.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub history_steps: usize,
    pub history_width: usize,
    pub hidden: usize,
    pub flat_width: usize,
    /// Output widths of the perceptron layers; the last is the net output.
    pub layers: Vec<usize>,
    pub output: Activation,
}

impl NetSpec {
    pub fn input_width(&self) -> usize {
        self.flat_width + self.hidden
    }

    pub fn output_width(&self) -> usize {
        *self.layers.last().expect("validated spec has layers")
    }

    pub fn history_len(&self) -> usize {
        self.history_steps * self.history_width
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let ok = self.history_steps > 0
            && self.history_width > 0
            && self.hidden > 0
            && !self.layers.is_empty()
            && self.layers.iter().all(|&w| w > 0);
        if ok {
            Ok(())
        } else {
            Err(NeuralError::BadSpec(format!("{self:?}")))
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }

    pub fn num_params(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_bias(&self) -> bool {
        self.shape.len() == 1
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LinearOffsets {
    pub w: usize,
    pub b: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

/// Parameter offsets in the flat buffer. Weights are `[out × in]` row-major.
#[derive(Debug, Clone)]
pub struct Layout {
    pub tensors: Vec<TensorInfo>,
    pub total: usize,
    pub(crate) w_ih: usize,
    pub(crate) w_hh: usize,
    pub(crate) b_lstm: usize,
    pub(crate) linear: Vec<LinearOffsets>,
}

impl Layout {
    fn new(spec: &NetSpec) -> Layout {
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let offset = total;
            total += shape.iter().product::<usize>();
            tensors.push(TensorInfo { name, shape, offset });
            offset
        };
        let g = 4 * spec.hidden;
        let w_ih = push("lstm.w_ih".into(), vec![g, spec.history_width]);
        let w_hh = push("lstm.w_hh".into(), vec![g, spec.hidden]);
        let b_lstm = push("lstm.b".into(), vec![g]);
        let mut linear = Vec::new();
        let mut fan_in = spec.input_width();
        for (i, &out) in spec.layers.iter().enumerate() {
            let w = push(format!("mlp.{i}.w"), vec![out, fan_in]);
            let b = push(format!("mlp.{i}.b"), vec![out]);
            linear.push(LinearOffsets { w, b, fan_in, fan_out: out });
            fan_in = out;
        }
        Layout { tensors, total, w_ih, w_hh, b_lstm, linear }
    }
}

/// Activations kept by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct Cache<R> {
    pub n: usize,
    history: Vec<R>,
    /// Post-activation gates (i, f, g, o) per step, `[steps][n × 4H]`.
    gates: Vec<R>,
    /// Cell states `[steps + 1][n × H]`, index 0 is the zero initial state.
    cells: Vec<R>,
    hiddens: Vec<R>,
    /// Perceptron input `[n × (flat + H)]`.
    input: Vec<R>,
    /// Post-activation outputs of every perceptron layer.
    acts: Vec<Vec<R>>,
}

impl<R: Real> Cache<R> {
    pub fn output(&self) -> &[R] {
        self.acts.last().expect("at least one layer")
    }
}

fn check(what: &'static str, expected: usize, got: usize) -> Result<(), NeuralError> {
    if expected == got {
        Ok(())
    } else {
        Err(NeuralError::ShapeMismatch { what, expected, got })
    }
}

fn add_bias<R: Real>(z: &mut [R], bias: &[R]) {
    for row in z.chunks_mut(bias.len()) {
        for (x, &b) in row.iter_mut().zip(bias) {
            *x += b;
        }
    }
}

/// Runs the LSTM over `n` histories and returns (gates, cells, hiddens).
fn lstm_forward<R: Real>(
    spec: &NetSpec,
    layout: &Layout,
    params: &[R],
    history: &[R],
    n: usize,
) -> (Vec<R>, Vec<R>, Vec<R>) {
    let h = spec.hidden;
    let g4 = 4 * h;
    let steps = spec.history_steps;
    let hl = spec.history_len();
    let mut gates = vec![R::ZERO; steps * n * g4];
    let mut cells = vec![R::ZERO; (steps + 1) * n * h];
    let mut hiddens = vec![R::ZERO; (steps + 1) * n * h];
    let bias = &params[layout.b_lstm..layout.b_lstm + g4];
    for t in 0..steps {
        let z = &mut gates[t * n * g4..(t + 1) * n * g4];
        for row in z.chunks_mut(g4) {
            row.copy_from_slice(bias);
        }
        // x_t rows are strided through the per-sample history blocks.
        let xv = View { off: t * spec.history_width, rs: hl, cs: 1 };
        gemm(n, spec.history_width, g4, history, xv, params, View::trans(layout.w_ih, spec.history_width), R::ONE, z, View::rows(0, g4));
        if t > 0 {
            let hp = &hiddens[t * n * h..(t + 1) * n * h];
            gemm(n, h, g4, hp, View::rows(0, h), params, View::trans(layout.w_hh, h), R::ONE, z, View::rows(0, g4));
        }
        let (c_prev, c_next) = cells.split_at_mut((t + 1) * n * h);
        let c_prev = &c_prev[t * n * h..];
        let c_next = &mut c_next[..n * h];
        let h_next = &mut hiddens[(t + 1) * n * h..(t + 2) * n * h];
        for s in 0..n {
            let row = &mut z[s * g4..(s + 1) * g4];
            for j in 0..h {
                let i_ = row[j].sigmoid();
                let f_ = row[h + j].sigmoid();
                let g_ = row[2 * h + j].tanh();
                let o_ = row[3 * h + j].sigmoid();
                row[j] = i_;
                row[h + j] = f_;
                row[2 * h + j] = g_;
                row[3 * h + j] = o_;
                let c = f_ * c_prev[s * h + j] + i_ * g_;
                c_next[s * h + j] = c;
                h_next[s * h + j] = o_ * c.tanh();
            }
        }
    }
    (gates, cells, hiddens)
}

/// Runs perceptron layers from `from` on, given the pre-activation of
/// layer `from` in `z`. Returns post-activations of layers `from..`.
fn mlp_tail<R: Real>(spec: &NetSpec, layout: &Layout, params: &[R], first: Vec<R>, from: usize, n: usize) -> Vec<Vec<R>> {
    let last = layout.linear.len() - 1;
    let mut acts: Vec<Vec<R>> = Vec::with_capacity(layout.linear.len() - from);
    let mut pending = Some(first);
    for l in from..layout.linear.len() {
        let mut z = match pending.take() {
            Some(z) => z,
            None => Vec::new(),
        };
        if l > from {
            let lo = layout.linear[l];
            let prev = acts.last().expect("previous layer");
            z = vec![R::ZERO; n * lo.fan_out];
            for row in z.chunks_mut(lo.fan_out) {
                row.copy_from_slice(&params[lo.b..lo.b + lo.fan_out]);
            }
            gemm(n, lo.fan_in, lo.fan_out, prev, View::rows(0, lo.fan_in), params, View::trans(lo.w, lo.fan_in), R::ONE, &mut z, View::rows(0, lo.fan_out));
        }
        if l == last {
            if spec.output == Activation::Sigmoid {
                z.iter_mut().for_each(|x| *x = x.sigmoid());
            }
        } else {
            z.iter_mut().for_each(|x| *x = x.relu());
        }
        acts.push(z);
    }
    acts
}

/// Batched forward pass over `n` samples. `history` is `n × steps × width`
/// and `flat` is `n × flat_width`, both row-major.
pub fn forward<R: Real>(spec: &NetSpec, params: &[R], history: &[R], flat: &[R], n: usize) -> Result<Cache<R>, NeuralError> {
    let layout = spec.layout();
    check("params", layout.total, params.len())?;
    check("history", n * spec.history_len(), history.len())?;
    check("flat", n * spec.flat_width, flat.len())?;
    let (gates, cells, hiddens) = lstm_forward(spec, &layout, params, history, n);
    let h = spec.hidden;
    let iw = spec.input_width();
    let mut input = vec![R::ZERO; n * iw];
    let h_last = &hiddens[spec.history_steps * n * h..];
    for s in 0..n {
        input[s * iw..s * iw + spec.flat_width].copy_from_slice(&flat[s * spec.flat_width..(s + 1) * spec.flat_width]);
        input[s * iw + spec.flat_width..(s + 1) * iw].copy_from_slice(&h_last[s * h..(s + 1) * h]);
    }
    let l0 = layout.linear[0];
    let mut z = vec![R::ZERO; n * l0.fan_out];
    add_bias(&mut z, &params[l0.b..l0.b + l0.fan_out]);
    gemm(n, iw, l0.fan_out, &input, View::rows(0, iw), params, View::trans(l0.w, iw), R::ONE, &mut z, View::rows(0, l0.fan_out));
    let acts = mlp_tail(spec, &layout, params, z, 0, n);
    Ok(Cache { n, history: history.to_vec(), gates, cells, hiddens, input, acts })
}

/// Outputs only, for a batch.
pub fn predict<R: Real>(spec: &NetSpec, params: &[R], history: &[R], flat: &[R], n: usize) -> Result<Vec<R>, NeuralError> {
    let mut cache = forward(spec, params, history, flat, n)?;
    Ok(cache.acts.pop().expect("output layer"))
}

/// Evaluates many inputs that share one history and the tail of the flat
/// vector. Row `a` of `prefixes` (width `p`) supplies flat columns `0..p`;
/// `suffix` supplies columns `p..flat_width`. The LSTM and the shared part
/// of the first layer are computed once.
pub fn predict_shared<R: Real>(spec: &NetSpec, params: &[R], history: &[R], suffix: &[R], prefixes: &[R], p: usize) -> Result<Vec<R>, NeuralError> {
    let layout = spec.layout();
    check("params", layout.total, params.len())?;
    check("history", spec.history_len(), history.len())?;
    check("flat suffix", spec.flat_width - p, suffix.len())?;
    if p == 0 || prefixes.len() % p != 0 {
        return Err(NeuralError::ShapeMismatch { what: "prefixes", expected: p, got: prefixes.len() });
    }
    let n = prefixes.len() / p;
    let (_, _, hiddens) = lstm_forward(spec, &layout, params, history, 1);
    let h = spec.hidden;
    let iw = spec.input_width();
    let l0 = layout.linear[0];
    let mut shared_in = Vec::with_capacity(iw - p);
    shared_in.extend_from_slice(suffix);
    shared_in.extend_from_slice(&hiddens[spec.history_steps * h..]);
    let mut base = params[l0.b..l0.b + l0.fan_out].to_vec();
    gemm(1, iw - p, l0.fan_out, &shared_in, View::rows(0, iw - p), params, View::trans(l0.w + p, iw), R::ONE, &mut base, View::rows(0, l0.fan_out));
    let mut z = vec![R::ZERO; n * l0.fan_out];
    add_bias(&mut z, &base);
    gemm(n, p, l0.fan_out, prefixes, View::rows(0, p), params, View::trans(l0.w, iw), R::ONE, &mut z, View::rows(0, l0.fan_out));
    let mut acts = mlp_tail(spec, &layout, params, z, 0, n);
    Ok(acts.pop().expect("output layer"))
}

/// Reverse-mode gradients of `Σ d_out ⊙ output` with respect to every parameter.
pub fn backward<R: Real>(spec: &NetSpec, params: &[R], cache: &Cache<R>, d_out: &[R]) -> Result<Vec<R>, NeuralError> {
    let layout = spec.layout();
    let n = cache.n;
    check("params", layout.total, params.len())?;
    check("output gradient", n * spec.output_width(), d_out.len())?;
    let mut grads = vec![R::ZERO; layout.total];
    let nl = layout.linear.len();

    // Gradient at the pre-activation of the last layer.
    let mut dz: Vec<R> = d_out.to_vec();
    if spec.output == Activation::Sigmoid {
        for (g, &y) in dz.iter_mut().zip(cache.output()) {
            *g *= y * (R::ONE - y);
        }
    }
    let mut d_input = Vec::new();
    for l in (0..nl).rev() {
        let lo = layout.linear[l];
        let x: &[R] = if l == 0 { &cache.input } else { &cache.acts[l - 1] };
        // dW = dzᵀ · x, db = Σ dz.
        gemm(lo.fan_out, n, lo.fan_in, &dz, View::trans(0, lo.fan_out), x, View::rows(0, lo.fan_in), R::ONE, &mut grads, View::rows(lo.w, lo.fan_in));
        for row in dz.chunks(lo.fan_out) {
            for (g, &d) in grads[lo.b..lo.b + lo.fan_out].iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![R::ZERO; n * lo.fan_in];
        gemm(n, lo.fan_out, lo.fan_in, &dz, View::rows(0, lo.fan_out), params, View::rows(lo.w, lo.fan_in), R::ZERO, &mut dx, View::rows(0, lo.fan_in));
        if l == 0 {
            d_input = dx;
        } else {
            for (g, &a) in dx.iter_mut().zip(&cache.acts[l - 1]) {
                if a <= R::ZERO {
                    *g = R::ZERO;
                }
            }
            dz = dx;
        }
    }

    // Back through time.
    let h = spec.hidden;
    let g4 = 4 * h;
    let iw = spec.input_width();
    let hl = spec.history_len();
    let mut dh = vec![R::ZERO; n * h];
    for s in 0..n {
        dh[s * h..(s + 1) * h].copy_from_slice(&d_input[s * iw + spec.flat_width..(s + 1) * iw]);
    }
    let mut dc = vec![R::ZERO; n * h];
    let mut da = vec![R::ZERO; n * g4];
    for t in (0..spec.history_steps).rev() {
        let gates = &cache.gates[t * n * g4..(t + 1) * n * g4];
        let c_prev = &cache.cells[t * n * h..(t + 1) * n * h];
        let c_cur = &cache.cells[(t + 1) * n * h..(t + 2) * n * h];
        for s in 0..n {
            for j in 0..h {
                let k = s * h + j;
                let gi = gates[s * g4 + j];
                let gf = gates[s * g4 + h + j];
                let gg = gates[s * g4 + 2 * h + j];
                let go = gates[s * g4 + 3 * h + j];
                let tc = c_cur[k].tanh();
                let dct = dc[k] + dh[k] * go * (R::ONE - tc * tc);
                let row = &mut da[s * g4..(s + 1) * g4];
                row[j] = dct * gg * gi * (R::ONE - gi);
                row[h + j] = dct * c_prev[k] * gf * (R::ONE - gf);
                row[2 * h + j] = dct * gi * (R::ONE - gg * gg);
                row[3 * h + j] = dh[k] * tc * go * (R::ONE - go);
                dc[k] = dct * gf;
            }
        }
        let xv = View { off: t * spec.history_width, rs: hl, cs: 1 };
        gemm(g4, n, spec.history_width, &da, View::trans(0, g4), &cache.history, View { off: xv.off, rs: xv.rs, cs: 1 }, R::ONE, &mut grads, View::rows(layout.w_ih, spec.history_width));
        for row in da.chunks(g4) {
            for (g, &d) in grads[layout.b_lstm..layout.b_lstm + g4].iter_mut().zip(row) {
                *g += d;
            }
        }
        if t > 0 {
            let hp = &cache.hiddens[t * n * h..(t + 1) * n * h];
            gemm(g4, n, h, &da, View::trans(0, g4), hp, View::rows(0, h), R::ONE, &mut grads, View::rows(layout.w_hh, h));
            gemm(n, g4, h, &da, View::rows(0, g4), params, View::rows(layout.w_hh, h), R::ZERO, &mut dh, View::rows(0, h));
        }
    }
    Ok(grads)
}
