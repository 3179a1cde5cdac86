use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use red10_core::neural::{
    backward, danger_spec, forward, predict, predict_shared, q_spec, relation_spec, Activation, Direction, NetSpec,
    ParamStore, RmsProp,
};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straightforward per-sample evaluator written without gemm.
fn reference_forward(spec: &NetSpec, p: &[f64], history: &[f64], flat: &[f64]) -> Vec<f64> {
    let layout = spec.layout();
    let get = |name: &str| {
        let t = layout.tensors.iter().find(|t| t.name == name).unwrap();
        &p[t.offset..t.offset + t.len()]
    };
    let hd = spec.hidden;
    let (w_ih, w_hh, b) = (get("lstm.w_ih"), get("lstm.w_hh"), get("lstm.b"));
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    for t in 0..spec.history_steps {
        let x = &history[t * spec.history_width..(t + 1) * spec.history_width];
        let mut z = vec![0.0; 4 * hd];
        for (r, zr) in z.iter_mut().enumerate() {
            *zr = b[r]
                + (0..spec.history_width).map(|k| w_ih[r * spec.history_width + k] * x[k]).sum::<f64>()
                + (0..hd).map(|k| w_hh[r * hd + k] * h[k]).sum::<f64>();
        }
        for j in 0..hd {
            let (i, f, g, o) = (sigmoid(z[j]), sigmoid(z[hd + j]), z[2 * hd + j].tanh(), sigmoid(z[3 * hd + j]));
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
    }
    let mut a: Vec<f64> = flat.iter().copied().chain(h).collect();
    for (l, &out) in spec.layers.iter().enumerate() {
        let (w, bias) = (get(&format!("mlp.{l}.w")), get(&format!("mlp.{l}.b")));
        let mut z: Vec<f64> = (0..out).map(|r| bias[r] + (0..a.len()).map(|k| w[r * a.len() + k] * a[k]).sum::<f64>()).collect();
        if l + 1 < spec.layers.len() {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        } else if spec.output == Activation::Sigmoid {
            z.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        a = z;
    }
    a
}

fn random_spec(rng: &mut ChaCha8Rng, output: Activation) -> NetSpec {
    let depth = 6;
    let mut layers: Vec<usize> = (0..depth - 1).map(|_| rng.gen_range(2..6)).collect();
    layers.push(if output == Activation::Sigmoid { rng.gen_range(1..4) } else { 1 });
    NetSpec {
        history_steps: rng.gen_range(1..5),
        history_width: rng.gen_range(2..7),
        hidden: rng.gen_range(1..5),
        flat_width: rng.gen_range(1..6),
        layers,
        output,
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

#[test]
fn forward_matches_reference_evaluator() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..10 {
        let act = if case % 2 == 0 { Activation::Identity } else { Activation::Sigmoid };
        let spec = NetSpec { history_steps: 5, history_width: 7, hidden: 4, flat_width: 6, layers: vec![4, 4, 4, 4, 4, 2], output: act };
        let p = random_vec(&mut rng, spec.num_params(), 0.8);
        let n = 3;
        let hist = random_vec(&mut rng, n * spec.history_len(), 1.0);
        let flat = random_vec(&mut rng, n * spec.flat_width, 1.0);
        let out = predict(&spec, &p, &hist, &flat, n).unwrap();
        for s in 0..n {
            let want = reference_forward(&spec, &p, &hist[s * 35..(s + 1) * 35], &flat[s * 6..(s + 1) * 6]);
            for (o, w) in out[s * 2..(s + 1) * 2].iter().zip(&want) {
                assert!((o - w).abs() < 1e-6, "{o} vs {w}");
            }
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let act = if case % 2 == 0 { Activation::Identity } else { Activation::Sigmoid };
        let spec = random_spec(&mut rng, act);
        let n = rng.gen_range(1..4);
        let mut p = random_vec(&mut rng, spec.num_params(), 0.9);
        let hist = random_vec(&mut rng, n * spec.history_len(), 1.0);
        let flat = random_vec(&mut rng, n * spec.flat_width, 1.0);
        let r = random_vec(&mut rng, n * spec.output_width(), 1.0);
        let loss = |p: &[f64]| -> f64 {
            predict(&spec, p, &hist, &flat, n).unwrap().iter().zip(&r).map(|(y, r)| y * r).sum()
        };
        let cache = forward(&spec, &p, &hist, &flat, n).unwrap();
        let g = backward(&spec, &p, &cache, &r).unwrap();
        for i in 0..p.len() {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(&p);
            p[i] = orig - h;
            let down = loss(&p);
            p[i] = orig;
            let num = (up - down) / (2.0 * h);
            let denom = g[i].abs().max(num.abs()).max(1e-4);
            worst = worst.max((g[i] - num).abs() / denom);
        }
    }
    assert!(worst <= 1e-3, "max relative error {worst}");
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradient() {
    let spec = relation_spec(4, 8);
    let store = ParamStore::init(&spec, 3).unwrap();
    let p = store.to_f64();
    let hist = vec![1.0; spec.history_len()];
    let flat = vec![0.5; spec.flat_width];
    let cache = forward(&spec, &p, &hist, &flat, 1).unwrap();
    let g = backward(&spec, &p, &cache, &[0.0; 3]).unwrap();
    assert!(g.iter().all(|&x| x == 0.0));
}

#[test]
fn single_linear_layer_squared_error_gradient() {
    let spec = NetSpec { history_steps: 2, history_width: 3, hidden: 2, flat_width: 3, layers: vec![1], output: Activation::Identity };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_vec(&mut rng, spec.num_params(), 0.5);
    let hist = random_vec(&mut rng, 6, 1.0);
    let flat = random_vec(&mut rng, 3, 1.0);
    let y = 0.3;
    let cache = forward(&spec, &p, &hist, &flat, 1).unwrap();
    let yhat = cache.output()[0];
    let g = backward(&spec, &p, &cache, &[2.0 * (yhat - y)]).unwrap();
    let layout = spec.layout();
    let w = layout.tensors.iter().find(|t| t.name == "mlp.0.w").unwrap();
    // The perceptron input is the flat features followed by the LSTM state;
    // the flat part is known directly.
    for k in 0..3 {
        assert!((g[w.offset + k] - 2.0 * (yhat - y) * flat[k]).abs() < 1e-12);
    }
}

#[test]
fn zero_weights_give_trivial_outputs() {
    let s = relation_spec(4, 8);
    let z = ParamStore::zeros(&s).unwrap();
    let out = predict(&s, &z.data, &vec![0.0; s.history_len()], &vec![0.0; s.flat_width], 1).unwrap();
    assert_eq!(out, vec![0.5, 0.5, 0.5]);
    let q = q_spec(4, 8);
    let z = ParamStore::zeros(&q).unwrap();
    let out = predict(&q, &z.data, &vec![1.0; q.history_len()], &vec![1.0; q.flat_width], 1).unwrap();
    assert_eq!(out, vec![0.0]);
}

#[test]
fn shared_prefix_path_equals_full_forward() {
    let spec = q_spec(8, 16);
    let store = ParamStore::init(&spec, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let hist: Vec<f32> = (0..spec.history_len()).map(|_| rng.gen_range(0..2) as f32).collect();
    let suffix: Vec<f32> = (0..spec.flat_width - 52).map(|_| rng.gen_range(0..2) as f32).collect();
    let actions: Vec<f32> = (0..4 * 52).map(|_| rng.gen_range(0..2) as f32).collect();
    let fast = predict_shared(&spec, &store.data, &hist, &suffix, &actions, 52).unwrap();
    for a in 0..4 {
        let flat: Vec<f32> = actions[a * 52..(a + 1) * 52].iter().chain(&suffix).copied().collect();
        let full = predict(&spec, &store.data, &hist, &flat, 1).unwrap();
        assert!((full[0] - fast[a]).abs() < 1e-5, "{} vs {}", full[0], fast[a]);
    }
}

#[test]
fn init_is_deterministic_with_zero_biases() {
    let spec = danger_spec(8, 16);
    let a = ParamStore::init(&spec, 42).unwrap();
    let b = ParamStore::init(&spec, 42).unwrap();
    assert_eq!(a.data, b.data);
    assert_ne!(a.data, ParamStore::init(&spec, 43).unwrap().data);
    for t in a.tensors.iter().filter(|t| t.is_bias()) {
        assert!(a.data[t.offset..t.offset + t.len()].iter().all(|&x| x == 0.0));
    }
}

#[test]
fn init_weight_statistics() {
    let spec = q_spec(128, 512);
    let store = ParamStore::init(&spec, 9).unwrap();
    // Scale every weight by its bound so all draws share U(-1, 1).
    let mut scaled = Vec::new();
    for t in store.tensors.iter().filter(|t| !t.is_bias()) {
        let k = 1.0 / (t.shape[1] as f64).sqrt();
        for &x in &store.data[t.offset..t.offset + t.len()] {
            assert!((x as f64).abs() <= k + 1e-7);
            scaled.push(x as f64 / k);
        }
    }
    assert!(scaled.len() >= 1_000_000);
    let n = scaled.len() as f64;
    let mean = scaled.iter().sum::<f64>() / n;
    let sigma = (1.0f64 / 3.0).sqrt();
    assert!(mean.abs() <= 3.0 * sigma / n.sqrt(), "mean {mean}");
    let var = scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!((var - 1.0 / 3.0).abs() < 0.005);
}

#[test]
fn zero_gradient_step_only_bumps_version() {
    let spec = danger_spec(4, 8);
    let mut s = ParamStore::init(&spec, 1).unwrap();
    let before = s.data.clone();
    s.optimize_step(&vec![0.0; before.len()], 0.1, Direction::Descend).unwrap();
    assert_eq!(s.data, before);
    assert_eq!(s.version, 1);
}

#[test]
fn descend_then_ascend_returns_to_start() {
    let spec = danger_spec(4, 8);
    let mut s = ParamStore::init(&spec, 1).unwrap();
    let start = s.data.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g: Vec<f32> = (0..start.len()).map(|_| rng.gen_range(-0.01..0.01)).collect();
    s.optimize_step(&g, 1e-3, Direction::Descend).unwrap();
    assert_ne!(s.data, start);
    s.optimizer.reset();
    s.optimize_step(&g, 1e-3, Direction::Ascend).unwrap();
    for (a, b) in s.data.iter().zip(&start) {
        assert!((a - b).abs() <= 1e-6);
    }
}

#[test]
fn rmsprop_decreases_quadratic_monotonically() {
    // f(x) = (x - 3)^2 from x = -2.
    let mut x = vec![-2.0f32];
    let mut opt = RmsProp::new(1);
    let mut losses = Vec::new();
    for _ in 0..200 {
        losses.push((x[0] - 3.0).powi(2));
        let g = vec![2.0 * (x[0] - 3.0)];
        opt.step(&mut x, &g, 0.01, Direction::Descend);
    }
    for w in losses[5..].windows(2) {
        assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
    }
    assert!(losses[199] < losses[0]);
}

#[test]
fn clipping_bounds_the_effective_gradient() {
    let mut opt = RmsProp::new(2);
    let mut a = vec![0.0f32, 0.0];
    opt.step(&mut a, &[300.0, 400.0], 1.0, Direction::Descend);
    // Clipped to (0.6, 0.8); the first step is g / (sqrt(0.01 g^2) + eps).
    assert!((opt.square_avg[0] - 0.01 * 0.36).abs() < 1e-6);
    assert!((a[0] + 0.6 / (0.06 + 1e-5)).abs() < 1e-3);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = relation_spec(4, 8);
    let mut s = ParamStore::init(&spec, 5).unwrap();
    s.version = 17;
    s.save(dir.path(), "relation").unwrap();
    let l = ParamStore::load(dir.path(), "relation").unwrap();
    assert_eq!(l.data, s.data);
    assert_eq!(l.spec, s.spec);
    assert_eq!(l.version, 17);
    let hist = vec![1.0f32; spec.history_len()];
    let flat = vec![0.25f32; spec.flat_width];
    assert_eq!(predict(&spec, &s.data, &hist, &flat, 1).unwrap(), predict(&spec, &l.data, &hist, &flat, 1).unwrap());
    let manifest = std::fs::read_to_string(dir.path().join("relation.json")).unwrap();
    assert!(manifest.contains("\"format_version\": 1"));
    assert!(ParamStore::load(dir.path(), "missing").is_err());
    std::fs::write(dir.path().join("relation.bin"), [0u8; 8]).unwrap();
    assert!(ParamStore::load(dir.path(), "relation").is_err());
}

#[test]
fn default_specs_have_six_layers() {
    for s in [q_spec(128, 512), relation_spec(128, 512), danger_spec(128, 512)] {
        assert_eq!(s.layers.len(), 6);
        assert_eq!(s.history_steps, 5);
        assert_eq!(s.history_width, 208);
    }
    assert_eq!(q_spec(1, 1).flat_width, 559);
    assert_eq!(q_spec(1, 1).output_width(), 1);
    assert_eq!(relation_spec(1, 1).output_width(), 3);
    assert_eq!(danger_spec(1, 1).flat_width, 475);
}
