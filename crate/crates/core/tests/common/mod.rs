#![allow(dead_code)]

use fedloc_core::nn::{self, Activation, Loss, Network, Targets};
use fedloc_core::seed;
use rand::Rng;

pub enum OwnedTargets {
    Dense(Vec<Vec<f64>>),
    Classes(Vec<usize>),
}

impl OwnedTargets {
    pub fn view(&self) -> Targets<'_> {
        match self {
            OwnedTargets::Dense(t) => Targets::Dense(t),
            OwnedTargets::Classes(c) => Targets::Classes(c),
        }
    }
}

pub struct Problem {
    pub net: Network,
    pub inputs: Vec<Vec<f64>>,
    pub targets: OwnedTargets,
    pub loss: Loss,
}

/// Random network of 1 to 4 layers, widths 1 to 64, with a random loss and
/// matching output activation.
pub fn random_problem(seed: u64, loss: Loss) -> Problem {
    let mut rng = seed::rng(seed);
    let depth = rng.gen_range(1..=4);
    let mut dims = vec![rng.gen_range(1..=64)];
    for _ in 0..depth {
        dims.push(rng.gen_range(1..=64));
    }
    if loss == Loss::SparseCategoricalCrossentropy && *dims.last().unwrap() < 2 {
        *dims.last_mut().unwrap() = 2;
    }
    let hidden = [Activation::Relu, Activation::Sigmoid, Activation::Linear];
    let mut acts: Vec<Activation> = (0..depth - 1).map(|_| hidden[rng.gen_range(0..3)]).collect();
    acts.push(match loss {
        Loss::Mse => [Activation::Sigmoid, Activation::Linear, Activation::Relu][rng.gen_range(0..3)],
        Loss::SparseCategoricalCrossentropy => {
            [Activation::Sigmoid, Activation::Softmax][rng.gen_range(0..2)]
        }
    });
    let net = Network::dense(&dims, &acts, &mut rng).unwrap();
    let n = rng.gen_range(1..=4);
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let out = *dims.last().unwrap();
    let targets = match loss {
        Loss::Mse => OwnedTargets::Dense(
            (0..n)
                .map(|_| (0..out).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect(),
        ),
        Loss::SparseCategoricalCrossentropy => OwnedTargets::Classes((0..n).map(|_| rng.gen_range(0..out)).collect()),
    };
    Problem {
        net,
        inputs,
        targets,
        loss,
    }
}

/// Central finite differences of the mean loss with respect to every
/// parameter, perturbing the flat weight vector directly.
pub fn numeric_gradient(p: &Problem, h: f64) -> Vec<f64> {
    let base = p.net.flatten();
    let mut net = p.net.clone();
    let mut w = base.values.clone();
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let orig = w[i];
        w[i] = orig + h;
        net.load_flat(&w).unwrap();
        let plus = nn::mean_loss(&net, &p.inputs, p.targets.view(), p.loss).unwrap();
        w[i] = orig - h;
        net.load_flat(&w).unwrap();
        let minus = nn::mean_loss(&net, &p.inputs, p.targets.view(), p.loss).unwrap();
        w[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

/// `||a - b|| / max(||a|| + ||b||, 1e-12)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()) + norm(&mut b.iter().copied());
    diff / scale.max(1e-12)
}

/// Worst relative error over `count` random problems per loss.
pub fn gradient_check(count: u64, first_seed: u64) -> (usize, f64) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for loss in [Loss::Mse, Loss::SparseCategoricalCrossentropy] {
        for s in 0..count {
            let p = random_problem(first_seed + s, loss);
            let analytic = nn::gradient(&p.net, &p.inputs, p.targets.view(), p.loss).unwrap();
            let numeric = numeric_gradient(&p, 1e-6);
            worst = worst.max(relative_error(&analytic.values, &numeric));
            checked += 1;
        }
    }
    (checked, worst)
}

/// A scenario small enough to run in well under a second per seed.
pub fn tiny_config() -> fedloc_core::ScenarioConfig {
    fedloc_core::ScenarioConfig::from_json_str(
        r#"{
            "name": "tiny",
            "floorplans": [{"synthetic": {"building_id": "b1", "ap_count": 12, "path_length_m": 10,
                            "shadowing_std_db": 4.0, "layout_seed": 3}}],
            "clients": [{"device": "BLU"}, {"device": "S7"}],
            "rounds": 3,
            "noise": {"burst_std_db": 10.0, "rp_fraction": 0.3},
            "seeds": [1, 2],
            "model": {"projection": 8, "hidden": 8, "output": "softmax"},
            "training": {"learning_rate": 0.1, "offline_epochs": 20, "online_epochs": 2, "batch_size": 8},
            "sae": {"ae1_epochs": 5, "ae3_epochs": 5, "ae2_epochs": 5, "learning_rate": 0.5, "batch_size": 8}
        }"#,
    )
    .unwrap()
}

/// Reference implementations written for clarity, not speed.
pub mod oracle {
    use fedloc_core::federation::SparseUpdate;

    pub fn weighted_mean(weights: &[Vec<f64>], counts: &[usize]) -> Vec<f64> {
        let total: usize = counts.iter().sum();
        (0..weights[0].len())
            .map(|i| {
                let mut acc = 0.0;
                for (w, &k) in weights.iter().zip(counts) {
                    acc += w[i] * k as f64 / total as f64;
                }
                acc
            })
            .collect()
    }

    pub fn sgd_step(gm: &[f64], grads: &[Vec<f64>], lr: f64) -> Vec<f64> {
        (0..gm.len())
            .map(|i| {
                let mean = grads.iter().map(|g| g[i]).sum::<f64>() / grads.len() as f64;
                gm[i] - lr * mean
            })
            .collect()
    }

    /// Sorts every index by descending absolute change, then ascending
    /// index, and keeps the first `ceil(h * p / 100)`.
    pub fn top_h(client: &[f64], global: &[f64], h: f64) -> Vec<u32> {
        let p = client.len();
        let k = ((h * p as f64 / 100.0).ceil() as usize).clamp(1, p);
        let mut idx: Vec<usize> = (0..p).collect();
        idx.sort_by(|&a, &b| {
            let da = (global[a] - client[a]).abs();
            let db = (global[b] - client[b]).abs();
            db.partial_cmp(&da).unwrap().then(a.cmp(&b))
        });
        let mut chosen: Vec<u32> = idx[..k].iter().map(|&i| i as u32).collect();
        chosen.sort();
        chosen
    }

    /// For each index: the mean of the global value and every uploaded
    /// value at that index, found by scanning each update.
    pub fn selective_mean(gm: &[f64], updates: &[SparseUpdate]) -> Vec<f64> {
        (0..gm.len())
            .map(|i| {
                let mut sum = gm[i];
                let mut n = 1.0;
                for u in updates {
                    for (j, &idx) in u.indices.iter().enumerate() {
                        if idx as usize == i {
                            sum += u.values[j];
                            n += 1.0;
                        }
                    }
                }
                sum / n
            })
            .collect()
    }
}
