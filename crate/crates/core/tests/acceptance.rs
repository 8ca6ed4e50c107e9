//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exact criteria (math oracles, shapes, determinism, budgets) fail the
//! process when they fail. The statistical criteria (6, 7, 8) compare the
//! methods on synthetic desk-scale data; their lines report the observed
//! seed counts and a FAIL there records a result, not a defect.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::oracle;
use fedloc_core::dataset::{build_offline_online_split, generate_radio_map, DeviceProfile, FloorplanSpec};
use fedloc_core::federation::{
    decode_sparse, dense_encoded_len, encode_dense, encode_sparse, fedavg_aggregate, fedhil_aggregate,
    fedsgd_aggregate, select_top_h, selection_count, sparse_encoded_len, AggregatorKind, ClientUpdate, HParam,
    SparseUpdate, UpdatePayload,
};
use fedloc_core::localizer::{build_snn, SnnConfig};
use fedloc_core::sae::{self, AeSpec, SaeConfig};
use fedloc_core::seed;
use fedloc_core::simulator::{
    compare_aggregators, h_sweep, run_scenario, scalability_suite, skew_suite, write_rounds_csv, Augmentation,
    ScenarioConfig, DEFAULT_H_VALUES,
};
use fedloc_core::{Network, WeightVector};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_json_file(configs().join(name)).expect("reference config")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (checked, worst) = common::gradient_check(12, 1);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        checked >= 20 && worst < 1e-4 && secs < 30.0,
        format!("{checked} networks, worst relative error {worst:.2e}, {secs:.1} s"),
    )
}

fn criterion_2() -> Outcome {
    let net = build_snn(&SnnConfig::new(172, 61), 0).unwrap();
    let counts: Vec<usize> = net.layers().iter().map(|l| l.param_count()).collect();
    let single = Network::dense(&[172, 86], &[fedloc_core::Activation::Relu], &mut seed::rng(0))
        .unwrap()
        .param_count();
    outcome(
        counts == [22144, 33024, 15677] && net.param_count() == 70845 && single == 14878,
        format!("layers {counts:?}, total {}, 172->86 {single}", net.param_count()),
    )
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

fn criterion_3() -> Outcome {
    let mut rng = seed::rng(3);
    let mut failures = Vec::new();
    for case in 0..100 {
        let n = rng.gen_range(1..6);
        let p = rng.gen_range(1..64);
        let weights: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-4.0..4.0)).collect()).collect();
        let counts: Vec<usize> = (0..n).map(|_| rng.gen_range(1..200)).collect();
        let updates: Vec<ClientUpdate> = weights
            .iter()
            .zip(&counts)
            .map(|(w, &k)| ClientUpdate {
                client_id: "c".into(),
                sample_count: k,
                payload: UpdatePayload::Weights(WeightVector::flat(w.clone())),
            })
            .collect();
        if !close(&fedavg_aggregate(&updates).unwrap().values, &oracle::weighted_mean(&weights, &counts)) {
            failures.push(format!("fedavg case {case}"));
        }

        let gm: Vec<f64> = (0..p).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let lr = rng.gen_range(0.01..1.0);
        let grads: Vec<WeightVector> = weights.iter().cloned().map(WeightVector::flat).collect();
        let got = fedsgd_aggregate(&WeightVector::flat(gm.clone()), &grads, lr).unwrap();
        if !close(&got.values, &oracle::sgd_step(&gm, &weights, lr)) {
            failures.push(format!("fedsgd case {case}"));
        }

        // quarter-step grid forces ties in |change|
        let grid = |rng: &mut rand_chacha::ChaCha8Rng| (0..p).map(|_| rng.gen_range(-6i32..=6) as f64 * 0.25).collect::<Vec<_>>();
        let g = grid(&mut rng);
        let h = rng.gen_range(1..=100) as f64;
        let hp = HParam::new(h).unwrap();
        let mut sparse = Vec::new();
        for _ in 0..n {
            let c = grid(&mut rng);
            let s = select_top_h(&WeightVector::flat(c.clone()), &WeightVector::flat(g.clone()), hp).unwrap();
            if s.indices != oracle::top_h(&c, &g, h) {
                failures.push(format!("top-h case {case}"));
            }
            sparse.push(s);
        }
        let got = fedhil_aggregate(&WeightVector::flat(g.clone()), &sparse).unwrap();
        if !close(&got.values, &oracle::selective_mean(&g, &sparse)) {
            failures.push(format!("selective mean case {case}"));
        }

        let client: Vec<f64> = (0..p).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let full = select_top_h(&WeightVector::flat(client.clone()), &WeightVector::flat(gm.clone()), HParam::new(100.0).unwrap()).unwrap();
        let got = fedhil_aggregate(&WeightVector::flat(gm.clone()), &[full]).unwrap();
        let mid: Vec<f64> = gm.iter().zip(&client).map(|(a, b)| (a + b) / 2.0).collect();
        if !close(&got.values, &mid) {
            failures.push(format!("H=100 midpoint case {case}"));
        }
    }
    let single = fedavg_aggregate(&[
        ClientUpdate { client_id: "a".into(), sample_count: 1, payload: UpdatePayload::Weights(WeightVector::flat(vec![1.0])) },
        ClientUpdate { client_id: "b".into(), sample_count: 3, payload: UpdatePayload::Weights(WeightVector::flat(vec![5.0])) },
    ])
    .unwrap();
    if single.values != [4.0] {
        failures.push("fedavg worked example".into());
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "100 random instances per aggregator match the reference implementations".into()
        } else {
            format!("mismatches: {}", failures.join(", "))
        },
    )
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut rng = seed::rng(4);
    for _ in 0..100 {
        let p = rng.gen_range(1..500);
        let c: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = select_top_h(&WeightVector::flat(c.clone()), &WeightVector::flat(vec![0.0; p]), HParam::new(rng.gen_range(1.0..100.0)).unwrap()).unwrap();
        let bytes = encode_sparse(&s).unwrap();
        ok &= bytes.len() == 16 + 12 * s.indices.len() && decode_sparse(&bytes).unwrap() == s;
        ok &= encode_dense(&c).len() == 16 + 8 * p;
    }
    let p = 1000;
    let lens: Vec<usize> = (1..=100)
        .map(|h| sparse_encoded_len(selection_count(HParam::new(f64::from(h)).unwrap(), p)))
        .collect();
    let strictly = lens.windows(2).all(|w| w[0] < w[1]);
    let h20 = sparse_encoded_len(selection_count(HParam::new(20.0).unwrap(), p));
    let example = SparseUpdate::new(vec![3, 9], vec![0.5, -0.5], 10).unwrap();
    ok &= decode_sparse(&encode_sparse(&example).unwrap()).unwrap() == example;
    outcome(
        ok && strictly && h20 == 2416 && dense_encoded_len(p) == 8016,
        format!("round trips lossless, P=1000: bytes strictly increasing over H=1..100, H=20 {h20} B vs dense {} B", dense_encoded_len(p)),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let spec = FloorplanSpec::synthetic("five-rp", 24, 4, 4.0, 5);
    let cfg = SaeConfig {
        learning_rate: 1.0,
        batch_size: 8,
        ..SaeConfig::default().with_epochs(50)
    };
    let mut reduced = 0;
    let mut augment_ok = true;
    for s in 1..=5u64 {
        let map = generate_radio_map(&spec, s).unwrap();
        let moto = DeviceProfile::identity("MOTO");
        let (offline, _) = build_offline_online_split(&map, &moto, &[moto.clone()], s).unwrap();
        let (model, report) = sae::train_layerwise(&offline, AeSpec::halving(24), &cfg, s).unwrap();
        if report.ae2_final_mse < report.ae2_initial_mse {
            reduced += 1;
        }
        let aug = model.augment(&offline).unwrap();
        let mut want: Vec<&str> = offline.samples().iter().map(|f| f.rp_id.as_str()).collect();
        want.extend(want.clone());
        let got: Vec<&str> = aug.samples().iter().map(|f| f.rp_id.as_str()).collect();
        augment_ok &= aug.len() == 2 * offline.len()
            && got == want
            && aug.samples().iter().all(|f| f.rss.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        reduced >= 4 && augment_ok && secs < 120.0,
        format!("AE2 error reduced in {reduced}/5 seeds, augmentation doubles with labels and bounds kept: {augment_ok}, {secs:.1} s"),
    )
}

fn per_seed(r: &fedloc_core::ScenarioResult) -> Vec<f64> {
    r.summary.per_seed.iter().map(|s| s.mean_error_m).collect()
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let base = ScenarioConfig {
        aggregator: AggregatorKind::None,
        rounds: 1,
        ..config("six_device_hetero.json")
    };
    let with = run_scenario(&ScenarioConfig { augmentation: Augmentation::Custom, ..base.clone() }).unwrap();
    let without = run_scenario(&ScenarioConfig { augmentation: Augmentation::None, ..base }).unwrap();
    let (a, b) = (per_seed(&with), per_seed(&without));
    let wins = a.iter().zip(&b).filter(|(x, y)| x < y).count();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        wins >= 4 && secs < 300.0,
        format!("augmented lower in {wins}/5 seeds (augmented [{}] vs plain [{}] m), {secs:.1} s", fmt(&a), fmt(&b)),
    )
}

fn criterion_7() -> Outcome {
    let cfg = config("building5_noisy.json");
    let results = compare_aggregators(&cfg).unwrap();
    let get = |k| results.iter().find(|r| r.aggregator == k).unwrap();
    let hil = get(AggregatorKind::FedHil);
    let count = |other: &fedloc_core::ScenarioResult| {
        per_seed(hil).iter().zip(per_seed(other)).filter(|(a, b)| **a <= *b).count()
    };
    let vs_avg = count(get(AggregatorKind::FedAvg));
    let vs_sgd = count(get(AggregatorKind::FedSgd));
    let finals = |r: &fedloc_core::ScenarioResult| r.summary.per_seed.iter().map(|s| s.final_round_error_m).collect::<Vec<_>>();
    let vs_frozen = finals(hil)
        .iter()
        .zip(finals(get(AggregatorKind::None)))
        .filter(|(a, b)| **a <= *b)
        .count();
    outcome(
        vs_avg >= 4 && vs_sgd >= 4 && vs_frozen >= 3,
        format!(
            "selective <= fedavg in {vs_avg}/5, <= fedsgd in {vs_sgd}/5, final <= frozen in {vs_frozen}/5 (means: selective [{}], fedavg [{}], fedsgd [{}])",
            fmt(&per_seed(hil)),
            fmt(&per_seed(get(AggregatorKind::FedAvg))),
            fmt(&per_seed(get(AggregatorKind::FedSgd)))
        ),
    )
}

fn criterion_8() -> Outcome {
    let cfg = config("building5_noisy.json");
    let sweep = h_sweep(&cfg, &DEFAULT_H_VALUES).unwrap();
    let seeds = cfg.seeds.len();
    let mut h10_worst = 0;
    let mut h20_top3 = 0;
    for s in 0..seeds {
        let errs: Vec<f64> = sweep.rows.iter().map(|r| r.per_seed_error_m[s]).collect();
        if errs.iter().all(|&e| errs[0] >= e) {
            h10_worst += 1;
        }
        if errs.iter().filter(|&&e| e < errs[1]).count() < 3 {
            h20_top3 += 1;
        }
    }
    let monotone = sweep.rows.windows(2).all(|w| w[0].mean_latency_s < w[1].mean_latency_s);
    let means: Vec<f64> = sweep.rows.iter().map(|r| r.mean_error_m).collect();
    outcome(
        h10_worst >= 3 && h20_top3 >= 3 && monotone,
        format!(
            "H=10 worst in {h10_worst}/{seeds}, H=20 in best three in {h20_top3}/{seeds}, latency strictly increasing: {monotone} (mean error by H [{}])",
            fmt(&means)
        ),
    )
}

fn criterion_9() -> Outcome {
    let trim = |name| ScenarioConfig { rounds: 2, ..config(name) };
    let skew = skew_suite(&trim("skew_cases.json")).unwrap();
    let skew_ok = skew.len() == 5 && skew.iter().all(|c| c.client_count == 6);
    let scale = scalability_suite(&trim("scale_6_12_18.json")).unwrap();
    let counts: Vec<usize> = scale.iter().map(|c| c.client_count).collect();
    let linear = scale.iter().all(|c| {
        c.bytes_per_round
            .iter()
            .zip(&scale[0].bytes_per_round)
            .all(|(b, unit)| b * 6 == unit * c.client_count)
    });
    outcome(
        skew_ok && counts == [6, 12, 18] && linear,
        format!(
            "skew cases {} with clients {:?}, scale clients {counts:?}, bytes per round linear in clients: {linear}",
            skew.len(),
            skew.iter().map(|c| c.client_count).collect::<Vec<_>>()
        ),
    )
}

fn criterion_10() -> Outcome {
    let cfg = ScenarioConfig {
        seeds: vec![7],
        rounds: 3,
        ..config("building5_noisy.json")
    };
    let run = || {
        let mut buf = Vec::new();
        write_rounds_csv(&run_scenario(&cfg).unwrap(), &mut buf).unwrap();
        buf
    };
    let (a, b) = (run(), run());
    outcome(a == b && !a.is_empty(), format!("two runs produced {} and {} identical CSV bytes", a.len(), b.len()))
}

fn main() {
    let start = Instant::now();
    let criteria: [(u32, bool, fn() -> Outcome); 10] = [
        (1, false, criterion_1),
        (2, false, criterion_2),
        (3, false, criterion_3),
        (4, false, criterion_4),
        (5, false, criterion_5),
        (6, true, criterion_6),
        (7, true, criterion_7),
        (8, true, criterion_8),
        (9, false, criterion_9),
        (10, false, criterion_10),
    ];
    let mut hard_failures = 0;
    let mut passed = 0;
    for (id, statistical, run) in criteria {
        let t = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {tag} ({:.1} s) {}", t.elapsed().as_secs_f64(), o.detail);
        passed += usize::from(o.pass);
        if !o.pass && !statistical {
            hard_failures += 1;
        }
    }
    let total = start.elapsed();
    let budget = total < Duration::from_secs(15 * 60);
    println!(
        "criterion 11: {} total runtime {:.1} s against a 900 s budget",
        if budget { "PASS" } else { "FAIL" },
        total.as_secs_f64()
    );
    passed += usize::from(budget);
    hard_failures += usize::from(!budget);
    println!("acceptance: {passed}/11 criteria passed");
    if hard_failures > 0 {
        std::process::exit(1);
    }
}
