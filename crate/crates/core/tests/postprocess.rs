use osrpc::likelihood::{joint_loglik, Params};
use osrpc::postprocess::{
    build_similarity, compute_dic, evaluate, pattern_classification, relabel_trace, summarize,
};
use osrpc::sampler::fit;
use osrpc::simulate::{simulate_replicate, SimulationCase, SimulationConfig, SimulationTruth};
use osrpc::stats::RngStream;
use osrpc::{CategoricalDataset, ChainRng, ChainTrace, Draw, Hyperparameters, ModelState, Mode, SamplerConfig};
use rand::seq::SliceRandom;

fn small(case: SimulationCase, seed: u64) -> (CategoricalDataset, SimulationTruth) {
    simulate_replicate(
        &SimulationConfig {
            case,
            n_per_subpop: 30,
            p: 10,
            seed,
            ..Default::default()
        },
        0,
    )
    .unwrap()
}

fn short_fit(data: &CategoricalDataset, mode: Mode, seed: u64) -> ChainTrace {
    let config = SamplerConfig {
        mode,
        adaptive_iters: 200,
        adaptive_burnin: 100,
        fixed_iters: 100,
        fixed_burnin: 40,
        thin: 3,
        seed,
        ..Default::default()
    };
    let hyper = Hyperparameters {
        k0: 10,
        ks: 5,
        ..Default::default()
    };
    fit(data, &config, &hyper, ChainRng::new(seed, 0, 0)).unwrap().trace
}

fn draw_loglik(trace: &ChainTrace, d: &Draw, data: &CategoricalDataset) -> f64 {
    let g = (trace.mode == Mode::OsRpc).then(|| trace.g_hat());
    joint_loglik(&d.params(trace.s0), data, g.as_deref())
}

#[test]
fn similarity_is_symmetric_with_unit_diagonal_and_label_free() {
    let (data, _) = small(SimulationCase::GlobalOnly, 1);
    let trace = short_fit(&data, Mode::OsLcm, 1);
    let sim = build_similarity(&trace).unwrap();
    let n = data.n();
    for i in 0..n {
        assert_eq!(sim.get(i, i), 1.0);
        for j in 0..n {
            assert_eq!(sim.get(i, j), sim.get(j, i));
        }
    }
    let mut shuffled = trace.clone();
    let mut rng = RngStream::new(3, 0);
    for d in &mut shuffled.draws {
        let mut perm: Vec<usize> = (0..d.k()).collect();
        perm.shuffle(&mut rng);
        d.permute(&perm, data.n_subpops());
    }
    assert_eq!(build_similarity(&shuffled).unwrap(), sim);
}

#[test]
fn empty_trace_has_no_similarity() {
    let (data, _) = small(SimulationCase::GlobalOnly, 2);
    let mut trace = short_fit(&data, Mode::OsLcm, 2);
    trace.draws.clear();
    assert!(build_similarity(&trace).is_err());
}

#[test]
fn relabeling_changes_only_labels_and_is_idempotent() {
    let (data, _) = small(SimulationCase::GlobalLocalHybrid, 3);
    let trace = short_fit(&data, Mode::OsRpc, 3);
    let sim = build_similarity(&trace).unwrap();
    let once = relabel_trace(&trace, &sim, trace.k);
    assert_eq!(build_similarity(&once).unwrap(), sim);
    for (a, b) in trace.draws.iter().zip(&once.draws) {
        let (la, lb) = (draw_loglik(&trace, a, &data), draw_loglik(&once, b, &data));
        assert!((la - lb).abs() <= 1e-9 * la.abs());
        let occ = |d: &Draw| {
            let mut v = vec![0; d.k()];
            d.c.iter().for_each(|&c| v[c] += 1);
            v.sort();
            v
        };
        assert_eq!(occ(a), occ(b));
    }
    let twice = relabel_trace(&once, &build_similarity(&once).unwrap(), once.k);
    assert_eq!(twice, once);
    assert_eq!(summarize(&twice, &data).unwrap(), summarize(&once, &data).unwrap());
}

#[test]
fn constant_trace_summary_is_the_state() {
    let (data, _) = small(SimulationCase::GlobalOnly, 4);
    let hyper = Hyperparameters {
        k0: 3,
        ..Default::default()
    };
    let config = SamplerConfig {
        mode: Mode::OsLcm,
        ..Default::default()
    };
    let state = ModelState::initialize(&data, &hyper, &config, &mut ChainRng::new(1, 0, 0)).unwrap();
    let ll = joint_loglik(&Params::of(&state), &data, None);
    let draw = Draw::from_state(1, &state, ll, 0.0);
    let trace = ChainTrace {
        mode: Mode::OsLcm,
        n: data.n(),
        p: data.p(),
        n_subpops: data.n_subpops(),
        n_outcomes: data.n_outcomes(),
        levels: data.levels().to_vec(),
        k: 3,
        ks: vec![],
        s0: 1.0,
        draws: vec![draw.clone(), draw.clone(), draw],
        g_mean: vec![1.0; data.n() * data.p()],
    };
    let s = summarize(&trace, &data).unwrap();
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close(&s.pi_med, &state.pi));
    assert!(close(&s.theta0_med, &state.theta0));
    assert!(close(&s.xi_med, &state.probit.xi));
    assert!(close(&s.delta_med, &state.probit.delta));
    assert!((s.pi_med.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((s.dic - (-2.0 * ll)).abs() < 1e-8 * ll.abs());
    assert_eq!(compute_dic(&trace, &data, &s).unwrap(), s.dic);
}

#[test]
fn perfect_recovery_scores_perfectly() {
    let (data, truth) = small(SimulationCase::GlobalOnly, 5);
    let trace = short_fit(&data, Mode::OsRpc, 5);
    let mut s = summarize(&trace, &data).unwrap();
    // Overwrite the estimates with the truth.
    s.k = 3;
    s.c_hat = truth.true_c.clone();
    s.outcome_prob = (0..data.n_subpops())
        .map(|sp| (0..3).map(|t| truth.outcome_probs(t, sp).to_vec()).collect())
        .collect();
    s.nu_med = vec![1.0; data.n_subpops() * data.p()];
    let m = evaluate(&s, &truth, &data).unwrap();
    assert_eq!(m.pattern_classification, vec![1.0; 3]);
    assert_eq!(m.p_y_mse, 0.0);
    assert_eq!(m.nu_mse, Some(0.0));
    assert_eq!(m.y_ord, 0.0);
}

#[test]
fn classification_is_invariant_to_relabeling_either_side() {
    let mut rng = RngStream::new(9, 0);
    let truth: Vec<usize> = (0..300).map(|i| i % 3).collect();
    let pred: Vec<usize> = truth
        .iter()
        .map(|&t| if rand::Rng::random::<f64>(&mut rng) < 0.2 { (t + 1) % 4 } else { t })
        .collect();
    let base = pattern_classification(&pred, &truth, 4, 3);
    let relabeled: Vec<usize> = pred.iter().map(|&c| [2, 3, 0, 1][c]).collect();
    assert_eq!(pattern_classification(&relabeled, &truth, 4, 3), base);
    let truth_perm: Vec<usize> = truth.iter().map(|&t| [1, 2, 0][t]).collect();
    let rates = pattern_classification(&pred, &truth_perm, 4, 3);
    assert_eq!(rates, vec![base[2], base[0], base[1]]);
}

#[test]
fn evaluate_rejects_mismatched_truth() {
    let (data, _) = small(SimulationCase::GlobalOnly, 6);
    let (_, other) = simulate_replicate(
        &SimulationConfig {
            n_per_subpop: 31,
            p: 10,
            seed: 6,
            ..Default::default()
        },
        0,
    )
    .unwrap();
    let trace = short_fit(&data, Mode::OsLcm, 6);
    let s = summarize(&trace, &data).unwrap();
    assert!(evaluate(&s, &other, &data).is_err());
}

#[test]
fn dic_prefers_the_true_number_of_clusters() {
    let (data, _) = simulate_replicate(
        &SimulationConfig {
            n_per_subpop: 60,
            p: 20,
            seed: 12,
            ..Default::default()
        },
        0,
    )
    .unwrap();
    let dic_for = |k0: usize| {
        // A threshold this small keeps every cluster the prior allows.
        let config = SamplerConfig {
            mode: Mode::OsLcm,
            adaptive_iters: 300,
            adaptive_burnin: 150,
            fixed_iters: 300,
            fixed_burnin: 100,
            thin: 4,
            nonempty_threshold: 1e-9,
            seed: 4,
            ..Default::default()
        };
        let hyper = Hyperparameters {
            k0,
            ..Default::default()
        };
        let fitted = fit(&data, &config, &hyper, ChainRng::new(4, 0, 0)).unwrap();
        osrpc::analyze(&fitted.trace, &data, fitted.k_active).unwrap().1.dic
    };
    let (right, wrong) = (dic_for(3), dic_for(1));
    assert!(right < wrong, "K=3 DIC {right} vs K=1 DIC {wrong}");
}

#[test]
fn summary_blocks_are_renormalized_and_modal_levels_in_range() {
    let (data, _) = small(SimulationCase::GlobalLocalHybrid, 7);
    let trace = short_fit(&data, Mode::OsRpc, 7);
    let s = summarize(&trace, &data).unwrap();
    let width: usize = data.levels().iter().sum();
    for row in s.theta0_med.chunks(width) {
        let mut off = 0;
        for &d in data.levels() {
            assert!((row[off..off + d].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            off += d;
        }
    }
    for lam in &s.lambda_med {
        assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    for pat in &s.modal_patterns {
        for (j, &r) in pat.iter().enumerate() {
            assert!(r < data.levels()[j]);
        }
    }
    for (i, &c) in s.c_hat.iter().enumerate() {
        let row = &s.assign_prob_med[i * s.k..(i + 1) * s.k];
        assert!(row.iter().all(|&p| p <= row[c]));
    }
    assert_eq!(s.l_hat.len(), data.n() * data.p());
}

#[test]
fn trace_file_round_trip_is_exact_and_one_based() {
    let (data, _) = small(SimulationCase::GlobalLocalHybrid, 8);
    let trace = short_fit(&data, Mode::OsRpc, 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    trace.write_jsonl(&path).unwrap();
    assert_eq!(ChainTrace::read_jsonl(&path).unwrap(), trace);

    let text = std::fs::read_to_string(&path).unwrap();
    let first_c: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    assert_eq!(first_c["block"], "C");
    let labels: Vec<f64> = first_c["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(labels.iter().all(|&c| c >= 1.0 && c <= trace.k as f64));

    let broken = text.replacen("\"block\":\"C\",\"values\":[", "\"block\":\"C\",\"values\":[0,", 1);
    std::fs::write(&path, broken).unwrap();
    assert!(ChainTrace::read_jsonl(&path).is_err());
}
