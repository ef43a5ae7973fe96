use plc::eval::{accuracy, graph_agreement, train_logistic, SplitSpec};
use plc::graph::build_signed_graph;
use plc::loss::Hyperparams;
use plc::optim::{fit_with_observer, FitResult};
use plc::synth::{generate, SynthConfig};
use plc::tensor::Matrix;
use std::time::Instant;

fn classify_acc(
    w: &Matrix,
    labels: &[usize],
    split: &SplitSpec,
    epochs: usize,
    seed: u64,
) -> f64 {
    let (_, train_idx, test_idx) = split.split(labels.len()).unwrap();
    let gather = |idx: &[usize]| -> (Matrix, Vec<usize>) {
        let mut m = Matrix::zeros(idx.len(), w.cols());
        let mut l = Vec::with_capacity(idx.len());
        for (row, &i) in idx.iter().enumerate() {
            m.row_mut(row).copy_from_slice(w.row(i));
            l.push(labels[i]);
        }
        (m, l)
    };
    let (tx, ty) = gather(&train_idx);
    let (ex, ey) = gather(&test_idx);
    if ty.iter().collect::<std::collections::HashSet<_>>().len() < 2 {
        return f64::NAN;
    }
    let clf = train_logistic(&tx, &ty, 0.1, epochs, 1e-4, seed).unwrap();
    accuracy(&clf, &ex, &ey)
}

fn run_fit(seed: u64, beta: f64, track: bool) -> (FitResult, Vec<Matrix>, Vec<f64>, SynthConfig) {
    let cfg = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let data = generate(&cfg).unwrap();
    let hp = Hyperparams {
        alpha: 1e-2,
        beta,
        rank: 8,
        seed: seed + 1000,
        ..Hyperparams::default()
    };
    let mut snapshots = Vec::new();
    let mut agreements = Vec::new();
    let truth_graph = data.true_graph.clone();
    let result = fit_with_observer(&data.x, &data.x_aug, &hp, cfg.n_classes, |state| {
        if track {
            snapshots.push(state.model.weights.clone());
            agreements
                .push(graph_agreement(&state.graph, &truth_graph).unwrap());
        }
    })
    .unwrap();
    (result, snapshots, agreements, cfg)
}

fn main() {
    let split = SplitSpec {
        unlabeled: 0.7,
        train: 0.15,
        test: 0.15,
        seed: 7,
    };

    println!("=== criterion 1/3: beta=1 vs beta=0 accuracy, seed consistency ===");
    let mut graphs = Vec::new();
    for seed in 0..4u64 {
        let t0 = Instant::now();
        let (plc_fit, _, _, cfg) = run_fit(seed, 1.0, false);
        let t_plc = t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        let (cp_fit, _, _, _) = run_fit(seed, 0.0, false);
        let t_cp = t0.elapsed().as_secs_f64();
        let data = generate(&cfg).unwrap();
        let acc_plc = classify_acc(&plc_fit.state.model.weights, &data.labels, &split, 500, 3);
        let acc_cp = classify_acc(&cp_fit.state.model.weights, &data.labels, &split, 500, 3);
        let agree = graph_agreement(
            &build_signed_graph(&plc_fit.pseudo_labels),
            &data.true_graph,
        )
        .unwrap();
        println!(
            "seed {seed}: acc_plc={acc_plc:.4} acc_cp={acc_cp:.4} margin={:+.4} agree={agree:.4} iters={} conv={} t_plc={t_plc:.1}s t_cp={t_cp:.1}s",
            acc_plc - acc_cp,
            plc_fit.state.outer_iter,
            plc_fit.converged,
        );
        graphs.push(build_signed_graph(&plc_fit.pseudo_labels));
    }
    for i in 0..graphs.len() {
        for j in i + 1..graphs.len() {
            // graphs come from different datasets; pairwise consistency needs same data
        }
    }

    println!("=== criterion 3 proper: same data, different fit seeds ===");
    let cfg = SynthConfig::default();
    let data = generate(&cfg).unwrap();
    let mut seed_graphs = Vec::new();
    for fit_seed in [100u64, 200, 300] {
        let hp = Hyperparams {
            alpha: 1e-2,
            beta: 1.0,
            rank: 8,
            seed: fit_seed,
            ..Hyperparams::default()
        };
        let result = plc::optim::fit(&data.x, &data.x_aug, &hp, cfg.n_classes).unwrap();
        seed_graphs.push(build_signed_graph(&result.pseudo_labels));
    }
    for i in 0..seed_graphs.len() {
        for j in i + 1..seed_graphs.len() {
            let a = graph_agreement(&seed_graphs[i], &seed_graphs[j]).unwrap();
            println!("pair ({i},{j}): agreement {a:.4}");
        }
    }

    println!("=== criterion 2/4: agreement curve + two-phase on seed 0 ===");
    let (result, snapshots, agreements, cfg) = run_fit(0, 1.0, true);
    let data = generate(&cfg).unwrap();
    println!("agreements: {:?}", agreements.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    let cps: Vec<f64> = result.state.loss_history.iter().map(|r| r.cp).collect();
    println!("cp losses: {:?}", cps.iter().map(|c| (c * 10.0).round() / 10.0).collect::<Vec<_>>());
    // small split for the two-phase check
    let small_split = SplitSpec {
        unlabeled: 0.85,
        train: 0.05,
        test: 0.10,
        seed: 7,
    };
    let accs: Vec<f64> = snapshots
        .iter()
        .map(|w| classify_acc(w, &data.labels, &small_split, 300, 3))
        .collect();
    println!("accs(5% train): {:?}", accs.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    let accs15: Vec<f64> = snapshots
        .iter()
        .map(|w| classify_acc(w, &data.labels, &split, 300, 3))
        .collect();
    println!("accs(15% train): {:?}", accs15.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>());

    println!("=== criterion 12: fraction sweep (4 seeds) ===");
    for frac in [0.05, 0.1, 0.2, 0.4] {
        let mut mean_plc = 0.0;
        let mut mean_cp = 0.0;
        let mut count = 0.0;
        for seed in 0..4u64 {
            let (plc_fit, _, _, cfg) = run_fit(seed, 1.0, false);
            let (cp_fit, _, _, _) = run_fit(seed, 0.0, false);
            let data = generate(&cfg).unwrap();
            let sweep_split = SplitSpec {
                unlabeled: 1.0 - frac - 0.3,
                train: frac,
                test: 0.3,
                seed: 7,
            };
            let a_plc = classify_acc(&plc_fit.state.model.weights, &data.labels, &sweep_split, 500, 3);
            let a_cp = classify_acc(&cp_fit.state.model.weights, &data.labels, &sweep_split, 500, 3);
            if a_plc.is_nan() || a_cp.is_nan() {
                continue;
            }
            mean_plc += a_plc;
            mean_cp += a_cp;
            count += 1.0;
        }
        println!(
            "frac {frac}: plc {:.4} cp {:.4} (n={count})",
            mean_plc / count,
            mean_cp / count
        );
    }
}
