//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use nqk_core::data::{
    assign_label, gamma, label_by_percentile, make_synthetic, partition, stratified_kfold,
    BinaryMask, FeatureTable, Grid, Label, MinMax, ReduceKind, Reducer, SyntheticKind, TileLabel,
    ZScore,
};
use nqk_core::experiment::{
    load_dataset, run, DatasetSource, ExperimentConfig, ExperimentKind, TrainChoice,
};
use nqk_core::kernel::{gram, EmbeddingKind, EmbeddingSpec};
use nqk_core::linalg::Matrix;
use nqk_core::qsim::{Circuit, Op, Su2Angles};
use nqk_core::reupload::{extend_params, ExtendInit, QnnParams};
use nqk_core::svm::{self, BiasMode, SvmConfig};
use nqk_core::train::{
    cost_and_gradient, fidelity_cost, scale_qnn, EncodedSet, GradientMethod, Preset, TrainConfig,
};
use rand::Rng;

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Outcome {
    check(
        elapsed < limit,
        String::new(),
        format!("took {elapsed:.1?}, limit {limit:?}"),
    )
}

fn simulator_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(1);
    let worst = (0..100)
        .map(|i| max_amp_diff(&random_circuit(i, &mut r)))
        .fold(0.0, f64::max);
    within(t0.elapsed(), Duration::from_secs(10))?;
    check(
        worst < 1e-12,
        format!("100 circuits, max |Δamp| = {worst:.2e}"),
        format!("max |Δamp| = {worst:.2e}"),
    )
}

fn kernel_validity() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(2);
    let (mut asym, mut diag, mut lmin) = (0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..20 {
        let n = 2 + i % 2;
        let kind = if i % 4 < 2 {
            EmbeddingKind::OneToN
        } else {
            EmbeddingKind::NToN
        };
        let params = match kind {
            EmbeddingKind::OneToN => random_params(1, 3, &mut r),
            EmbeddingKind::NToN => random_params(n, 3, &mut r),
        };
        let spec = EmbeddingSpec::new(kind, params, n).map_err(|e| e.to_string())?;
        let pts: Vec<_> = (0..50).map(|_| random_point(2, &mut r)).collect();
        let ids: Vec<String> = (0..50).map(|i| i.to_string()).collect();
        let g = gram(&spec, &pts, &ids).map_err(|e| e.to_string())?;
        let k = DMatrix::from_fn(50, 50, |a, b| g.entries[(a, b)]);
        asym = asym.max((&k - k.transpose()).abs().max());
        diag = diag.max(
            k.diagonal()
                .iter()
                .map(|d| (d - 1.0).abs())
                .fold(0.0, f64::max),
        );
        lmin = lmin.min(k.symmetric_eigenvalues().min());
    }
    within(t0.elapsed(), Duration::from_secs(30))?;
    let msg = format!("asym {asym:.1e}, |diag-1| {diag:.1e}, λmin {lmin:.2e}");
    check(
        asym < 1e-10 && diag < 1e-10 && lmin >= -1e-8,
        msg.clone(),
        msg,
    )
}

fn circles(m: usize, seed: u64) -> EncodedSet<f64> {
    let t: FeatureTable<f64> = make_synthetic(SyntheticKind::Circles, m, 0.05, seed).unwrap();
    EncodedSet::from_table(&t).unwrap()
}

fn scaling_guarantee() -> Outcome {
    let mut worst_rise = 0.0f64;
    let mut worst_handoff = 0.0f64;
    let mut good = 0;
    for run in 0..10u64 {
        let data = circles(200, 100 + run);
        let mut r = rng(run);
        let init = QnnParams::random_uniform(1, 3, &mut r).unwrap();
        let cfg = TrainConfig::scaling().with_seed(run);
        let hist =
            scale_qnn(&init, &data, 4, &cfg, ExtendInit::CopyFirst).map_err(|e| e.to_string())?;
        let mut ok = hist.len() == 4;
        for w in hist.windows(2) {
            let rise = w[1].best_cost - w[0].best_cost;
            let extended = extend_params(&w[0].best_params, ExtendInit::CopyFirst).unwrap();
            let handoff = (fidelity_cost(&extended, &data).unwrap() - w[0].best_cost)
                .abs()
                .max((w[1].initial_cost - w[0].best_cost).abs());
            worst_rise = worst_rise.max(rise);
            worst_handoff = worst_handoff.max(handoff);
            ok &= rise <= 1e-10 && handoff <= 1e-10;
        }
        good += usize::from(ok);
    }
    let msg = format!(
        "{good}/10 runs, max rise {worst_rise:.1e}, max hand-off error {worst_handoff:.1e}"
    );
    check(good == 10, msg.clone(), msg)
}

fn gradients() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let n = 1 + i % 3;
        let p = random_params(n, 1 + i % 3, &mut r);
        let pts: Vec<_> = (0..6).map(|_| random_point(2, &mut r)).collect();
        let labels = (0..6)
            .map(|_| {
                if r.random_bool(0.5) {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect();
        let set = EncodedSet::new(pts, labels).unwrap();
        let (_, ps) = cost_and_gradient(&p, &set, GradientMethod::ParameterShift, 1e-5).unwrap();
        let (_, fd) = cost_and_gradient(&p, &set, GradientMethod::FiniteDiff, 1e-5).unwrap();
        let diff = ps
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = ps.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
    }
    // P(0) after a single ZYZ gate on |0⟩ is cos²(β/2), so dP/dβ = -sin(β)/2
    // and the two Z angles do not contribute.
    let (a, b, g) = (0.7, 1.3, -2.1);
    let mut c = Circuit::new(1).unwrap();
    c.push(Op::Rot {
        qubit: 0,
        angles: Su2Angles::new(a, b, g),
        param: Some(0),
    })
    .unwrap();
    let want = [0.0, -(b as f64).sin() / 2.0, 0.0];
    let (p0, adj) = c.prob_zero_and_gradient(3);
    let shift = c.prob_zero_gradient_shift(3);
    let closed = (p0 - (b / 2.0f64).cos().powi(2))
        .abs()
        .max(
            want.iter()
                .zip(&adj)
                .map(|(w, x)| (w - x).abs())
                .fold(0.0, f64::max),
        )
        .max(
            want.iter()
                .zip(&shift)
                .map(|(w, x)| (w - x).abs())
                .fold(0.0, f64::max),
        );
    let msg = format!("shift vs fd rel {worst:.1e}, closed form {closed:.1e}");
    check(worst < 1e-4 && closed < 1e-6, msg.clone(), msg)
}

fn svm_correctness() -> Outcome {
    let mut r = rng(5);
    let (mut obj_err, mut mismatches, mut instances) = (0.0f64, 0, 0);
    for case in 0..60 {
        let m = r.random_range(2..=8);
        let x: Vec<Vec<f64>> = (0..m + 20)
            .map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
            .collect();
        let mut y: Vec<Label> = (0..m)
            .map(|_| {
                if r.random_bool(0.5) {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect();
        y[0] = Label::Pos;
        y[m - 1] = Label::Neg;
        let yf: Vec<f64> = y.iter().map(|l| l.value()).collect();
        let ids: Vec<String> = (0..m).map(|i| i.to_string()).collect();
        let k = Matrix::from_fn(m, m, |i, j| svm::rbf_kernel(&x[i], &x[j], 1.5));
        for (bias, shift) in [
            (BiasMode::Zero, true),
            (BiasMode::Fitted, true),
            (BiasMode::Fitted, false),
        ] {
            let cfg = SvmConfig {
                c: [0.3, 1.0, 5.0][case % 3],
                bias,
                shift,
                ..Default::default()
            };
            let model = svm::solve_dual(&k, &y, &ids, &cfg).map_err(|e| e.to_string())?;
            let eff = |v: f64| if shift { (v + 1.0) / 2.0 } else { v };
            let q = DMatrix::from_fn(m, m, |i, j| eff(k[(i, j)]));
            let oracle = dual_oracle(&q, &yf, cfg.c, bias == BiasMode::Fitted);
            obj_err = obj_err.max((model.dual_objective(&k) - oracle.objective).abs());
            for pt in &x {
                let row: Vec<f64> = (0..m).map(|i| svm::rbf_kernel(pt, &x[i], 1.5)).collect();
                let erow: Vec<f64> = row.iter().map(|v| eff(*v)).collect();
                let want = if oracle_decision(&oracle, &yf, &erow) > 0.0 {
                    Label::Pos
                } else {
                    Label::Neg
                };
                mismatches += usize::from(model.predict(&row).unwrap() != want);
            }
            instances += 1;
        }
    }
    let mut kkt = 0.0f64;
    let data: FeatureTable<f64> = make_synthetic(SyntheticKind::Circles, 200, 0.1, 9).unwrap();
    let x: Vec<&[f64]> = data.rows().collect();
    let k = Matrix::from_fn(200, 200, |i, j| svm::rbf_kernel(x[i], x[j], 2.0));
    for bias in [BiasMode::Zero, BiasMode::Fitted] {
        let cfg = SvmConfig {
            bias,
            ..Default::default()
        };
        let model =
            svm::solve_dual(&k, data.labels(), data.ids(), &cfg).map_err(|e| e.to_string())?;
        kkt = kkt.max(svm::kkt_violation(&model, &k));
    }
    let msg = format!(
        "{instances} instances, objective err {obj_err:.1e}, {mismatches} prediction mismatches, M=200 KKT {kkt:.1e}"
    );
    check(
        obj_err < 1e-6 && mismatches == 0 && kkt < 1e-5,
        msg.clone(),
        msg,
    )
}

fn pipeline_numbers() -> Outcome {
    let raster = BinaryMask::filled(5000, 5000, false).unwrap();
    let tiles = partition(&raster, 250).map_err(|e| e.to_string())?;
    let n_tiles = tiles.tiles.len();
    drop(tiles);

    // Coverages 0, small and large: tiles at or below the threshold drop out.
    let mask = |set: usize| {
        let cells = (0..100).map(|i| i < set).collect();
        Grid::from_cells(10, 10, cells).unwrap()
    };
    let suite = [0, 0, 1, 2, 3, 10, 25, 50, 80, 100];
    let gammas: Vec<f64> = suite.iter().map(|&s| gamma(&mask(s))).collect();
    let rep = label_by_percentile(&gammas, 15.0).map_err(|e| e.to_string())?;
    let mut rule_ok = assign_label(0.0, 0.1) == TileLabel::Labeled(Label::Neg)
        && assign_label(0.1, 0.1) == TileLabel::Excluded
        && assign_label(0.05, 0.1) == TileLabel::Excluded
        && assign_label(0.1 + 1e-9, 0.1) == TileLabel::Labeled(Label::Pos);
    for (g, l) in gammas.iter().zip(&rep.labels) {
        let want = if *g == 0.0 {
            TileLabel::Labeled(Label::Neg)
        } else if *g > rep.epsilon {
            TileLabel::Labeled(Label::Pos)
        } else {
            TileLabel::Excluded
        };
        rule_ok &= *l == want;
    }
    rule_ok &= (rep.n_negative, rep.n_excluded, rep.n_positive) == (2, 2, 6);

    let labels: Vec<Label> = (0..2000)
        .map(|i| if i < 1000 { Label::Pos } else { Label::Neg })
        .collect();
    let folds = stratified_kfold(&labels, 10, 0).map_err(|e| e.to_string())?;
    let folds_ok = folds.len() == 10
        && folds.iter().all(|f| {
            f.len() == 200 && f.iter().filter(|&&i| labels[i] == Label::Pos).count() == 100
        });
    let msg = format!(
        "{n_tiles} tiles, label rule {}, folds of 200 with 100 per class {}",
        if rule_ok { "ok" } else { "wrong" },
        if folds_ok { "ok" } else { "wrong" }
    );
    check(n_tiles == 400 && rule_ok && folds_ok, msg.clone(), msg)
}

fn one_to_n(preset: Preset) -> std::result::Result<(f64, f64), String> {
    let cfg = ExperimentConfig {
        train: TrainChoice::Named(preset),
        ..Default::default()
    };
    let data = load_dataset::<f64>(&cfg).map_err(|e| e.to_string())?;
    let b = run(&cfg, &data).map_err(|e| e.to_string())?;
    let qnn = b.model("qnn", 1).ok_or("missing qnn row")?.test_mean;
    let nqk = b.model("nqk", 2).ok_or("missing nqk row")?.test_mean;
    Ok((qnn, nqk))
}

fn robustness() -> Outcome {
    let t0 = Instant::now();
    let (qnn_opt, nqk_opt) = one_to_n(Preset::Optimal)?;
    let (qnn_sub, nqk_sub) = one_to_n(Preset::Suboptimal)?;
    within(t0.elapsed(), Duration::from_secs(300))?;
    let msg = format!(
        "NQK {:.2} -> {:.2}, QNN {:.2} -> {:.2} (optimal -> suboptimal, %)",
        100.0 * nqk_opt,
        100.0 * nqk_sub,
        100.0 * qnn_opt,
        100.0 * qnn_sub
    );
    check(
        (nqk_opt - nqk_sub).abs() <= 0.02 && qnn_opt - qnn_sub >= 0.03,
        msg.clone(),
        msg,
    )
}

fn qubit_trend() -> Outcome {
    let t0 = Instant::now();
    let cfg = ExperimentConfig {
        kind: ExperimentKind::NToN,
        n_qubits: 6,
        train: TrainChoice::Named(Preset::Scaling),
        ..Default::default()
    };
    let data = load_dataset::<f64>(&cfg).map_err(|e| e.to_string())?;
    let b = run(&cfg, &data).map_err(|e| e.to_string())?;
    within(t0.elapsed(), Duration::from_secs(900))?;
    let get = |m: &str, n: usize| b.model(m, n).ok_or(format!("missing {m} n={n}"));
    let mut problems = Vec::new();
    for m in ["qnn", "nqk"] {
        for n in 2..=6 {
            let (prev, cur) = (get(m, n - 1)?.train_mean, get(m, n)?.train_mean);
            if cur < prev - 0.01 {
                problems.push(format!("{m} train drops at n={n}"));
            }
        }
    }
    for n in 1..=6 {
        let (q, k) = (get("qnn", n)?, get("nqk", n)?);
        if k.train_mean < q.train_mean - 0.01 || k.test_mean < q.test_mean - 0.01 {
            problems.push(format!("nqk below qnn at n={n}"));
        }
    }
    let trace: Vec<String> = (1..=6)
        .map(|n| {
            format!(
                "n={n} {:.1}/{:.1}",
                100.0 * get("qnn", n).unwrap().train_mean,
                100.0 * get("nqk", n).unwrap().train_mean
            )
        })
        .collect();
    let msg = format!("train qnn/nqk %: {}", trace.join(", "));
    if problems.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{}; {msg}", problems.join(", ")))
    }
}

fn determinism() -> Outcome {
    let small = |kind| ExperimentConfig {
        kind,
        dataset: DatasetSource::Synthetic {
            kind: SyntheticKind::Moons,
            m: 80,
            noise: 0.1,
            seed: 3,
        },
        n_qubits: 3,
        n_layers: 2,
        k_folds: 4,
        repeats: 2,
        n_train: 30,
        n_test: 20,
        seed: 17,
        classical: nqk_core::experiment::ClassicalConfig {
            search_iters: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut files = 0;
    for kind in [
        ExperimentKind::OneToN,
        ExperimentKind::NToN,
        ExperimentKind::Classical,
    ] {
        let cfg = small(kind);
        let mut outputs = Vec::new();
        for threads in [1, 4] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| -> nqk_core::Result<()> {
                let data = load_dataset::<f64>(&cfg)?;
                run(&cfg, &data)?.write(dir.path())
            })
            .map_err(|e| e.to_string())?;
            let mut read = Vec::new();
            for name in ["folds.csv", "summary.json", "whiskers.dat"] {
                read.push(std::fs::read(dir.path().join(name)).map_err(|e| e.to_string())?);
            }
            outputs.push(read);
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{kind:?} outputs differ between runs"));
        }
        files += outputs[0].len();
    }
    Ok(format!(
        "{files} result files byte-identical across re-runs and thread counts"
    ))
}

fn reduction() -> Outcome {
    let mut r = rng(10);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (m, d) = (r.random_range(10..60), r.random_range(2..8));
        let p = r.random_range(1..=d);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..d)
                    .map(|j| (j as f64 + 1.0) * r.random_range(-1.0..1.0) + 0.5)
                    .collect()
            })
            .collect();
        let dense = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
        let t = FeatureTable::from_rows(&rows, vec![Label::Neg; m]).unwrap();
        for kind in [ReduceKind::Pca, ReduceKind::TruncatedSvd] {
            let red = Reducer::fit(&t, kind, p).map_err(|e| e.to_string())?;
            let want = svd_reconstruction(&dense, p, kind == ReduceKind::Pca);
            for i in 0..m {
                let back = red.reconstruct_row(&red.project_row(t.row(i)));
                for j in 0..d {
                    worst = worst.max((back[j] - want[(i, j)]).abs());
                }
            }
        }
        let z = ZScore::fit(&t).unwrap();
        let zt = z.apply(&t).unwrap();
        let zback = z.invert(&zt).unwrap();
        let mm = MinMax::fit(&zt).unwrap();
        let scaled = mm.apply(&zt).unwrap().table;
        for i in 0..m {
            for j in 0..d {
                worst = worst.max((zback.row(i)[j] - t.row(i)[j]).abs());
                worst = worst.max((mm.unscale(j, scaled.row(i)[j]) - zt.row(i)[j]).abs());
            }
        }
    }
    check(
        worst < 1e-8,
        format!("20 matrices, max reconstruction/round-trip error {worst:.1e}"),
        format!("max error {worst:.1e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("simulator matches dense oracle", simulator_oracle),
        ("kernel validity", kernel_validity),
        ("scaling never raises the cost", scaling_guarantee),
        ("gradient correctness", gradients),
        ("SVM correctness", svm_correctness),
        ("pipeline constants", pipeline_numbers),
        ("NQK robust to suboptimal training", robustness),
        ("accuracy grows with qubits", qubit_trend),
        ("determinism", determinism),
        ("reduction correctness", reduction),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
