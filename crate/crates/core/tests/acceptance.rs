//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use monotree::boosting::{deserialize_model, serialize_model, train, train_with_eval, DataSplit, Metric};
use monotree::constraints::verify::{sampled_violations, tree_violations};
use monotree::constraints::{penalty, recompute_all_constraints, ConstraintView, OutputBounds};
use monotree::experiments::{
    adult_dataset, expected_blue, run_figure_example, run_gamma_sweep, run_mc_benchmark,
    run_time_benchmark, BenchmarkSpec, RunKey, SampleSize, SweepSpec, TimingSpec,
};
use monotree::objective::{auc, grad_hess, logloss, sigmoid, ObjectiveKind};
use monotree::tree::{grow_tree, TreeBuilder};
use monotree::{BinnedDataset, BoosterConfig, ConstraintMode, TreeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONSTRAINED: [ConstraintMode; 3] = [ConstraintMode::Basic, ConstraintMode::Fast, ConstraintMode::Slow];

struct Outcome {
    pass: bool,
    detail: String,
    limit: Option<Duration>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, limit: None }
    }

    fn within(mut self, limit: Duration) -> Self {
        self.limit = Some(limit);
        self
    }
}

fn figure_values() -> Outcome {
    let outcomes = run_figure_example().unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for o in outcomes.iter().filter(|o| o.mode.is_constrained()) {
        let err = (o.blue() - expected_blue(o.mode)).abs();
        worst = worst.max(err);
        parts.push(format!("{}={:.12}", o.mode, o.blue()));
    }
    Outcome::new(worst <= 1e-9, format!("{} (max error {worst:.1e})", parts.join(" ")))
        .within(Duration::from_secs(1))
}

/// Direct transcription of the piecewise penalty used as the reference.
fn reference_penalty(g: f64, d: usize) -> f64 {
    let d = d as f64;
    if g >= d + 1.0 {
        0.0
    } else if g <= 1.0 {
        1.0 - g / 2f64.powf(d)
    } else {
        1.0 - 2f64.powf(g - 1.0 - d)
    }
}

fn penalty_grid() -> Outcome {
    let tol = 1e-12;
    let mut bad = Vec::new();
    for d in 0..=10 {
        if (penalty(0.0, d).unwrap() - 1.0).abs() > tol {
            bad.push(format!("p(0,{d})"));
        }
    }
    for g in [1.0, 1.5, 2.0, 3.7, 10.0] {
        if penalty(g, 0).unwrap().abs() > tol {
            bad.push(format!("p({g},0)"));
        }
    }
    if (penalty(2.0, 2).unwrap() - 0.5).abs() > tol {
        bad.push("p(2,2)".into());
    }
    if (penalty(0.5, 3).unwrap() - 0.9375).abs() > tol {
        bad.push("p(0.5,3)".into());
    }
    let gammas: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
    let mut grid = vec![vec![0.0; 11]; gammas.len()];
    for (i, &g) in gammas.iter().enumerate() {
        for d in 0..=10 {
            let p = penalty(g, d).unwrap();
            grid[i][d] = p;
            if (p - reference_penalty(g, d)).abs() > tol || !(0.0..=1.0).contains(&p) {
                bad.push(format!("p({g},{d})={p}"));
            }
        }
    }
    for i in 0..gammas.len() {
        for d in 0..=10 {
            if d > 0 && grid[i][d] + tol < grid[i][d - 1] {
                bad.push(format!("decreasing in d at ({},{d})", gammas[i]));
            }
            if i > 0 && grid[i][d] > grid[i - 1][d] + tol {
                bad.push(format!("increasing in gamma at ({},{d})", gammas[i]));
            }
        }
    }
    let detail = if bad.is_empty() {
        "50x11 grid matches, examples exact, monotone in both arguments".to_string()
    } else {
        format!("{} mismatches, first {}", bad.len(), bad[0])
    };
    Outcome::new(bad.is_empty(), detail)
}

fn synthetic_case(i: u64) -> BinnedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
    let features = rng.gen_range(2..=5);
    let mut dirs = common::random_directions(&mut rng, features);
    if i % 2 == 0 && !dirs.contains(&-1) {
        let f = dirs.iter().position(|&d| d != 0).unwrap();
        dirs[f] = -1;
    }
    let kind = if i % 3 == 0 { ObjectiveKind::L2 } else { ObjectiveKind::BinaryLogloss };
    let rows = rng.gen_range(300..900);
    common::synthetic(&mut rng, rows, features, &dirs, kind, 48)
}

fn monotone_ensembles(adult: &BinnedDataset) -> Outcome {
    let mut exhaustive = 0usize;
    let mut violations = 0usize;
    let mut sampled = 0usize;
    let mut ensembles = 0usize;
    let mut check = |data: &BinnedDataset, cfg: &BoosterConfig, seed: u64| {
        let (model, _) = train(data, cfg).unwrap();
        for t in &model.trees {
            assert!(t.num_leaves() <= 64);
            violations += tree_violations(t, data.directions()).len();
            exhaustive += 1;
        }
        sampled += sampled_violations(&model.trees, &data.bin_counts(), data.directions(), 10_000, seed);
        ensembles += 1;
    };
    for i in 0..50 {
        let data = synthetic_case(i);
        let objective = if data.labels().iter().all(|&y| y == 0.0 || y == 1.0) {
            ObjectiveKind::BinaryLogloss
        } else {
            ObjectiveKind::L2
        };
        for mode in CONSTRAINED {
            let cfg = BoosterConfig {
                objective,
                iterations: 10,
                num_leaves: 48,
                max_depth: 8,
                min_data_in_leaf: 5,
                monotone_method: mode,
                ..BoosterConfig::default()
            };
            check(&data, &cfg, i);
        }
    }
    for mode in CONSTRAINED {
        let cfg = BoosterConfig {
            iterations: 30,
            monotone_method: mode,
            ..BoosterConfig::default()
        };
        check(adult, &cfg, 7);
    }
    Outcome::new(
        violations == 0 && sampled == 0,
        format!(
            "{ensembles} ensembles: {exhaustive} trees checked pairwise ({violations} violations), \
             {sampled} sampled violations in {} pairs",
            ensembles * 10_000
        ),
    )
    .within(Duration::from_secs(300))
}

fn slow_oracle_traces() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut steps = 0usize;
    let mut recomputations = 0usize;
    let mut mismatches = Vec::new();
    let mut infeasible = 0usize;
    for trace in 0..500 {
        let features = rng.gen_range(2..=4);
        let dirs = common::random_directions(&mut rng, features);
        let rows = rng.gen_range(200..600);
        let data = common::synthetic(&mut rng, rows, features, &dirs, ObjectiveKind::L2, 32);
        let gh = common::l2_residual_gradients(&data);
        let config = TreeConfig {
            num_leaves: rng.gen_range(4..=32),
            max_depth: rng.gen_range(3..=10),
            min_data_in_leaf: rng.gen_range(2..10),
            mode: ConstraintMode::Slow,
            ..TreeConfig::default()
        };
        let mut b = TreeBuilder::new(&data, (0..rows as u32).collect(), &gh, config).unwrap();
        while b.step().unwrap().is_some() {
            steps += 1;
            let scratch = recompute_all_constraints(b.tree(), b.directions());
            for leaf in b.tree().leaf_ids() {
                let ConstraintView::Piecewise(p) = b.engine().view(leaf) else {
                    unreachable!("slow views are piecewise")
                };
                if !p.overall().is_feasible() {
                    infeasible += 1;
                }
                if p != &scratch[&leaf] {
                    mismatches.push((trace, leaf));
                }
            }
        }
        recomputations += b.recomputations();
    }
    Outcome::new(
        mismatches.is_empty() && infeasible == 0,
        format!(
            "500 traces, {steps} splits compared segment by segment, {} mismatches, \
             {recomputations} full recomputations triggered",
            mismatches.len()
        ),
    )
    .within(Duration::from_secs(120))
}

fn contains(outer: &OutputBounds, inner: &OutputBounds) -> bool {
    outer.min <= inner.min && inner.max <= outer.max
}

fn conservativeness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut leaves = 0usize;
    let mut points = 0usize;
    let mut bad = Vec::new();
    for seq in 0..100 {
        let features = rng.gen_range(2..=4);
        let dirs = common::random_directions(&mut rng, features);
        let rows = rng.gen_range(300..800);
        let data = common::synthetic(&mut rng, rows, features, &dirs, ObjectiveKind::L2, 32);
        let gh = common::l2_residual_gradients(&data);
        let base = TreeConfig {
            num_leaves: rng.gen_range(4..=32),
            max_depth: 8,
            min_data_in_leaf: 5,
            mode: ConstraintMode::Basic,
            ..TreeConfig::default()
        };
        let all: Vec<u32> = (0..rows as u32).collect();
        let mut basic = TreeBuilder::new(&data, all.clone(), &gh, base).unwrap();
        basic.grow().unwrap();
        let mut splits: Vec<_> = basic.tree().nodes().iter().filter_map(|n| n.split().map(|s| (n.id, *s))).collect();
        splits.sort_by_key(|(_, s)| s.order);

        let replay = |mode| {
            let mut b = TreeBuilder::new(&data, all.clone(), &gh, TreeConfig { mode, ..base }).unwrap();
            for (id, s) in &splits {
                let lo = basic.tree().node(s.left).value;
                let ro = basic.tree().node(s.right).value;
                b.replay_split(*id, s.feature, s.threshold, lo, ro).unwrap();
            }
            b
        };
        let fast = replay(ConstraintMode::Fast);
        let slow = replay(ConstraintMode::Slow);
        for leaf in basic.tree().leaf_ids() {
            leaves += 1;
            let bb = basic.engine().view(leaf).leaf_bounds();
            let fb = fast.engine().view(leaf).leaf_bounds();
            let sb = slow.engine().view(leaf).leaf_bounds();
            if !bb.is_feasible() || !fb.is_feasible() || !sb.is_feasible() {
                bad.push(format!("seq {seq} leaf {leaf}: infeasible"));
            }
            if !contains(&fb, &bb) || !contains(&sb, &fb) {
                bad.push(format!("seq {seq} leaf {leaf}: {bb:?} {fb:?} {sb:?}"));
            }
            let region = basic.tree().node(leaf).region.clone();
            for _ in 0..20 {
                let p: Vec<u16> = region.intervals().iter().map(|&(l, h)| rng.gen_range(l..=h)).collect();
                points += 1;
                let at = slow.engine().bounds_at(leaf, &p);
                if !contains(&at, &fb) || !contains(&at, &sb) {
                    bad.push(format!("seq {seq} leaf {leaf} point {p:?}"));
                }
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!("{leaves} leaves, {points} sampled points, {} violations", bad.len()),
    )
}

fn adult_improvement(adult: &BinnedDataset) -> Outcome {
    let spec = BenchmarkSpec {
        base: BoosterConfig {
            iterations: 300,
            ..BoosterConfig::default()
        },
        methods: CONSTRAINED.to_vec(),
        trials: 5,
        metrics: vec![Metric::Logloss],
        ..BenchmarkSpec::default()
    };
    let result = run_mc_benchmark(adult, &spec).unwrap();
    let curve = |m| result.mean_curve(RunKey { method: m, gamma: 0.0 }, Metric::Logloss, DataSplit::Train);
    let basic = curve(ConstraintMode::Basic);
    let fast = curve(ConstraintMode::Fast);
    let slow = curve(ConstraintMode::Slow);
    let window = 10..=300usize;
    let wins = window.clone().filter(|&it| fast[it - 1] <= basic[it - 1]).count();
    let share = wins as f64 / window.count() as f64;
    let rel = |c: &[f64]| (basic[49] - c[49]) / basic[49];
    let (best_name, best) = [("fast", rel(&fast)), ("slow", rel(&slow))]
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Outcome::new(
        share >= 0.9 && best >= 5e-4,
        format!(
            "fast <= basic at {:.1}% of iterations 10..300; improvement at 50: fast {:.3}%, slow {:.3}% \
             (best {best_name}); train logloss at 300: basic {:.5} fast {:.5} slow {:.5}",
            share * 100.0,
            rel(&fast) * 100.0,
            rel(&slow) * 100.0,
            basic[299],
            fast[299],
            slow[299]
        ),
    )
    .within(Duration::from_secs(900))
}

fn gamma_sweep(adult: &BinnedDataset) -> Outcome {
    let spec = SweepSpec {
        method: ConstraintMode::Fast,
        gammas: vec![0.5, 1.0, 1.5, 2.0],
        checkpoints: vec![25],
        trials: 5,
        ..SweepSpec::default()
    };
    let cells = run_gamma_sweep(adult, &spec).unwrap();
    let parts: Vec<String> = cells
        .iter()
        .map(|c| format!("g{}: {:+.4}%", c.gamma, c.relative_change * 100.0))
        .collect();
    let pass = cells.iter().any(|c| c.relative_change < 0.0);
    Outcome::new(pass, format!("relative change vs gamma 0 at iteration 25: {}", parts.join(", ")))
}

fn timing(adult: &BinnedDataset) -> Outcome {
    let spec = TimingSpec {
        sizes: vec![SampleSize::Full],
        ..TimingSpec::default()
    };
    let rows = run_time_benchmark(adult, &spec).unwrap();
    let ms = |m| rows.iter().find(|r| r.method == m).unwrap().mean_ms;
    let basic = ms(ConstraintMode::Basic);
    let fast = ms(ConstraintMode::Fast) / basic;
    let slow = ms(ConstraintMode::Slow) / basic;
    Outcome::new(
        fast <= 1.5 && slow <= 4.0,
        format!(
            "{} reps, none {:.1} ms, basic {basic:.1} ms; fast/basic {fast:.3}, slow/basic {slow:.3}",
            spec.reps,
            ms(ConstraintMode::None)
        ),
    )
}

fn pointwise_logloss(margin: f64, label: f64) -> f64 {
    logloss(&[sigmoid(margin)], &[label]).unwrap()
}

fn brute_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let (mut twice_wins, mut pos, mut neg) = (0u64, 0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        if yi == 1.0 {
            pos += 1;
            for (j, &yj) in labels.iter().enumerate() {
                if yj == 0.0 {
                    twice_wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Less => 0,
                    };
                }
            }
        } else {
            neg += 1;
        }
    }
    twice_wins as f64 / (2 * pos * neg) as f64
}

fn numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_fd: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.gen_range(-6.0..6.0);
        let y = f64::from(rng.gen_bool(0.5) as u8);
        let h = 1e-4;
        let gh = grad_hess(ObjectiveKind::BinaryLogloss, m, y);
        let fd_g = (pointwise_logloss(m + h, y) - pointwise_logloss(m - h, y)) / (2.0 * h);
        let g = |x| grad_hess(ObjectiveKind::BinaryLogloss, x, y).grad;
        let fd_h = (g(m + h) - g(m - h)) / (2.0 * h);
        worst_fd = worst_fd.max((gh.grad - fd_g).abs()).max((gh.hess - fd_h).abs());
        let t = rng.gen_range(-3.0..3.0);
        let sq = |x: f64| 0.5 * (x - t) * (x - t);
        let l2 = grad_hess(ObjectiveKind::L2, m, t);
        worst_fd = worst_fd.max((l2.grad - (sq(m + h) - sq(m - h)) / (2.0 * h)).abs());
        worst_fd = worst_fd.max((l2.hess - (sq(m + h) - 2.0 * sq(m) + sq(m - h)) / (h * h)).abs());
    }

    let mut auc_mismatch = 0;
    for _ in 0..300 {
        let n = rng.gen_range(2..400);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..20) as f64 / 4.0).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.3) as u8)).collect();
        if !y.contains(&0.0) || !y.contains(&1.0) {
            continue;
        }
        auc_mismatch += (auc(&s, &y).unwrap() != brute_auc(&s, &y)) as usize;
    }

    let mut worst_leaf: f64 = 0.0;
    for _ in 0..30 {
        let data = common::synthetic(&mut rng, 500, 3, &[], ObjectiveKind::L2, 32);
        let gh = common::l2_residual_gradients(&data);
        let mean = data.labels().iter().sum::<f64>() / 500.0;
        let config = TreeConfig {
            min_data_in_leaf: 10,
            mode: ConstraintMode::None,
            ..TreeConfig::default()
        };
        let grown = grow_tree(&data, (0..500).collect(), &gh, config).unwrap();
        for leaf in grown.tree.leaf_ids() {
            let rows = &grown.leaf_rows[leaf];
            let resid = rows.iter().map(|&r| data.labels()[r as usize] - mean).sum::<f64>() / rows.len() as f64;
            worst_leaf = worst_leaf.max((grown.tree.node(leaf).value - resid).abs());
        }
    }

    let mut differing = 0usize;
    let data = synthetic_case(3);
    let eval = synthetic_case(5);
    for mode in ConstraintMode::ALL {
        let cfg = BoosterConfig {
            objective: ObjectiveKind::L2,
            iterations: 10,
            num_leaves: 16,
            min_data_in_leaf: 5,
            monotone_method: mode,
            ..BoosterConfig::default()
        };
        let (model, _) = train_with_eval(&data, &cfg, None, &[]).unwrap();
        let back = deserialize_model(&serialize_model(&model).unwrap()).unwrap();
        for set in [&data, &eval] {
            let a = model.predict_margins_binned(set).unwrap();
            let b = back.predict_margins_binned(set).unwrap();
            differing += a.iter().zip(&b).filter(|(x, y)| x.to_bits() != y.to_bits()).count();
        }
    }
    Outcome::new(
        worst_fd <= 1e-5 && auc_mismatch == 0 && worst_leaf <= 1e-9 && differing == 0,
        format!(
            "finite-difference error {worst_fd:.1e}, AUC mismatches {auc_mismatch}, \
             leaf vs mean residual {worst_leaf:.1e}, round-trip differing predictions {differing}"
        ),
    )
}

fn main() {
    let adult = adult_dataset(common::adult_dir(), 255).expect("Adult files under data/");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("figure example values", Box::new(figure_values)),
        ("penalty table", Box::new(penalty_grid)),
        ("global monotonicity", Box::new(|| monotone_ensembles(&adult))),
        ("slow incremental equals recomputation", Box::new(slow_oracle_traces)),
        ("basic within fast within slow", Box::new(conservativeness)),
        ("Adult training improvement", Box::new(|| adult_improvement(&adult))),
        ("gamma sweep", Box::new(|| gamma_sweep(&adult))),
        ("timing ratios", Box::new(|| timing(&adult))),
        ("numerical correctness", Box::new(numerics)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let in_time = outcome.limit.map_or(true, |l| took <= l);
        let pass = outcome.pass && in_time;
        failed += usize::from(!pass);
        let budget = outcome
            .limit
            .map_or(String::new(), |l| format!(", limit {:.0}s", l.as_secs_f64()));
        println!(
            "{} [{}] {name}: {} ({:.2}s{budget})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail,
            took.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
