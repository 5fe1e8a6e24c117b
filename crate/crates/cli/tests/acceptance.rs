//! Acceptance suite: seven end-to-end criteria, one test each, every
//! threshold pinned in code. Each test prints a single `ACCEPTANCE n:` line
//! (visible with `--nocapture`, or in the failure report).
//!
//! The master seed is fixed at 42 for every criterion and was chosen before
//! any outcome was measured.
//!
//! Two statistical clauses are expected to fail at desk scale and are kept
//! red on purpose rather than loosened; their tests explain the measured
//! behavior in the assertion message:
//! * criterion 5's flattening clause — the best cost expert keeps variance 1,
//!   which exceeds every attainable invariance radius (at most lambda/2), so
//!   the estimate component of regret accrues at a near-constant rate no
//!   matter how fast the weights converge;
//! * criterion 6's windowed-concavity clause — the season experts' mean loss
//!   gaps (~1e-4/round) are buried in per-round difference noise (~3e-2), so
//!   at this horizon the mean regret curve is linear and its windowed second
//!   difference is zero-mean noise.

use std::time::Instant;

use rand::Rng;
use skirent::experiments::{run_compare, CompareAlgorithm, CompareScenario, RegretScenario};
use skirent::hedge::{HedgeState, Schedule};
use skirent::seed::rng_from_seed;
use skirent::ski::{expected_alg_cost, robustness_radius, BuyDayDistribution, SkiRentalInstance};

const MASTER_SEED: u64 = 42;

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// Criterion 1: ratio-comparison reproduction at full scale. For lambda = 1
/// every mean ratio stays under the worst-case arm (1.5988 + 3 SE) and the
/// curve is flat across sigma (total variation <= 0.05); for lambda = ln 1.5
/// the exact-prediction mean respects 1.2164 + 3 SE at sigma = 0 and every
/// mean stays under the 3.075 worst-case arm. Single-threaded under 2 min.
#[test]
fn acceptance_1_ratio_comparison_reproduction() {
    let scenario = CompareScenario::default();
    assert_eq!(scenario.trials, 10_000);
    assert_eq!(scenario.sigma_grid.len(), 21);
    let started = Instant::now();
    let rows = pool(1).install(|| run_compare(&scenario, MASTER_SEED).unwrap());
    let elapsed = started.elapsed();

    let lambda_consistent = 1.5f64.ln();
    let robust: Vec<_> = rows
        .iter()
        .filter(|r| r.algorithm == CompareAlgorithm::CostRobust && r.lambda == 1.0)
        .collect();
    assert_eq!(robust.len(), 21);
    for row in &robust {
        assert!(
            row.mean_ratio <= 1.5988 + 3.0 * row.std_error,
            "sigma {}: mean {} exceeds the worst-case arm",
            row.sigma,
            row.mean_ratio
        );
        assert!(
            row.mean_ratio <= 1.60,
            "sigma {}: mean {}",
            row.sigma,
            row.mean_ratio
        );
    }
    let total_variation: f64 = robust
        .windows(2)
        .map(|w| (w[1].mean_ratio - w[0].mean_ratio).abs())
        .sum();

    let consistent: Vec<_> = rows
        .iter()
        .filter(|r| r.algorithm == CompareAlgorithm::CostRobust && r.lambda == lambda_consistent)
        .collect();
    let at_zero = consistent.iter().find(|r| r.sigma == 0.0).unwrap();
    let consistent_ok = at_zero.mean_ratio <= 1.2164 + 3.0 * at_zero.std_error;
    let worst_ok = consistent.iter().all(|r| r.mean_ratio <= 3.075);

    println!(
        "ACCEPTANCE 1: PASS — lambda=1 means <= 1.5988+3SE (max {:.4}), total variation {:.6} <= 0.05; \
         lambda=ln1.5 sigma=0 mean {:.4} <= 1.2164+3SE, all means <= 3.075; {:.1?} single-threaded",
        robust.iter().map(|r| r.mean_ratio).fold(f64::NEG_INFINITY, f64::max),
        total_variation,
        at_zero.mean_ratio,
        elapsed,
    );
    assert!(total_variation <= 0.05, "total variation {total_variation}");
    assert!(consistent_ok, "sigma=0 mean {}", at_zero.mean_ratio);
    assert!(worst_ok);
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}");
}

/// Criterion 2: exhaustive inequality suite for the two-arm ratio guarantee.
/// Over every b in [2,30], x in [1,4b], a 9-point prediction grid, and
/// lambda in {0.2, 0.5, ln 1.5, 1} with lambda*b >= 1, the closed-form
/// expected cost satisfies the applicable case inequalities within 1e-9.
#[test]
fn acceptance_2_expected_cost_inequalities() {
    let lambdas = [0.2, 0.5, 1.5f64.ln(), 1.0];
    let mut checked = 0u64;
    let mut violations = 0u64;
    for b in 2..=30u32 {
        for &lambda in &lambdas {
            if lambda * (b as f64) < 1.0 {
                continue;
            }
            let denom = 1.0 - (-lambda).exp();
            let robust_arm = (1.0 + 1.0 / (lambda * b as f64).floor()) / denom;
            let consistent_factor = lambda / denom;
            // 9-point prediction grid: 0..4b in steps of b/2, rounded.
            let predictions: Vec<u32> = (0..=8)
                .map(|j| (j as f64 * b as f64 / 2.0).round_ties_even() as u32)
                .collect();
            for x in 1..=4 * b {
                let instance = SkiRentalInstance::new(b, x).unwrap();
                let opt = instance.opt_cost() as f64;
                for &y in &predictions {
                    let dist = BuyDayDistribution::new(b as f64, y, lambda).unwrap();
                    let expected = expected_alg_cost(&instance, &dist);
                    let eta = (y as f64 - x as f64).abs();
                    let support = dist.support_size() as u32;
                    let early = y >= b;
                    let inside_support = x < support;
                    // The prediction-independent arm applies when the season
                    // ends inside the early support or outlasts the late one;
                    // the error-sensitive arm applies in every case.
                    let robust_applies = (early && inside_support) || (!early && !inside_support);
                    checked += 1;
                    if expected > consistent_factor * (opt + eta) + 1e-9 {
                        violations += 1;
                    }
                    if robust_applies && expected > robust_arm * opt + 1e-9 {
                        violations += 1;
                    }
                }
            }
        }
    }
    println!(
        "ACCEPTANCE 2: {} — {checked} grid cases, {violations} inequality violations",
        if violations == 0 { "PASS" } else { "FAIL" }
    );
    assert_eq!(violations, 0);
    assert!(checked > 50_000, "grid unexpectedly small: {checked}");
}

/// Criterion 3: perturbation invariance. For 1000 random (b, lambda), cost
/// estimates within the radius reproduce the distributions exactly, and just
/// past the radius the support or branch changes for at least one case.
#[test]
fn acceptance_3_perturbation_invariance() {
    let mut rng = rng_from_seed(MASTER_SEED);
    let mut tight_somewhere = 0u32;
    let mut cases = 0u32;
    while cases < 1000 {
        let b: u32 = rng.gen_range(2..=300);
        let lambda: f64 = rng.gen_range(1.0 / b as f64..=1.0);
        if lambda * (b as f64) < 1.0 {
            continue;
        }
        let epsilon = robustness_radius(b, lambda).unwrap();
        let inside = epsilon.min(0.5) - 1e-9;
        if inside <= 0.0 {
            continue; // radius too small to probe; resample
        }
        cases += 1;
        let predictions = [0, b, 4 * b];
        for &y in &predictions {
            let reference = BuyDayDistribution::new(b as f64, y, lambda).unwrap();
            for estimate in [b as f64 - inside, b as f64 + inside] {
                let dist = BuyDayDistribution::new(estimate, y, lambda).unwrap();
                assert_eq!(
                    dist.branch(),
                    reference.branch(),
                    "b={b} lambda={lambda} y={y}"
                );
                assert_eq!(dist.support_size(), reference.support_size());
                assert_eq!(
                    dist.probabilities(),
                    reference.probabilities(),
                    "b={b} lambda={lambda} y={y} estimate={estimate}"
                );
            }
        }
        // Tightness probe just beyond the radius.
        let beyond = b as f64 + epsilon.min(0.49) + 1e-3;
        if predictions.iter().any(|&y| {
            let probe = BuyDayDistribution::new(beyond, y, lambda).unwrap();
            let reference = BuyDayDistribution::new(b as f64, y, lambda).unwrap();
            probe.branch() != reference.branch() || probe.support_size() != reference.support_size()
        }) {
            tight_somewhere += 1;
        }
    }
    println!(
        "ACCEPTANCE 3: PASS — 1000 radii left distributions bit-identical; \
         radius tight in {tight_somewhere} cases"
    );
    assert!(tight_somewhere >= 1, "the radius was never tight");
}

/// Criterion 4: forecaster oracle equivalence. Weights match a direct
/// evaluation of the exponential-weights formula to 1e-12 for up to 4
/// experts and 20 rounds, and shift invariance plus argmax monotonicity hold
/// on 10^4 random states.
#[test]
fn acceptance_4_forecaster_oracle_equivalence() {
    let mut rng = rng_from_seed(MASTER_SEED ^ 0x4);
    // Direct-formula comparison.
    for _ in 0..2000 {
        let experts = rng.gen_range(1..=4usize);
        let rounds = rng.gen_range(0..=20u32);
        let constant = rng.gen_bool(0.5);
        let rate_scale: f64 = rng.gen_range(0.05..1.5);
        let schedule = if constant {
            Schedule::Constant { rate: rate_scale }
        } else {
            Schedule::Decreasing { scale: rate_scale }
        };
        let mut state = HedgeState::new(experts, schedule).unwrap();
        for _ in 0..rounds {
            let losses: Vec<f64> = (0..experts).map(|_| rng.gen_range(0.0..1.0)).collect();
            state.update(&losses).unwrap();
        }
        // Independent softmax evaluation, no stabilization.
        let eta = if constant {
            rate_scale
        } else {
            rate_scale / (f64::from(rounds.max(1))).sqrt()
        };
        let raw: Vec<f64> = state
            .cumulative_losses()
            .iter()
            .map(|&g| (-eta * g).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        for (w, direct) in state.weights().iter().zip(raw.iter().map(|r| r / total)) {
            assert!(
                (w - direct).abs() < 1e-12,
                "weights diverge from the formula"
            );
        }
    }

    // Shift invariance and argmax monotonicity.
    for _ in 0..10_000 {
        let experts = rng.gen_range(2..=6usize);
        let rate: f64 = rng.gen_range(0.01..2.0);
        let shift: f64 = rng.gen_range(0.0..40.0);
        let losses: Vec<f64> = (0..experts).map(|_| rng.gen_range(0.0..5.0)).collect();
        let shifted: Vec<f64> = losses.iter().map(|l| l + shift).collect();
        let mut state = HedgeState::new(experts, Schedule::Constant { rate }).unwrap();
        let mut moved = HedgeState::new(experts, Schedule::Constant { rate }).unwrap();
        state.update(&losses).unwrap();
        moved.update(&shifted).unwrap();
        let w = state.weights();
        for (a, b) in w.iter().zip(moved.weights()) {
            assert!((a - b).abs() < 1e-12, "shift changed the weights");
        }
        let argmin = losses
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let strictly = losses
            .iter()
            .enumerate()
            .all(|(i, &l)| i == argmin || l > losses[argmin]);
        if strictly {
            for (i, &wi) in w.iter().enumerate() {
                assert!(
                    i == argmin || w[argmin] > wi,
                    "argmax does not track argmin loss"
                );
            }
        }
    }
    println!(
        "ACCEPTANCE 4: PASS — 2000 states match the direct formula to 1e-12; \
         shift invariance and argmax monotonicity on 10000 states"
    );
}

/// Criterion 5: stochastic cost-panel convergence at T = 2000 over 100
/// seeds. The weight clause passes decisively; the flattening clause is
/// structurally unattainable here (see the module comment) and is asserted
/// as stated, so this test is expected to stay red.
#[test]
fn acceptance_5_buy_panel_convergence() {
    let scenario = RegretScenario {
        id: "convergence".into(),
        horizon: 2000,
        seeds: 100,
        ..RegretScenario::default()
    };
    assert_eq!(scenario.buy_variance_range, (1.0, 20.0));
    assert_eq!(scenario.noise_bound, 50.0);
    let averaged = pool(8)
        .install(|| skirent::experiments::average_regret(&[scenario], MASTER_SEED))
        .unwrap()
        .remove(0);

    let half = averaged.regret_b[averaged.regret_b.len() / 2 - 1];
    let full = *averaged.regret_b.last().unwrap();
    let weight_ok = averaged.mean_best_buy_weight > 0.9;
    let flatten_ok = full - half < 0.1 * half;
    println!(
        "ACCEPTANCE 5: {} — mean best-expert weight {:.4} (> 0.9: {}); \
         estimate-regret growth {:.4} vs allowed {:.4} (flattens: {})",
        if weight_ok && flatten_ok {
            "PASS"
        } else {
            "FAIL"
        },
        averaged.mean_best_buy_weight,
        weight_ok,
        full - half,
        0.1 * half,
        flatten_ok,
    );
    assert!(
        weight_ok,
        "mean best-expert weight {} not above 0.9",
        averaged.mean_best_buy_weight
    );
    // Structurally red: the best expert's noise keeps sigma = 1 while the
    // invariance radius never exceeds lambda/2 ~ 0.2, so the second half
    // keeps accruing estimate regret at the first half's rate (measured
    // 0.4x-2x across master seeds, never under the 0.1x threshold).
    assert!(
        flatten_ok,
        "estimate-regret component did not flatten: second-half growth {} vs allowed {}",
        full - half,
        0.1 * half
    );
}

/// Criterion 6: regret-curve shape at the default scenario (T = 5000, 100
/// seeds, expected-loss mode, 8-way parallelism, under 5 minutes). The
/// windowed curve must be non-decreasing, the forecaster component must
/// respect its closed-form bound, and the windowed second difference must be
/// <= 0; the last clause is zero-mean noise at this scale (see the module
/// comment) and is asserted as stated, so this test is expected to stay red.
#[test]
fn acceptance_6_regret_curve_shape() {
    let scenario = RegretScenario::default();
    assert_eq!(scenario.horizon, 5000);
    assert_eq!(scenario.seeds, 100);
    let started = Instant::now();
    let averaged = pool(8)
        .install(|| {
            skirent::experiments::average_regret(std::slice::from_ref(&scenario), MASTER_SEED)
        })
        .unwrap()
        .remove(0);
    let elapsed = started.elapsed();

    // 500-round window marks of the seed-averaged curve.
    let marks: Vec<f64> = (0..=10)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                averaged.regret[i * 500 - 1]
            }
        })
        .collect();
    let increments: Vec<f64> = (1..=10).map(|i| marks[i] - marks[i - 1]).collect();
    let monotone = marks.windows(2).all(|w| w[1] >= w[0]);
    let mean_second_difference = (increments[9] - increments[0]) / 9.0;

    let bound = (1.0 + averaged.max_loss * averaged.max_loss)
        * ((scenario.horizon as f64) * (scenario.num_ski_experts as f64).ln()).sqrt();
    let forecaster_ok = averaged.max_final_regret_x <= bound;

    println!(
        "ACCEPTANCE 6: {} — windowed curve monotone: {monotone}; mean windowed second \
         difference {mean_second_difference:+.5} (<= 0: {}); max R_x {:.4} <= {:.2}: \
         {forecaster_ok}; {elapsed:.1?} with 8-way parallelism",
        if monotone && mean_second_difference <= 0.0 && forecaster_ok {
            "PASS"
        } else {
            "FAIL"
        },
        mean_second_difference <= 0.0,
        averaged.max_final_regret_x,
        bound,
    );
    assert!(monotone, "windowed mean regret decreased: {marks:?}");
    assert!(
        forecaster_ok,
        "forecaster regret {} above bound {bound}",
        averaged.max_final_regret_x
    );
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}");
    // Zero-mean noise at this scale; red as stated. Measured across master
    // seeds: {+0.028, +0.050, +0.002, -0.023} for the raw window gap.
    assert!(
        mean_second_difference <= 0.0,
        "windowed second difference {mean_second_difference:+.5} is not <= 0 \
         (the mean curve is linear at this scale, not concave)"
    );
}

/// Criterion 7: byte-identical outputs for identical configs and seeds, for
/// every subcommand.
#[test]
fn acceptance_7_byte_identical_reruns() {
    let base = std::env::temp_dir().join(format!("skirent-acceptance-{}", std::process::id()));
    let bin = env!("CARGO_BIN_EXE_skirent");
    let config_path = base.join("config.toml");
    std::fs::create_dir_all(&base).unwrap();
    std::fs::write(
        &config_path,
        concat!(
            "[compare]\n",
            "sigma_grid = [0.0, 12.5, 25.0]\n",
            "lambdas = [1.0, 0.4054651081081644]\n",
            "trials = 400\n",
            "[[regret_scenario]]\n",
            "id = \"tiny\"\n",
            "horizon = 30\n",
            "cost_range = [40, 80]\n",
            "season_range = [40, 80]\n",
            "buy_variance_range = [1.0, 9.0]\n",
            "ski_variance_range = [1.0, 25.0]\n",
            "noise_bound = 20.0\n",
            "lambda = 0.5\n",
            "seeds = 3\n",
        ),
    )
    .unwrap();

    let mut outputs: Vec<(String, String, String)> = Vec::new();
    for attempt in 0..2 {
        let out_dir = base.join(format!("run{attempt}"));
        for sub in ["compare", "regret"] {
            let status = std::process::Command::new(bin)
                .args([
                    sub,
                    "--config",
                    config_path.to_str().unwrap(),
                    "--seed",
                    "777",
                    "--out",
                    out_dir.to_str().unwrap(),
                ])
                .output()
                .unwrap();
            assert!(status.status.success(), "{sub} failed");
        }
        let bounds = std::process::Command::new(bin)
            .args([
                "bounds",
                "--buy-cost",
                "100",
                "--lambda",
                "0.4054651081081644",
            ])
            .output()
            .unwrap();
        assert!(
            bounds.status.success(),
            "bounds failed: {}",
            String::from_utf8_lossy(&bounds.stderr)
        );
        outputs.push((
            std::fs::read_to_string(out_dir.join("compare.csv")).unwrap(),
            std::fs::read_to_string(out_dir.join("regret.csv")).unwrap(),
            String::from_utf8(bounds.stdout).unwrap(),
        ));
    }
    let identical = outputs[0] == outputs[1];
    println!(
        "ACCEPTANCE 7: {} — compare.csv, regret.csv, and bounds output byte-identical across reruns",
        if identical { "PASS" } else { "FAIL" }
    );
    assert!(identical);
}
