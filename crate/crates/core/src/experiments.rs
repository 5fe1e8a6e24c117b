//! Reproducible Monte-Carlo harnesses.
//!
//! Two studies: a competitive-ratio comparison of buy-day rules under noisy
//! season predictions, and regret curves of the sequential learner averaged
//! over seeds. Trials use common random numbers — one `(season, noise,
//! buy-day)` draw per trial shared across the whole grid — so curves differ
//! only where the algorithms actually behave differently.
//!
//! Trials run in parallel in fixed-size chunks that are folded in order, so
//! results are identical for any thread count.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::learner::{run, LearnerConfig, LossMode};
use crate::seed::{derive_seed, trial_rng};
use crate::ski::{nint, Branch, BuyDayDistribution, SkiRentalInstance};
use crate::{Error, Result};

/// Scenario index used in seed derivation.
const COMPARE_STREAM: u64 = 0x10;
const REGRET_STREAM: u64 = 0x20;

const TRIAL_CHUNK: u64 = 1024;

/// The buy-day rules entered in the ratio comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareAlgorithm {
    /// The perturbation-tolerant rule from [`crate::ski`].
    CostRobust,
    /// The earlier prediction-based randomized rule: threshold `y >= b`,
    /// support `ceil(lambda b)` / `ceil(b / lambda)`, day probabilities
    /// proportional to `(1 - 1/b)^(support - i)`.
    RandomizedBaseline,
    /// Rent until day `b`, then buy.
    BreakEven,
}

impl CompareAlgorithm {
    pub const ALL: [CompareAlgorithm; 3] = [
        CompareAlgorithm::CostRobust,
        CompareAlgorithm::RandomizedBaseline,
        CompareAlgorithm::BreakEven,
    ];

    /// Stable identifier used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            CompareAlgorithm::CostRobust => "cost_robust",
            CompareAlgorithm::RandomizedBaseline => "randomized_baseline",
            CompareAlgorithm::BreakEven => "break_even",
        }
    }
}

/// Competitive-ratio study: a fixed buy cost, seasons uniform on `[1, 4b]`,
/// predictions `y = x + N(0, sigma^2)` rounded and clamped, swept over a
/// sigma grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareScenario {
    pub buy_cost: u32,
    pub sigma_grid: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub trials: u64,
}

impl Default for CompareScenario {
    /// b = 100, sigma 0..50 in steps of 2.5, lambdas {1, ln 1.5}, 10000
    /// trials.
    fn default() -> Self {
        CompareScenario {
            buy_cost: 100,
            sigma_grid: (0..=20).map(|i| i as f64 * 2.5).collect(),
            lambdas: vec![1.0, 1.5f64.ln()],
            trials: 10_000,
        }
    }
}

/// One aggregated cell of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub sigma: f64,
    pub algorithm: CompareAlgorithm,
    pub lambda: f64,
    pub mean_ratio: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Day probabilities of the baseline randomized rule. Only the support size
/// depends on the branch; the geometric base is `1 - 1/b` either way.
fn baseline_probabilities(buy_cost: u32, support: usize) -> Vec<f64> {
    let b = buy_cost as f64;
    let base = 1.0 - 1.0 / b;
    let scale = 1.0 / (b * (1.0 - base.powi(support as i32)));
    let mut probs = vec![0.0; support];
    let mut p = scale;
    for slot in probs.iter_mut().rev() {
        *slot = p;
        p *= base;
    }
    probs
}

fn day_from_probabilities(probs: &[f64], u: f64) -> u32 {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return (i + 1) as u32;
        }
    }
    probs.len() as u32
}

/// Pre-built per-(lambda, branch) distributions so each trial is a lookup.
struct CompareTables {
    /// [lambda][0 = early branch (y >= b), 1 = late].
    cost_robust: Vec<[BuyDayDistribution; 2]>,
    baseline: Vec<[Vec<f64>; 2]>,
}

impl CompareTables {
    fn build(scenario: &CompareScenario) -> Result<Self> {
        let b = scenario.buy_cost;
        let mut cost_robust = Vec::new();
        let mut baseline = Vec::new();
        for &lambda in &scenario.lambdas {
            cost_robust.push([
                BuyDayDistribution::for_branch(b as f64, Branch::BuyEarly, lambda)?,
                BuyDayDistribution::for_branch(b as f64, Branch::BuyLate, lambda)?,
            ]);
            let early_support = (lambda * b as f64).ceil() as usize;
            let late_support = (b as f64 / lambda).ceil() as usize;
            baseline.push([
                baseline_probabilities(b, early_support),
                baseline_probabilities(b, late_support),
            ]);
        }
        Ok(Self {
            cost_robust,
            baseline,
        })
    }
}

/// Runs the ratio comparison. Every `(sigma, algorithm, lambda)` cell reuses
/// the same per-trial draws.
pub fn run_compare(scenario: &CompareScenario, master_seed: u64) -> Result<Vec<CompareRow>> {
    if scenario.trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    if scenario.sigma_grid.is_empty() {
        return Err(Error::InvalidConfig("sigma grid is empty".into()));
    }
    if scenario.buy_cost < 2 {
        return Err(Error::InvalidConfig("buy cost must be at least 2".into()));
    }
    for &sigma in &scenario.sigma_grid {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma {sigma} must be non-negative"
            )));
        }
    }
    for &lambda in &scenario.lambdas {
        if !(lambda > 0.0 && lambda <= 1.0) || lambda * (scenario.buy_cost as f64) < 1.0 {
            return Err(Error::InvalidHyperparameter(format!(
                "lambda {lambda} invalid for buy cost {}",
                scenario.buy_cost
            )));
        }
    }

    let tables = CompareTables::build(scenario)?;
    let b = scenario.buy_cost;
    let n_sigma = scenario.sigma_grid.len();
    let n_lambda = scenario.lambdas.len();
    let cells = n_sigma * CompareAlgorithm::ALL.len() * n_lambda;

    let chunk_count = scenario.trials.div_ceil(TRIAL_CHUNK);
    let chunks: Vec<CellAccumulator> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * TRIAL_CHUNK;
            let end = (start + TRIAL_CHUNK).min(scenario.trials);
            let mut acc = CellAccumulator::new(cells);
            for trial in start..end {
                let mut rng = trial_rng(master_seed, COMPARE_STREAM, trial);
                let season = rng.gen_range(1..=4 * b);
                let noise: f64 = StandardNormal.sample(&mut rng);
                let day_u: f64 = rng.gen();
                let instance = SkiRentalInstance::new(b, season).expect("valid instance");
                let opt = instance.opt_cost() as f64;
                for (si, &sigma) in scenario.sigma_grid.iter().enumerate() {
                    let predicted = nint(season as f64 + sigma * noise)
                        .expect("finite prediction")
                        .max(0) as u32;
                    let early = predicted >= b;
                    for (li, _) in scenario.lambdas.iter().enumerate() {
                        for (ai, algorithm) in CompareAlgorithm::ALL.iter().enumerate() {
                            let day = match algorithm {
                                CompareAlgorithm::CostRobust => {
                                    tables.cost_robust[li][usize::from(!early)].day_at(day_u)
                                }
                                CompareAlgorithm::RandomizedBaseline => day_from_probabilities(
                                    &tables.baseline[li][usize::from(!early)],
                                    day_u,
                                ),
                                CompareAlgorithm::BreakEven => b,
                            };
                            let ratio = instance.alg_cost(day) as f64 / opt;
                            acc.add((si * 3 + ai) * n_lambda + li, ratio);
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = CellAccumulator::new(cells);
    for chunk in chunks {
        total.merge(chunk);
    }

    let mut rows = Vec::with_capacity(cells);
    for (si, &sigma) in scenario.sigma_grid.iter().enumerate() {
        for (ai, &algorithm) in CompareAlgorithm::ALL.iter().enumerate() {
            for (li, &lambda) in scenario.lambdas.iter().enumerate() {
                let cell = (si * 3 + ai) * n_lambda + li;
                let (mean, std_error) = total.summary(cell);
                rows.push(CompareRow {
                    sigma,
                    algorithm,
                    lambda,
                    mean_ratio: mean,
                    std_error,
                    trials: scenario.trials,
                });
            }
        }
    }
    Ok(rows)
}

/// Kahan-compensated sum and sum of squares per cell.
struct CellAccumulator {
    count: u64,
    sums: Vec<KahanSum>,
    squares: Vec<KahanSum>,
}

impl CellAccumulator {
    fn new(cells: usize) -> Self {
        Self {
            count: 0,
            sums: vec![KahanSum::default(); cells],
            squares: vec![KahanSum::default(); cells],
        }
    }

    fn add(&mut self, cell: usize, value: f64) {
        if cell == 0 {
            self.count += 1;
        }
        self.sums[cell].add(value);
        self.squares[cell].add(value * value);
    }

    fn merge(&mut self, other: CellAccumulator) {
        self.count += other.count;
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            a.add(b.value());
        }
        for (a, b) in self.squares.iter_mut().zip(other.squares) {
            a.add(b.value());
        }
    }

    fn summary(&self, cell: usize) -> (f64, f64) {
        let n = self.count as f64;
        let sum = self.sums[cell].value();
        let mean = sum / n;
        if self.count < 2 {
            return (mean, 0.0);
        }
        let variance = (self.squares[cell].value() - sum * sum / n) / (n - 1.0);
        (mean, (variance.max(0.0) / n).sqrt())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Regret study: the learner configuration plus how many seeded repetitions
/// to average.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretScenario {
    pub id: String,
    pub horizon: u64,
    pub num_buy_experts: usize,
    pub num_ski_experts: usize,
    pub cost_range: (u32, u32),
    pub season_range: (u32, u32),
    /// Cost-panel variances span this range at uniform intervals.
    pub buy_variance_range: (f64, f64),
    /// Season-panel variances span this range at uniform intervals.
    pub ski_variance_range: (f64, f64),
    pub noise_bound: f64,
    pub lambda: f64,
    pub seeds: u64,
    pub loss_mode: LossMode,
}

impl Default for RegretScenario {
    fn default() -> Self {
        RegretScenario {
            id: "default".into(),
            horizon: 5000,
            num_buy_experts: 5,
            num_ski_experts: 5,
            cost_range: (200, 700),
            season_range: (200, 700),
            buy_variance_range: (1.0, 20.0),
            ski_variance_range: (1.0, 100.0),
            noise_bound: 50.0,
            lambda: 1.5f64.ln(),
            seeds: 100,
            loss_mode: LossMode::Expected,
        }
    }
}

impl RegretScenario {
    pub fn learner_config(&self) -> Result<LearnerConfig> {
        Ok(LearnerConfig {
            horizon: self.horizon,
            cost_range: self.cost_range,
            season_range: self.season_range,
            buy_variances: crate::experts::linspace(
                self.buy_variance_range.0,
                self.buy_variance_range.1,
                self.num_buy_experts,
            )?,
            noise_bound: self.noise_bound,
            ski_variances: crate::experts::linspace(
                self.ski_variance_range.0,
                self.ski_variance_range.1,
                self.num_ski_experts,
            )?,
            lambda: self.lambda,
            loss_mode: self.loss_mode,
            ski_rate: None,
            buy_scale: None,
        })
    }
}

/// One row of the averaged regret table.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretRow {
    pub config_id: String,
    pub round: u64,
    pub regret: f64,
    pub regret_x: f64,
    pub regret_b: f64,
}

/// Seed-averaged curves for one scenario, kept whole for shape checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRegret {
    pub config_id: String,
    pub regret: Vec<f64>,
    pub regret_x: Vec<f64>,
    pub regret_b: Vec<f64>,
    /// Mean final weight of the lowest-variance cost expert.
    pub mean_best_buy_weight: f64,
    /// Largest realized per-round loss across all seeds and rounds.
    pub max_loss: f64,
    /// Largest final forecaster-regret component across seeds.
    pub max_final_regret_x: f64,
    /// Mean cumulative realized mixture loss at the horizon.
    pub mean_cumulative_mixture_loss: f64,
}

/// Runs every scenario over its seeds (in parallel) and averages the regret
/// curves pointwise.
pub fn average_regret(
    scenarios: &[RegretScenario],
    master_seed: u64,
) -> Result<Vec<AveragedRegret>> {
    scenarios
        .iter()
        .enumerate()
        .map(|(index, scenario)| {
            if scenario.seeds == 0 {
                return Err(Error::InvalidConfig("need at least one seed".into()));
            }
            let config = scenario.learner_config()?;
            let per_seed: Vec<Result<SeedSummary>> = (0..scenario.seeds)
                .into_par_iter()
                .map(|trial| {
                    let seed = derive_seed(master_seed, REGRET_STREAM + index as u64, trial);
                    let trace = run(&config, seed)?;
                    let best = config
                        .buy_variances
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    let max_loss = trace
                        .records
                        .iter()
                        .flat_map(|r| r.losses.iter())
                        .fold(0.0f64, |acc, &l| acc.max(l));
                    let mixture_total = trace.records.iter().map(|r| r.mixture_loss).sum::<f64>();
                    let best_weight = trace
                        .records
                        .last()
                        .map(|r| r.buy_weights[best])
                        .unwrap_or(1.0);
                    Ok(SeedSummary {
                        regret: trace.cumulative_regret,
                        regret_x: trace.regret_x,
                        regret_b: trace.regret_b,
                        best_weight,
                        max_loss,
                        mixture_total,
                    })
                })
                .collect();

            let horizon = scenario.horizon as usize;
            let mut regret = vec![KahanSum::default(); horizon];
            let mut regret_x = vec![KahanSum::default(); horizon];
            let mut regret_b = vec![KahanSum::default(); horizon];
            let mut best_weight = KahanSum::default();
            let mut mixture = KahanSum::default();
            let mut max_loss = 0.0f64;
            let mut max_final_regret_x = f64::NEG_INFINITY;
            for summary in per_seed {
                let summary = summary?;
                for (slot, v) in regret.iter_mut().zip(&summary.regret) {
                    slot.add(*v);
                }
                for (slot, v) in regret_x.iter_mut().zip(&summary.regret_x) {
                    slot.add(*v);
                }
                for (slot, v) in regret_b.iter_mut().zip(&summary.regret_b) {
                    slot.add(*v);
                }
                best_weight.add(summary.best_weight);
                mixture.add(summary.mixture_total);
                max_loss = max_loss.max(summary.max_loss);
                max_final_regret_x =
                    max_final_regret_x.max(summary.regret_x.last().copied().unwrap_or(0.0));
            }
            let n = scenario.seeds as f64;
            Ok(AveragedRegret {
                config_id: scenario.id.clone(),
                regret: regret.iter().map(|k| k.value() / n).collect(),
                regret_x: regret_x.iter().map(|k| k.value() / n).collect(),
                regret_b: regret_b.iter().map(|k| k.value() / n).collect(),
                mean_best_buy_weight: best_weight.value() / n,
                max_loss,
                max_final_regret_x,
                mean_cumulative_mixture_loss: mixture.value() / n,
            })
        })
        .collect()
}

struct SeedSummary {
    regret: Vec<f64>,
    regret_x: Vec<f64>,
    regret_b: Vec<f64>,
    best_weight: f64,
    max_loss: f64,
    mixture_total: f64,
}

/// Flattens the averaged curves into one row per round, the layout the CSV
/// writer emits.
pub fn run_regret_sweep(scenarios: &[RegretScenario], master_seed: u64) -> Result<Vec<RegretRow>> {
    let averaged = average_regret(scenarios, master_seed)?;
    let mut rows = Vec::new();
    for avg in averaged {
        for t in 0..avg.regret.len() {
            rows.push(RegretRow {
                config_id: avg.config_id.clone(),
                round: t as u64 + 1,
                regret: avg.regret[t],
                regret_x: avg.regret_x[t],
                regret_b: avg.regret_b[t],
            });
        }
    }
    Ok(rows)
}
