//! The sequential learner: every round it aggregates the cost panel into a
//! single estimate, lets each season expert pick a strategy through the
//! randomized buy-day rule, and feeds both panels' losses back into their
//! forecasters.
//!
//! Two loss feeds per round:
//! * the realized vector, computed with the aggregated cost estimate — this is
//!   what the season forecaster learns from;
//! * a hindsight vector computed with the true cost, kept only for regret
//!   accounting and never fed to any weight update.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::experts::{draw_instance, BuyExpertPanel, SkiExpertPanel};
use crate::hedge::{HedgeState, Schedule};
use crate::seed::rng_from_seed;
use crate::ski::{
    expected_alg_cost, normalized_loss, Branch, BuyDayDistribution, SkiRentalInstance,
};
use crate::{Error, Result};

/// How ski-expert losses are produced each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossMode {
    /// Exact expectation over the buy-day distribution (deterministic given
    /// the predictions; the default).
    Expected,
    /// One sampled buy day per expert. The same uniform draw is reused for
    /// the realized and hindsight losses, so estimates inside the robustness
    /// radius reproduce the hindsight loss exactly.
    Sampled,
}

/// Full parameterization of a learner run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    /// Number of rounds T.
    pub horizon: u64,
    /// Uniform integer law for the per-round buy cost.
    pub cost_range: (u32, u32),
    /// Uniform integer law for the per-round season length.
    pub season_range: (u32, u32),
    /// Per-expert variances of the cost panel.
    pub buy_variances: Vec<f64>,
    /// Hard support bound for cost-prediction noise.
    pub noise_bound: f64,
    /// Per-expert variances of the season panel.
    pub ski_variances: Vec<f64>,
    /// Buy-day trade-off parameter in (0, 1].
    pub lambda: f64,
    pub loss_mode: LossMode,
    /// Override for the season forecaster's constant rate
    /// (default `sqrt(ln n / T)`).
    pub ski_rate: Option<f64>,
    /// Override for the cost forecaster's decreasing scale
    /// (default `sqrt(ln m)`).
    pub buy_scale: Option<f64>,
}

impl Default for LearnerConfig {
    /// Five experts per panel, uniform costs and seasons on [200, 700],
    /// cost-noise variances 1..20 under a hard bound of 50, season-noise
    /// variances 1..100, lambda = ln 1.5, 5000 rounds.
    fn default() -> Self {
        LearnerConfig {
            horizon: 5000,
            cost_range: (200, 700),
            season_range: (200, 700),
            buy_variances: crate::experts::linspace(1.0, 20.0, 5).unwrap(),
            noise_bound: 50.0,
            ski_variances: crate::experts::linspace(1.0, 100.0, 5).unwrap(),
            lambda: 1.5f64.ln(),
            loss_mode: LossMode::Expected,
            ski_rate: None,
            buy_scale: None,
        }
    }
}

impl LearnerConfig {
    /// Stable digest of every field, recorded in traces so a CSV row can be
    /// matched back to the exact configuration that produced it.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.horizon.hash(&mut hasher);
        self.cost_range.hash(&mut hasher);
        self.season_range.hash(&mut hasher);
        for v in &self.buy_variances {
            v.to_bits().hash(&mut hasher);
        }
        self.noise_bound.to_bits().hash(&mut hasher);
        for v in &self.ski_variances {
            v.to_bits().hash(&mut hasher);
        }
        self.lambda.to_bits().hash(&mut hasher);
        self.loss_mode.hash(&mut hasher);
        self.ski_rate.map(f64::to_bits).hash(&mut hasher);
        self.buy_scale.map(f64::to_bits).hash(&mut hasher);
        hasher.finish()
    }
}

/// Everything observed and decided in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: u64,
    pub instance: SkiRentalInstance,
    pub buy_predictions: Vec<f64>,
    /// Cost-panel weights used this round.
    pub buy_weights: Vec<f64>,
    /// The aggregated cost estimate handed to every season expert.
    pub cost_estimate: f64,
    /// Raw squared prediction errors (the cost forecaster's loss feed).
    pub buy_squared_errors: Vec<f64>,
    pub ski_predictions: Vec<u32>,
    /// Season-panel weights used this round.
    pub ski_weights: Vec<f64>,
    /// Realized losses, computed with the cost estimate.
    pub losses: Vec<f64>,
    /// Comparator losses, computed with the true cost. Not fed to updates.
    pub hindsight_losses: Vec<f64>,
    /// Weighted realized loss actually suffered by the learner.
    pub mixture_loss: f64,
}

/// A completed run: the per-round log plus cumulative regret sequences.
///
/// `cumulative_regret[t]` is defined as `regret_x[t] + regret_b[t]`, so the
/// decomposition is an exact identity. Both components compare against the
/// same best-in-hindsight season expert `best_ski_expert`, chosen at the
/// horizon by minimal cumulative hindsight loss (lowest index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<RoundRecord>,
    pub cumulative_regret: Vec<f64>,
    /// Forecaster component: mixture loss minus the best expert's realized loss.
    pub regret_x: Vec<f64>,
    /// Estimate component: the best expert's realized minus hindsight loss.
    pub regret_b: Vec<f64>,
    pub best_ski_expert: usize,
    pub config_fingerprint: u64,
    pub master_seed: u64,
}

impl RunTrace {
    /// Final cumulative regret (zero for an empty trace).
    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

/// Per-round regret split recomputed from the stored loss vectors; the same
/// arithmetic `run` uses, exposed so traces can be audited independently.
pub fn regret_components(trace: &RunTrace) -> (Vec<f64>, Vec<f64>) {
    components_from(&trace.records, trace.best_ski_expert)
}

fn components_from(records: &[RoundRecord], best: usize) -> (Vec<f64>, Vec<f64>) {
    let mut regret_x = Vec::with_capacity(records.len());
    let mut regret_b = Vec::with_capacity(records.len());
    let mut acc_x = 0.0;
    let mut acc_b = 0.0;
    for record in records {
        acc_x += record.mixture_loss - record.losses[best];
        acc_b += record.losses[best] - record.hindsight_losses[best];
        regret_x.push(acc_x);
        regret_b.push(acc_b);
    }
    (regret_x, regret_b)
}

/// The two expert panels plus the two forecasters, stepped one round at a
/// time.
#[derive(Debug, Clone)]
pub struct SequentialLearner {
    config: LearnerConfig,
    buy_panel: BuyExpertPanel,
    ski_panel: SkiExpertPanel,
    buy_weights: HedgeState,
    ski_weights: HedgeState,
}

impl SequentialLearner {
    pub fn new(config: LearnerConfig) -> Result<Self> {
        if !(config.lambda > 0.0 && config.lambda <= 1.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "lambda {} outside (0, 1]",
                config.lambda
            )));
        }
        let buy_panel = BuyExpertPanel::new(
            config.buy_variances.clone(),
            config.noise_bound,
            config.cost_range,
        )?;
        let ski_panel = SkiExpertPanel::new(config.ski_variances.clone())?;
        if config.season_range.0 < 1 || config.season_range.0 > config.season_range.1 {
            return Err(Error::InvalidConfig("invalid season range".into()));
        }
        let num_ski = ski_panel.num_experts();
        let num_buy = buy_panel.num_experts();
        let ski_rate = config
            .ski_rate
            .unwrap_or_else(|| ((num_ski as f64).ln() / config.horizon.max(1) as f64).sqrt());
        let buy_scale = config
            .buy_scale
            .unwrap_or_else(|| (num_buy as f64).ln().sqrt());
        let ski_weights = HedgeState::new(num_ski, Schedule::Constant { rate: ski_rate })?
            .with_loss_bound(per_round_loss_bound(config.cost_range));
        let buy_weights = HedgeState::new(num_buy, Schedule::Decreasing { scale: buy_scale })?
            .with_loss_bound(buy_panel.max_squared_error());
        Ok(Self {
            config,
            buy_panel,
            ski_panel,
            buy_weights,
            ski_weights,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn buy_weight_state(&self) -> &HedgeState {
        &self.buy_weights
    }

    pub fn ski_weight_state(&self) -> &HedgeState {
        &self.ski_weights
    }

    /// One round: cost predictions -> weights -> aggregated estimate ->
    /// season predictions -> weights -> loss vector -> both updates.
    pub fn run_round<R: Rng + ?Sized>(
        &mut self,
        instance: &SkiRentalInstance,
        rng: &mut R,
    ) -> Result<RoundRecord> {
        let round = self.ski_weights.round() + 1;
        let buy_predictions = self.buy_panel.predict(instance.buy_cost(), rng)?;
        let buy_weights = self.buy_weights.weights();
        let cost_estimate = weighted_estimate(&buy_predictions, &buy_weights);
        let ski_predictions = self.ski_panel.predict(instance.season_length(), rng);
        let ski_weights = self.ski_weights.weights();

        let (losses, hindsight_losses) = loss_vectors(
            instance,
            cost_estimate,
            &ski_predictions,
            self.config.lambda,
            self.config.loss_mode,
            rng,
        )?;
        let mixture_loss = dot(&ski_weights, &losses);

        self.ski_weights.update(&losses)?;
        let true_cost = instance.buy_cost() as f64;
        let buy_squared_errors: Vec<f64> = buy_predictions
            .iter()
            .map(|a| (a - true_cost) * (a - true_cost))
            .collect();
        self.buy_weights.update(&buy_squared_errors)?;

        Ok(RoundRecord {
            round,
            instance: *instance,
            buy_predictions,
            buy_weights,
            cost_estimate,
            buy_squared_errors,
            ski_predictions,
            ski_weights,
            losses,
            hindsight_losses,
            mixture_loss,
        })
    }
}

fn weighted_estimate(values: &[f64], weights: &[f64]) -> f64 {
    dot(values, weights)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Realized (estimate-driven) and hindsight (true-cost) loss vectors for one
/// round. Experts sharing a branch share a distribution, so each input needs
/// at most two expectation evaluations.
fn loss_vectors<R: Rng + ?Sized>(
    instance: &SkiRentalInstance,
    cost_estimate: f64,
    ski_predictions: &[u32],
    lambda: f64,
    mode: LossMode,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !cost_estimate.is_finite() || lambda * cost_estimate < 1.0 {
        return Err(Error::InvalidHyperparameter(format!(
            "aggregated cost estimate {cost_estimate} gives lambda * estimate < 1; \
             the buy-day rule has no support"
        )));
    }
    let true_cost = instance.buy_cost() as f64;
    match mode {
        LossMode::Expected => {
            let mut realized = BranchLossCache::new(instance, cost_estimate, lambda);
            let mut hindsight = BranchLossCache::new(instance, true_cost, lambda);
            let mut losses = Vec::with_capacity(ski_predictions.len());
            let mut comparator = Vec::with_capacity(ski_predictions.len());
            for &y in ski_predictions {
                losses.push(realized.loss_for(y)?);
                comparator.push(hindsight.loss_for(y)?);
            }
            Ok((losses, comparator))
        }
        LossMode::Sampled => {
            let mut realized = BranchDistCache::new(cost_estimate, lambda);
            let mut hindsight = BranchDistCache::new(true_cost, lambda);
            let mut losses = Vec::with_capacity(ski_predictions.len());
            let mut comparator = Vec::with_capacity(ski_predictions.len());
            for &y in ski_predictions {
                // One uniform per expert, shared across both cost inputs.
                let u: f64 = rng.gen();
                let day = realized.dist_for(y)?.day_at(u);
                let hind_day = hindsight.dist_for(y)?.day_at(u);
                losses.push(normalized_loss(instance, instance.alg_cost(day) as f64));
                comparator.push(normalized_loss(
                    instance,
                    instance.alg_cost(hind_day) as f64,
                ));
            }
            Ok((losses, comparator))
        }
    }
}

/// Expected loss per branch for a fixed (instance, cost input); computed at
/// most once per branch.
struct BranchLossCache<'a> {
    instance: &'a SkiRentalInstance,
    cost_input: f64,
    threshold: i64,
    lambda: f64,
    per_branch: [Option<f64>; 2],
}

impl<'a> BranchLossCache<'a> {
    fn new(instance: &'a SkiRentalInstance, cost_input: f64, lambda: f64) -> Self {
        Self {
            instance,
            cost_input,
            threshold: cost_input.round_ties_even() as i64,
            lambda,
            per_branch: [None, None],
        }
    }

    fn loss_for(&mut self, predicted_days: u32) -> Result<f64> {
        let branch = if (predicted_days as i64) >= self.threshold {
            Branch::BuyEarly
        } else {
            Branch::BuyLate
        };
        let slot = branch as usize;
        if let Some(loss) = self.per_branch[slot] {
            return Ok(loss);
        }
        let dist = BuyDayDistribution::for_branch(self.cost_input, branch, self.lambda)?;
        let loss = normalized_loss(self.instance, expected_alg_cost(self.instance, &dist));
        self.per_branch[slot] = Some(loss);
        Ok(loss)
    }
}

struct BranchDistCache {
    cost_input: f64,
    threshold: i64,
    lambda: f64,
    per_branch: [Option<BuyDayDistribution>; 2],
}

impl BranchDistCache {
    fn new(cost_input: f64, lambda: f64) -> Self {
        Self {
            cost_input,
            threshold: cost_input.round_ties_even() as i64,
            lambda,
            per_branch: [None, None],
        }
    }

    fn dist_for(&mut self, predicted_days: u32) -> Result<&BuyDayDistribution> {
        let branch = if (predicted_days as i64) >= self.threshold {
            Branch::BuyEarly
        } else {
            Branch::BuyLate
        };
        let slot = branch as usize;
        if self.per_branch[slot].is_none() {
            self.per_branch[slot] = Some(BuyDayDistribution::for_branch(
                self.cost_input,
                branch,
                self.lambda,
            )?);
        }
        Ok(self.per_branch[slot].as_ref().unwrap())
    }
}

/// Runs the full horizon with instances drawn from the configured ranges,
/// using a stream derived from `master_seed`. Identical seeds produce
/// bit-identical traces.
pub fn run(config: &LearnerConfig, master_seed: u64) -> Result<RunTrace> {
    let mut rng = rng_from_seed(master_seed);
    let mut learner = SequentialLearner::new(config.clone())?;
    let mut records = Vec::with_capacity(config.horizon as usize);
    for _ in 0..config.horizon {
        let instance = draw_instance(config.cost_range, config.season_range, &mut rng)?;
        records.push(learner.run_round(&instance, &mut rng)?);
    }

    let best_ski_expert = best_hindsight_expert(&records, config.ski_variances.len());
    let (regret_x, regret_b) = components_from(&records, best_ski_expert);
    let cumulative_regret = regret_x.iter().zip(&regret_b).map(|(x, b)| x + b).collect();

    Ok(RunTrace {
        records,
        cumulative_regret,
        regret_x,
        regret_b,
        best_ski_expert,
        config_fingerprint: config.fingerprint(),
        master_seed,
    })
}

fn best_hindsight_expert(records: &[RoundRecord], num_experts: usize) -> usize {
    let mut totals = vec![0.0f64; num_experts];
    for record in records {
        for (total, loss) in totals.iter_mut().zip(&record.hindsight_losses) {
            *total += loss;
        }
    }
    totals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Uniform cap on the per-round normalized loss of any season expert, for
/// costs drawn from `cost_range`. The worst of the four strategy/season
/// orderings; for wide ranges the "bought just before a short season ended"
/// case dominates at the top of the cost range.
pub fn per_round_loss_bound(cost_range: (u32, u32)) -> f64 {
    let lo = cost_range.0 as f64;
    let hi = cost_range.1 as f64;
    debug_assert!(lo >= 2.0 && lo <= hi);
    // Season outlasts the support, the strategy buys on some rented day.
    let long_season_bought = (lo - 1.0) * (1.0 + lo) / lo;
    // Season outlasts the cost but ends before the sampled day.
    let long_season_rented = lo;
    // Short season, the sampled day lands inside it.
    let short_season_bought = hi;
    long_season_bought
        .max(long_season_rented)
        .max(short_season_bought)
}

/// Round count after which the aggregated cost estimate stays inside the
/// robustness radius with probability at least `1 - delta`, under the
/// small-best-variance assumption `gamma_min = delta * epsilon^2 / (T c)`.
/// The three arms grow with the horizon and shrink with the variance gap.
pub fn convergence_round(
    delta: f64,
    epsilon: f64,
    gap: f64,
    num_buy_experts: u64,
    slack: f64,
    horizon: u64,
) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence delta {delta} outside (0, 1)"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(
            "robustness radius must be positive".into(),
        ));
    }
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::InvalidConfig(
            "sub-optimality gap must be positive".into(),
        ));
    }
    if num_buy_experts < 2 {
        return Err(Error::InvalidConfig("need at least two buy experts".into()));
    }
    if !(slack > 1.0 && slack.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "slack factor {slack} must exceed 1"
        )));
    }
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    let m = num_buy_experts as f64;
    let t = horizon as f64;
    let log_term =
        (2.0 * m / (slack - 1.0) * (1.0 + t * slack * gap / (delta * epsilon * epsilon))).ln();
    let arm_hoeffding = 1.0 + 8.0 / (gap * gap) * log_term;
    let arm_weight_decay = 1.0 + log_term * log_term / (2.0 * gap * gap * m.ln());
    let arm_floor = 1.0 + (4.0 / (gap * gap)).ceil();
    Ok(arm_hoeffding.max(arm_weight_decay).max(arm_floor).ceil() as u64)
}

/// Worst-case cumulative regret for a run: the forecaster term
/// `(1 + B^2) sqrt(T ln n)` plus `B` per round until the estimate settles.
pub fn regret_upper_bound(
    loss_bound: f64,
    horizon: u64,
    num_ski_experts: u64,
    convergence_round: u64,
) -> f64 {
    (1.0 + loss_bound * loss_bound) * ((horizon as f64) * (num_ski_experts as f64).ln()).sqrt()
        + loss_bound * convergence_round as f64
}
