//! A single rent-or-buy instance.
//!
//! The strategy implemented here samples the day on which to stop renting and
//! buy from one of two truncated-geometric profiles, chosen by comparing the
//! season-length prediction against the (possibly estimated) buy cost. Its
//! defining property is that the sampled distribution depends on the cost
//! input only through an integer support size, so any estimate within
//! [`robustness_radius`] of the true cost produces the *same* distribution.

use rand::Rng;

use crate::{Error, Result};

/// Nearest integer, with exact half-integers rounded to the even neighbor.
pub fn nint(v: f64) -> Result<i64> {
    if !v.is_finite() {
        return Err(Error::NonFinite(v));
    }
    Ok(v.round_ties_even() as i64)
}

/// One round's ground truth: a buy cost `b` (in rent-day units) and the true
/// season length `x` in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SkiRentalInstance {
    buy_cost: u32,
    season_length: u32,
}

impl SkiRentalInstance {
    /// Costs below 2 make the rent-or-buy trade-off vacuous and zero-day
    /// seasons leave the normalized loss undefined (OPT = 0); both are
    /// rejected here so the cost calculators below are total.
    pub fn new(buy_cost: u32, season_length: u32) -> Result<Self> {
        if buy_cost < 2 {
            return Err(Error::DegenerateInstance(format!(
                "buy cost {buy_cost} must be at least 2"
            )));
        }
        if season_length == 0 {
            return Err(Error::DegenerateInstance(
                "season length must be at least 1 day".into(),
            ));
        }
        Ok(Self {
            buy_cost,
            season_length,
        })
    }

    pub fn buy_cost(&self) -> u32 {
        self.buy_cost
    }

    pub fn season_length(&self) -> u32 {
        self.season_length
    }

    /// Cost of the best strategy in hindsight: `min(b, x)`.
    pub fn opt_cost(&self) -> u32 {
        self.buy_cost.min(self.season_length)
    }

    /// Cost of renting until `buy_day` and buying that morning, if the season
    /// lasts that long: `b + d - 1` for `x >= d`, else `x` rent days.
    pub fn alg_cost(&self, buy_day: u32) -> u32 {
        debug_assert!(buy_day >= 1, "buy days are 1-based");
        if self.season_length >= buy_day {
            self.buy_cost + buy_day - 1
        } else {
            self.season_length
        }
    }
}

/// Which of the two buy-day profiles an instance falls into.
///
/// The split compares the season prediction `y` with the rounded cost input:
/// a season predicted to outlast the cost favors committing to the purchase
/// within the first `⌊λb⌋` days, a short prediction spreads the buy day over
/// `⌈b/λ⌉` days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `y >= nint(b)`: support size `⌊λb⌋`.
    BuyEarly,
    /// `y < nint(b)`: support size `⌈b/λ⌉`.
    BuyLate,
}

fn validate_inputs(cost_input: f64, lambda: f64) -> Result<()> {
    if !cost_input.is_finite() || cost_input <= 0.0 {
        return Err(Error::InvalidHyperparameter(format!(
            "cost input {cost_input} must be positive and finite"
        )));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidHyperparameter(format!(
            "lambda {lambda} outside (0, 1]"
        )));
    }
    if lambda * cost_input < 1.0 {
        return Err(Error::InvalidHyperparameter(format!(
            "lambda * cost = {} < 1 leaves an empty buy-day support",
            lambda * cost_input
        )));
    }
    Ok(())
}

/// A probability vector over buy days `1..=support_size`.
///
/// Probabilities are renormalized after construction to absorb floating-point
/// drift; a pre-normalization sum off by more than 1e-9 signals a formula bug
/// and is rejected instead.
#[derive(Debug, Clone, PartialEq)]
pub struct BuyDayDistribution {
    branch: Branch,
    probabilities: Vec<f64>,
}

impl BuyDayDistribution {
    /// Builds the buy-day distribution for a cost input (an estimate is fine,
    /// hence a real number), a season prediction, and the trade-off parameter
    /// `lambda` in `(0, 1]` with `lambda * cost >= 1`.
    ///
    /// The branch test rounds the cost input; the support sizes use the raw
    /// real value.
    pub fn new(cost_input: f64, predicted_days: u32, lambda: f64) -> Result<Self> {
        validate_inputs(cost_input, lambda)?;
        let branch = if (predicted_days as i64) >= nint(cost_input)? {
            Branch::BuyEarly
        } else {
            Branch::BuyLate
        };
        Self::for_branch(cost_input, branch, lambda)
    }

    /// Same construction with the branch forced, for callers that have
    /// already classified the prediction.
    pub fn for_branch(cost_input: f64, branch: Branch, lambda: f64) -> Result<Self> {
        validate_inputs(cost_input, lambda)?;
        let probabilities = match branch {
            Branch::BuyEarly => {
                let k = (lambda * cost_input).floor();
                let base = 1.0 - lambda / k;
                let scale = lambda / (k * (1.0 - base.powi(k as i32)));
                geometric_profile(base, k as usize, scale)
            }
            Branch::BuyLate => {
                let l = (cost_input / lambda).ceil();
                let base = 1.0 - 1.0 / (lambda * l);
                let scale = 1.0 / (l * lambda * (1.0 - base.powi(l as i32)));
                geometric_profile(base, l as usize, scale)
            }
        };
        Self::from_probabilities(branch, probabilities)
    }

    /// Wraps an explicit probability vector (mostly useful in tests and for
    /// alternative buy-day rules). The vector must be non-negative and sum to
    /// 1 within 1e-9; it is renormalized exactly like the built-in profiles.
    pub fn from_probabilities(branch: Branch, mut probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidHyperparameter("empty buy-day support".into()));
        }
        let mut sum = 0.0;
        for &p in &probabilities {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::BadNormalization(p));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadNormalization(sum));
        }
        for p in &mut probabilities {
            *p /= sum;
        }
        Ok(Self {
            branch,
            probabilities,
        })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn support_size(&self) -> usize {
        self.probabilities.len()
    }

    /// Probability of buying on day `i + 1`.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Inverse-CDF lookup: the buy day for a uniform variate in `[0, 1)`.
    pub fn day_at(&self, u: f64) -> u32 {
        let mut acc = 0.0;
        for (i, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return (i + 1) as u32;
            }
        }
        self.probabilities.len() as u32
    }

    /// Samples a buy day in `1..=support_size`, consuming exactly one uniform
    /// draw from the stream.
    pub fn sample_day<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.day_at(rng.gen::<f64>())
    }
}

/// `p_i = base^(support - i) * scale` for `i = 1..=support`, built with a
/// running power so construction is O(support).
fn geometric_profile(base: f64, support: usize, scale: f64) -> Vec<f64> {
    let mut probs = vec![0.0; support];
    let mut p = scale;
    for slot in probs.iter_mut().rev() {
        *slot = p;
        p *= base;
    }
    probs
}

/// Largest `epsilon` such that every cost estimate within `(b - eps, b + eps)`
/// yields exactly the distributions produced by the true cost `b`:
///
/// `eps = min( min({λb}, 1-{λb})/λ , λ * min({b/λ}, 1-{b/λ}) )`
///
/// with `{v}` the fractional part. Zero exactly when `λb` or `b/λ` is an
/// integer.
pub fn robustness_radius(buy_cost: u32, lambda: f64) -> Result<f64> {
    validate_inputs(buy_cost as f64, lambda)?;
    let early = (lambda * buy_cost as f64).fract();
    let late = (buy_cost as f64 / lambda).fract();
    Ok(f64::min(
        early.min(1.0 - early) / lambda,
        lambda * late.min(1.0 - late),
    ))
}

/// Exact expected strategy cost under a buy-day distribution:
/// `sum_i p_i * alg_cost(i)`.
pub fn expected_alg_cost(instance: &SkiRentalInstance, dist: &BuyDayDistribution) -> f64 {
    dist.probabilities
        .iter()
        .enumerate()
        .map(|(i, p)| p * instance.alg_cost(i as u32 + 1) as f64)
        .sum()
}

/// Normalized regret of a realized strategy cost against hindsight:
/// `(alg - opt) / opt`, which is never negative.
pub fn normalized_loss(instance: &SkiRentalInstance, alg_cost: f64) -> f64 {
    let opt = instance.opt_cost() as f64;
    (alg_cost - opt) / opt
}

/// One sampled play of the strategy: draw a buy day for the estimate
/// `cost_estimate` and prediction `predicted_days`, pay the true costs, and
/// return the normalized loss.
pub fn expert_loss<R: Rng + ?Sized>(
    instance: &SkiRentalInstance,
    cost_estimate: f64,
    predicted_days: u32,
    lambda: f64,
    rng: &mut R,
) -> Result<f64> {
    let dist = BuyDayDistribution::new(cost_estimate, predicted_days, lambda)?;
    let day = dist.sample_day(rng);
    Ok(normalized_loss(instance, instance.alg_cost(day) as f64))
}

/// Deterministic counterpart of [`expert_loss`]: the exact expectation of the
/// normalized loss over the buy-day distribution.
pub fn expected_expert_loss(
    instance: &SkiRentalInstance,
    cost_estimate: f64,
    predicted_days: u32,
    lambda: f64,
) -> Result<f64> {
    let dist = BuyDayDistribution::new(cost_estimate, predicted_days, lambda)?;
    Ok(normalized_loss(
        instance,
        expected_alg_cost(instance, &dist),
    ))
}

/// The two-arm competitive-ratio guarantee for the strategy when the cost
/// input is exact: the minimum of the prediction-independent arm
/// `(1 + 1/⌊λb⌋) / (1 - e^{-λ})` and the error-sensitive arm
/// `(λ / (1 - e^{-λ})) * (1 + η/opt)` for a prediction error `η = |y - x|`.
///
/// `prediction_error` may be `f64::INFINITY` to read off the worst case.
pub fn competitive_ratio_bound(
    buy_cost: u32,
    lambda: f64,
    prediction_error: f64,
    opt: u32,
) -> Result<f64> {
    validate_inputs(buy_cost as f64, lambda)?;
    if prediction_error.is_nan() || prediction_error < 0.0 {
        return Err(Error::InvalidHyperparameter(format!(
            "prediction error {prediction_error} must be non-negative"
        )));
    }
    if opt == 0 {
        return Err(Error::InvalidHyperparameter("opt must be positive".into()));
    }
    let denom = 1.0 - (-lambda).exp();
    let support = (lambda * buy_cost as f64).floor();
    let robust = (1.0 + 1.0 / support) / denom;
    let consistent = lambda / denom * (1.0 + prediction_error / opt as f64);
    Ok(robust.min(consistent))
}
