//! Synthetic predictor panels.
//!
//! Cost predictors are unbiased with per-expert variance and hard-bounded
//! support (rejection-sampled truncated normals); season predictors add plain
//! normal noise and round to a non-negative day count. Panels are immutable
//! after construction, so trials can fan out across threads freely.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ski::{nint, SkiRentalInstance};
use crate::{Error, Result};

const REJECTION_CAP: u32 = 10_000;

/// `count` evenly spaced values over `[lo, hi]`; a single count collapses to
/// `[lo]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidConfig(
            "linspace needs at least one value".into(),
        ));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidConfig(format!("invalid range [{lo}, {hi}]")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

/// Unbiased cost predictors: expert `i` reports the true cost plus zero-mean
/// noise of variance `variances[i]`, truncated to `[-noise_bound, noise_bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuyExpertPanel {
    variances: Vec<f64>,
    noise_bound: f64,
    cost_range: (u32, u32),
}

impl BuyExpertPanel {
    pub fn new(variances: Vec<f64>, noise_bound: f64, cost_range: (u32, u32)) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidConfig(
                "panel needs at least one expert".into(),
            ));
        }
        if variances.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::InvalidConfig("variances must be positive".into()));
        }
        if !(noise_bound.is_finite() && noise_bound > 0.0) {
            return Err(Error::InvalidConfig("noise bound must be positive".into()));
        }
        if cost_range.0 < 2 || cost_range.0 > cost_range.1 {
            return Err(Error::InvalidConfig(format!(
                "cost range [{}, {}] must be non-empty with lower bound >= 2",
                cost_range.0, cost_range.1
            )));
        }
        Ok(Self {
            variances,
            noise_bound,
            cost_range,
        })
    }

    pub fn num_experts(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn cost_range(&self) -> (u32, u32) {
        self.cost_range
    }

    /// Index of the lowest-variance expert (lowest index on ties).
    pub fn best_index(&self) -> usize {
        self.variances
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }

    pub fn min_variance(&self) -> f64 {
        self.variances[self.best_index()]
    }

    /// Smallest variance gap between the best expert and any other; zero when
    /// another expert ties the minimum. Meaningless for a single expert
    /// (returns infinity).
    pub fn suboptimality_gap(&self) -> f64 {
        let best = self.best_index();
        let min = self.variances[best];
        self.variances
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best)
            .map(|(_, &v)| v - min)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest squared error a prediction can produce given the hard noise
    /// support.
    pub fn max_squared_error(&self) -> f64 {
        self.noise_bound * self.noise_bound
    }

    /// One round of predictions, independent across experts.
    pub fn predict<R: Rng + ?Sized>(&self, true_cost: u32, rng: &mut R) -> Result<Vec<f64>> {
        debug_assert!(
            (self.cost_range.0..=self.cost_range.1).contains(&true_cost),
            "true cost outside the configured range"
        );
        self.variances
            .iter()
            .map(|&variance| {
                let noise = truncated_normal(variance.sqrt(), self.noise_bound, rng)?;
                Ok(true_cost as f64 + noise)
            })
            .collect()
    }
}

/// Rejection sampling from N(0, sigma^2) restricted to [-bound, bound].
/// Acceptance is at least 68% whenever bound >= sigma; the cap only trips on
/// badly misconfigured panels (variance far above the bound squared).
fn truncated_normal<R: Rng + ?Sized>(sigma: f64, bound: f64, rng: &mut R) -> Result<f64> {
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    for _ in 0..REJECTION_CAP {
        let draw = normal.sample(rng);
        if draw.abs() <= bound {
            return Ok(draw);
        }
    }
    Err(Error::RejectionCapExhausted(REJECTION_CAP))
}

/// Variance of the truncated normal actually sampled above, by Simpson
/// quadrature on `[0, bound]` (the integrand is even). This is the honest
/// per-expert variance to feed the convergence-time calculator with.
pub fn truncated_normal_variance(variance: f64, bound: f64) -> f64 {
    let sigma = variance.sqrt();
    let pdf = |x: f64| (-0.5 * (x / sigma) * (x / sigma)).exp();
    let steps = 4096usize;
    let h = bound / steps as f64;
    let mut mass = 0.0;
    let mut second_moment = 0.0;
    for i in 0..steps {
        let a = i as f64 * h;
        let m = a + h / 2.0;
        let b = a + h;
        mass += h / 6.0 * (pdf(a) + 4.0 * pdf(m) + pdf(b));
        second_moment += h / 6.0 * (a * a * pdf(a) + 4.0 * m * m * pdf(m) + b * b * pdf(b));
    }
    second_moment / mass
}

/// Season-length predictors: plain normal noise, rounded to the nearest
/// integer and clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SkiExpertPanel {
    variances: Vec<f64>,
}

impl SkiExpertPanel {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidConfig(
                "panel needs at least one expert".into(),
            ));
        }
        if variances.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::InvalidConfig("variances must be positive".into()));
        }
        Ok(Self { variances })
    }

    pub fn num_experts(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn predict<R: Rng + ?Sized>(&self, true_days: u32, rng: &mut R) -> Vec<u32> {
        debug_assert!(true_days >= 1);
        self.variances
            .iter()
            .map(|&variance| {
                let noise = Normal::new(0.0, variance.sqrt())
                    .expect("validated sigma")
                    .sample(rng);
                nint(true_days as f64 + noise).expect("finite").max(0) as u32
            })
            .collect()
    }
}

/// Uniform integer instance draw over the given closed ranges.
pub fn draw_instance<R: Rng + ?Sized>(
    cost_range: (u32, u32),
    season_range: (u32, u32),
    rng: &mut R,
) -> Result<SkiRentalInstance> {
    if cost_range.0 > cost_range.1 || season_range.0 > season_range.1 {
        return Err(Error::InvalidConfig("empty instance range".into()));
    }
    if cost_range.0 < 2 {
        return Err(Error::InvalidConfig("cost range must start at 2".into()));
    }
    if season_range.0 < 1 {
        return Err(Error::InvalidConfig("season range must start at 1".into()));
    }
    let buy_cost = rng.gen_range(cost_range.0..=cost_range.1);
    let season = rng.gen_range(season_range.0..=season_range.1);
    SkiRentalInstance::new(buy_cost, season)
}
