use crate::replay::Transition;

pub const FEATURE_DIM: usize = 3;

/// The three per-transition inputs of the replay score network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionFeatures {
    pub reward: f64,
    pub td_error: f64,
    /// `insert_timestep / current_step`, in `[0, 1]`.
    pub timestep_ratio: f64,
}

impl TransitionFeatures {
    pub fn of(transition: &Transition, current_step: u64) -> Self {
        let timestep_ratio = if current_step == 0 {
            1.0
        } else {
            (transition.insert_timestep as f64 / current_step as f64).clamp(0.0, 1.0)
        };
        Self {
            reward: transition.reward,
            td_error: transition.td_error,
            timestep_ratio,
        }
    }
}

const STD_FLOOR: f64 = 1e-6;

/// Welford running mean and population variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn from_moments(count: u64, mean: f64, variance: f64) -> Self {
        Self {
            count,
            mean,
            m2: variance * count as f64,
        }
    }

    pub fn observe(&mut self, x: f64) {
        if !x.is_finite() {
            return;
        }
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance; 1 before any observation so the transform starts as the identity.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            1.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean) / self.variance().sqrt().max(STD_FLOOR)
    }
}

/// Standardizes reward and TD error with running statistics.
///
/// Statistics only change when transitions are written (stored, or replayed
/// with a fresh TD error), never when features are read for scoring. The
/// timestep ratio is already bounded in `[0, 1]` and passes through unchanged.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureNormalizer {
    pub reward: RunningStats,
    pub td_error: RunningStats,
}

impl FeatureNormalizer {
    pub fn observe_store(&mut self, transition: &Transition) {
        self.reward.observe(transition.reward);
        self.td_error.observe(transition.td_error);
    }

    pub fn observe_td_error(&mut self, td_error: f64) {
        self.td_error.observe(td_error);
    }

    pub fn normalize(&self, f: &TransitionFeatures) -> [f64; FEATURE_DIM] {
        [
            self.reward.standardize(f.reward),
            self.td_error.standardize(f.td_error),
            f.timestep_ratio,
        ]
    }
}
