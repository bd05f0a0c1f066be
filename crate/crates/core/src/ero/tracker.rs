use std::collections::VecDeque;

/// Windowed estimate of the agent's cumulative reward and the replay-reward
/// derived from consecutive estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayRewardTracker {
    window: usize,
    returns: VecDeque<f64>,
    previous: Option<f64>,
    current: Option<f64>,
}

impl ReplayRewardTracker {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "reward window must be positive");
        Self {
            window,
            returns: VecDeque::with_capacity(window),
            previous: None,
            current: None,
        }
    }

    /// Records a finished episode and returns `r^r = r^c_π − r^c_π′` when a
    /// previous estimate exists. The current estimate then becomes the previous one.
    pub fn push_episode(&mut self, episode_return: f64) -> Option<f64> {
        if self.returns.len() == self.window {
            self.returns.pop_front();
        }
        self.returns.push_back(episode_return);
        let estimate = self.returns.iter().sum::<f64>() / self.returns.len() as f64;
        self.current = Some(estimate);
        let replay_reward = self.previous.map(|prev| estimate - prev);
        self.previous = Some(estimate);
        replay_reward
    }

    pub fn window_mean(&self) -> Option<f64> {
        self.current
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}
