/// One stored experience plus the bookkeeping the samplers read.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Terminal state (not a time-limit truncation).
    pub done: bool,
    /// Global environment step at which the transition was stored.
    pub insert_timestep: u64,
    /// Most recent TD error, refreshed only when the transition is replayed.
    pub td_error: f64,
    /// Replay-policy score, the Bernoulli inclusion probability.
    pub priority_score: f64,
    /// Raw prioritized-replay priority `|δ| + ε`.
    pub per_priority: f64,
}

impl Transition {
    /// Bookkeeping fields are placeholders until [`ReplayBuffer::store`](super::ReplayBuffer::store)
    /// initializes them.
    pub fn new(
        state: Vec<f64>,
        action: Vec<f64>,
        reward: f64,
        next_state: Vec<f64>,
        done: bool,
        insert_timestep: u64,
    ) -> Self {
        Self {
            state,
            action,
            reward,
            next_state,
            done,
            insert_timestep,
            td_error: 0.0,
            priority_score: 0.5,
            per_priority: 1.0,
        }
    }
}
