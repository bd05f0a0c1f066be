use rand::Rng;

use super::segment_tree::MaxTree;
use super::{ReplayError, Transition};

/// Dense set of slot indices with O(1) insert and remove.
#[derive(Clone, Debug, Default)]
pub struct SlotSet {
    members: Vec<usize>,
    position: Vec<usize>,
}

const ABSENT: usize = usize::MAX;

impl SlotSet {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            members: Vec::with_capacity(capacity),
            position: vec![ABSENT; capacity],
        }
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.position[slot] != ABSENT
    }

    pub fn insert(&mut self, slot: usize) {
        if !self.contains(slot) {
            self.position[slot] = self.members.len();
            self.members.push(slot);
        }
    }

    pub fn remove(&mut self, slot: usize) {
        let pos = self.position[slot];
        if pos == ABSENT {
            return;
        }
        self.members.swap_remove(pos);
        if let Some(&moved) = self.members.get(pos) {
            self.position[moved] = pos;
        }
        self.position[slot] = ABSENT;
    }

    pub fn clear(&mut self) {
        for &s in &self.members {
            self.position[s] = ABSENT;
        }
        self.members.clear();
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.members
    }
}

/// Where a stored transition landed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoreOutcome {
    pub slot: usize,
    /// Insertion sequence number of the transition that was overwritten, if any.
    pub evicted: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BufferCounters {
    /// Priority updates skipped because the slot had been overwritten.
    pub stale_updates: u64,
    /// Subset draws that fell back to the whole buffer because the subset was empty.
    pub subset_fallbacks: u64,
}

/// Fixed-capacity ring of transitions with the active-subset mask used by the
/// learned replay policy.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    per_epsilon: f64,
    slots: Vec<Transition>,
    seqs: Vec<u64>,
    cursor: usize,
    next_seq: u64,
    in_subset: Vec<bool>,
    subset: SlotSet,
    max_priority: MaxTree,
    max_abs_td: MaxTree,
    counters: BufferCounters,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Result<Self, ReplayError> {
        Self::with_epsilon(capacity, obs_dim, action_dim, 1e-2)
    }

    /// `per_epsilon` is added to `|δ|` when deriving prioritized-replay priorities.
    pub fn with_epsilon(
        capacity: usize,
        obs_dim: usize,
        action_dim: usize,
        per_epsilon: f64,
    ) -> Result<Self, ReplayError> {
        if capacity == 0 || obs_dim == 0 || action_dim == 0 {
            return Err(ReplayError::Config(format!(
                "capacity, obs_dim and action_dim must be positive (got {capacity}, {obs_dim}, {action_dim})"
            )));
        }
        if !(per_epsilon.is_finite() && per_epsilon > 0.0) {
            return Err(ReplayError::Config(format!("priority epsilon must be positive, got {per_epsilon}")));
        }
        Ok(Self {
            capacity,
            obs_dim,
            action_dim,
            per_epsilon,
            slots: Vec::with_capacity(capacity.min(1 << 20)),
            seqs: Vec::with_capacity(capacity.min(1 << 20)),
            cursor: 0,
            next_seq: 0,
            in_subset: Vec::with_capacity(capacity.min(1 << 20)),
            subset: SlotSet::with_capacity(capacity),
            max_priority: MaxTree::new(capacity),
            max_abs_td: MaxTree::new(capacity),
            counters: BufferCounters::default(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn per_epsilon(&self) -> f64 {
        self.per_epsilon
    }

    pub fn counters(&self) -> BufferCounters {
        self.counters
    }

    pub fn get(&self, slot: usize) -> &Transition {
        &self.slots[slot]
    }

    /// Insertion sequence number of the transition currently in `slot`.
    pub fn seq(&self, slot: usize) -> u64 {
        self.seqs[slot]
    }

    /// Total number of transitions ever stored.
    pub fn total_stored(&self) -> u64 {
        self.next_seq
    }

    /// Largest live `per_priority`, or 1 when empty.
    pub fn max_priority(&self) -> f64 {
        let m = self.max_priority.root();
        if m.is_finite() {
            m
        } else {
            1.0
        }
    }

    /// Largest live `|td_error|`, or 1 when empty.
    pub fn max_abs_td_error(&self) -> f64 {
        let m = self.max_abs_td.root();
        if m.is_finite() {
            m
        } else {
            1.0
        }
    }

    /// Live slots from oldest to newest.
    pub fn ring_order(&self) -> impl Iterator<Item = usize> + '_ {
        let split = if self.slots.len() < self.capacity { 0 } else { self.cursor };
        (split..self.slots.len()).chain(0..split)
    }

    /// Stores a transition, evicting the oldest one when full.
    ///
    /// The cached TD error starts at the largest live `|δ|` and the priority at
    /// the largest live priority (1 for an empty buffer). The transition joins
    /// the active subset.
    pub fn store(&mut self, mut transition: Transition) -> Result<StoreOutcome, ReplayError> {
        self.check_dims(&transition)?;
        let slot = self.cursor;
        let evicted = if slot < self.slots.len() {
            self.release(slot);
            Some(self.seqs[slot])
        } else {
            None
        };

        transition.td_error = self.max_abs_td_error();
        transition.per_priority = self.max_priority();
        self.max_priority.set(slot, transition.per_priority);
        self.max_abs_td.set(slot, transition.td_error.abs());

        let seq = self.next_seq;
        self.next_seq += 1;
        if evicted.is_some() {
            self.slots[slot] = transition;
            self.seqs[slot] = seq;
            self.in_subset[slot] = true;
        } else {
            self.slots.push(transition);
            self.seqs.push(seq);
            self.in_subset.push(true);
        }
        self.subset.insert(slot);
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(StoreOutcome { slot, evicted })
    }

    fn release(&mut self, slot: usize) {
        self.in_subset[slot] = false;
        self.subset.remove(slot);
        self.max_priority.clear(slot);
        self.max_abs_td.clear(slot);
    }

    fn check_dims(&self, t: &Transition) -> Result<(), ReplayError> {
        let checks = [
            ("state", self.obs_dim, t.state.len()),
            ("next_state", self.obs_dim, t.next_state.len()),
            ("action", self.action_dim, t.action.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(ReplayError::Dim { what, expected, got });
            }
        }
        Ok(())
    }

    /// I.i.d. uniform slots, with replacement.
    pub fn sample_uniform<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, ReplayError> {
        if self.is_empty() {
            return Err(ReplayError::Empty);
        }
        let n = self.len();
        Ok((0..batch_size).map(|_| rng.random_range(0..n)).collect())
    }

    /// Uniform draw with replacement from the active subset, falling back to the
    /// whole buffer (and counting the fallback) when the subset is empty.
    pub fn sample_from_subset<R: Rng + ?Sized>(
        &mut self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, ReplayError> {
        if self.subset.is_empty() {
            let slots = self.sample_uniform(batch_size, rng)?;
            self.counters.subset_fallbacks += 1;
            return Ok(slots);
        }
        let members = self.subset.as_slice();
        Ok((0..batch_size)
            .map(|_| members[rng.random_range(0..members.len())])
            .collect())
    }

    pub fn in_subset(&self, slot: usize) -> bool {
        self.in_subset[slot]
    }

    pub fn subset_slots(&self) -> &[usize] {
        self.subset.as_slice()
    }

    pub fn subset_len(&self) -> usize {
        self.subset.len()
    }

    pub fn set_in_subset(&mut self, slot: usize, member: bool) {
        assert!(slot < self.len(), "slot {slot} is not live");
        self.in_subset[slot] = member;
        if member {
            self.subset.insert(slot);
        } else {
            self.subset.remove(slot);
        }
    }

    /// Replaces the subset with the slots whose mask bit is set, in slot order.
    pub fn set_subset_mask(&mut self, mask: &[bool]) {
        assert_eq!(mask.len(), self.len(), "mask must cover every live slot");
        self.subset.clear();
        for (slot, &bit) in mask.iter().enumerate() {
            self.in_subset[slot] = bit;
            if bit {
                self.subset.insert(slot);
            }
        }
    }

    /// Writes fresh TD errors for replayed slots, skipping slots whose transition
    /// was overwritten since it was sampled. Returns the slots actually updated.
    pub fn update_priorities(
        &mut self,
        slots: &[usize],
        seqs: &[u64],
        td_errors: &[f64],
    ) -> Result<Vec<usize>, ReplayError> {
        if slots.len() != td_errors.len() || slots.len() != seqs.len() {
            return Err(ReplayError::Dim {
                what: "priority update",
                expected: slots.len(),
                got: td_errors.len().min(seqs.len()),
            });
        }
        let mut updated = Vec::with_capacity(slots.len());
        for ((&slot, &seq), &delta) in slots.iter().zip(seqs).zip(td_errors) {
            if slot >= self.len() || self.seqs[slot] != seq {
                self.counters.stale_updates += 1;
                continue;
            }
            let priority = delta.abs() + self.per_epsilon;
            let t = &mut self.slots[slot];
            t.td_error = delta;
            t.per_priority = priority;
            self.max_priority.set(slot, priority);
            self.max_abs_td.set(slot, delta.abs());
            updated.push(slot);
        }
        Ok(updated)
    }

    /// Overrides a slot's raw priority.
    pub fn set_per_priority(&mut self, slot: usize, priority: f64) {
        assert!(priority >= 0.0, "priorities are non-negative");
        self.slots[slot].per_priority = priority;
        self.max_priority.set(slot, priority);
    }

    pub fn set_td_error(&mut self, slot: usize, delta: f64) {
        self.slots[slot].td_error = delta;
        self.max_abs_td.set(slot, delta.abs());
    }

    pub fn set_priority_score(&mut self, slot: usize, score: f64) {
        self.slots[slot].priority_score = score;
    }
}
