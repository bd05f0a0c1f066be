/// Associative combine with an identity element.
pub trait Combine {
    const IDENTITY: f64;
    fn combine(a: f64, b: f64) -> f64;
}

#[derive(Clone, Copy, Debug)]
pub struct Sum;

impl Combine for Sum {
    const IDENTITY: f64 = 0.0;

    #[inline]
    fn combine(a: f64, b: f64) -> f64 {
        a + b
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Max;

impl Combine for Max {
    const IDENTITY: f64 = f64::NEG_INFINITY;

    #[inline]
    fn combine(a: f64, b: f64) -> f64 {
        a.max(b)
    }
}

/// Complete binary tree over `capacity` leaves stored 1-indexed in a flat array.
///
/// Every internal node is recomputed as `combine(left, right)` on update,
/// so it equals the combination of its children exactly.
#[derive(Clone, Debug)]
pub struct SegmentTree<C: Combine> {
    capacity: usize,
    /// Number of leaves, rounded up to a power of two.
    width: usize,
    nodes: Vec<f64>,
    _combine: std::marker::PhantomData<C>,
}

impl<C: Combine> SegmentTree<C> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "segment tree needs at least one leaf");
        let width = capacity.next_power_of_two();
        Self {
            capacity,
            width,
            nodes: vec![C::IDENTITY; 2 * width],
            _combine: std::marker::PhantomData,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, leaf: usize) -> f64 {
        assert!(leaf < self.capacity, "leaf {leaf} out of range");
        self.nodes[self.width + leaf]
    }

    pub fn set(&mut self, leaf: usize, value: f64) {
        assert!(leaf < self.capacity, "leaf {leaf} out of range");
        let mut idx = self.width + leaf;
        self.nodes[idx] = value;
        while idx > 1 {
            idx /= 2;
            self.nodes[idx] = C::combine(self.nodes[2 * idx], self.nodes[2 * idx + 1]);
        }
    }

    /// Resets a leaf to the identity element.
    pub fn clear(&mut self, leaf: usize) {
        self.set(leaf, C::IDENTITY);
    }

    /// Combination of all leaves.
    pub fn root(&self) -> f64 {
        self.nodes[1]
    }

    /// Every internal node, paired with its index, for audits.
    pub fn internal_nodes(&self) -> impl Iterator<Item = (usize, f64, f64, f64)> + '_ {
        (1..self.width).map(move |i| (i, self.nodes[i], self.nodes[2 * i], self.nodes[2 * i + 1]))
    }
}

/// Sum tree over non-negative leaf masses, supporting inverse-CDF lookup.
pub type SumTree = SegmentTree<Sum>;
pub type MaxTree = SegmentTree<Max>;

impl SegmentTree<Sum> {
    pub fn total(&self) -> f64 {
        self.root()
    }

    /// Finds the leaf `i` with `prefix(i) <= mass < prefix(i + 1)`.
    ///
    /// Subtrees with zero mass are never entered, so the returned leaf always
    /// carries positive mass when the total is positive.
    pub fn find_prefix(&self, mut mass: f64) -> usize {
        let mut idx = 1;
        while idx < self.width {
            let left = 2 * idx;
            let right = left + 1;
            if self.nodes[right] <= 0.0 || (mass < self.nodes[left] && self.nodes[left] > 0.0) {
                idx = left;
            } else {
                mass -= self.nodes[left];
                idx = right;
            }
        }
        (idx - self.width).min(self.capacity - 1)
    }

    /// Sum of leaves `0..end`.
    pub fn prefix_sum(&self, end: usize) -> f64 {
        assert!(end <= self.capacity);
        if end == self.capacity {
            return self.total();
        }
        // Walk from the root towards leaf `end`, adding every left sibling passed.
        let mut sum = 0.0;
        let mut idx = 1;
        let mut lo = 0;
        let mut span = self.width;
        while idx < self.width {
            span /= 2;
            if end >= lo + span {
                sum += self.nodes[2 * idx];
                lo += span;
                idx = 2 * idx + 1;
            } else {
                idx *= 2;
            }
        }
        sum
    }
}
