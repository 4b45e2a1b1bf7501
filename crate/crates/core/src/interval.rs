use serde::{Deserialize, Serialize};

/// Components closer than this are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", from = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }

    /// The reflection `{|x| : x in self}`.
    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            Interval::new(-self.hi, -self.lo)
        } else {
            Interval::new(0.0, self.hi.max(-self.lo))
        }
    }
}

/// Finite union of closed intervals, kept sorted, disjoint and merged.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalSet {
    components: Vec<Interval>,
}

impl IntervalSet {
    pub fn new(mut parts: Vec<Interval>) -> Self {
        parts.retain(|iv| iv.hi > iv.lo);
        parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut components: Vec<Interval> = Vec::with_capacity(parts.len());
        for iv in parts {
            match components.last_mut() {
                Some(last) if iv.lo <= last.hi + MERGE_TOLERANCE => last.hi = last.hi.max(iv.hi),
                _ => components.push(iv),
            }
        }
        Self { components }
    }

    pub fn single(lo: f64, hi: f64) -> Self {
        Self::new(vec![Interval::new(lo, hi)])
    }

    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.components.iter().map(Interval::length).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.components.iter().any(|iv| iv.contains(x))
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut parts = self.components.clone();
        parts.extend_from_slice(&other.components);
        Self::new(parts)
    }

    /// Fold onto the nonnegative half-line. The Rosen map is even, so a set
    /// and its fold have the same forward image.
    pub fn fold(&self) -> IntervalSet {
        Self::new(self.components.iter().map(Interval::abs).collect())
    }

    pub fn intersection_measure(&self, other: &IntervalSet) -> f64 {
        let mut total = 0.0;
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.components, &other.components);
        while i < a.len() && j < b.len() {
            if let Some(iv) = a[i].intersect(&b[j]) {
                total += iv.length();
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }
}

impl From<Interval> for IntervalSet {
    fn from(iv: Interval) -> Self {
        Self::new(vec![iv])
    }
}
