use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Result};

/// Upper bounds of the short-term grid: (1,3], (3,5], (5,7], (7,10].
pub const SHORT_BOUNDS: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 10.0];
/// Upper bounds of the long-term grid: (1,10], (10,30], (30,60], (60,90], (90,120].
pub const LONG_BOUNDS: [f64; 6] = [1.0, 10.0, 30.0, 60.0, 90.0, 120.0];
/// The short grid followed by long intervals 2..=5.
pub const MERGED_BOUNDS: [f64; 9] = [1.0, 3.0, 5.0, 7.0, 10.0, 30.0, 60.0, 90.0, 120.0];

/// Named grid presets accepted in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridPreset {
    Short,
    Long,
    OverallMerged,
}

impl GridPreset {
    pub fn grid(self) -> TimeGrid {
        match self {
            GridPreset::Short => TimeGrid::short(),
            GridPreset::Long => TimeGrid::long(),
            GridPreset::OverallMerged => TimeGrid::overall_merged(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridPreset::Short => "short",
            GridPreset::Long => "long",
            GridPreset::OverallMerged => "overall-merged",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "short" => Some(GridPreset::Short),
            "long" => Some(GridPreset::Long),
            "overall-merged" | "overall" => Some(GridPreset::OverallMerged),
            _ => None,
        }
    }
}

/// Where a day falls on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPosition {
    /// Zero-based index of the containing interval.
    Interval(usize),
    BeyondGrid,
}

/// Ordered right-closed intervals `(t_{l-1}, t_l]` over serving days.
///
/// Serialized as the plain JSON array of bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    bounds: Vec<f64>,
}

impl TimeGrid {
    pub fn new(bounds: Vec<f64>) -> Result<Self> {
        if bounds.len() < 2 {
            return domain("a time grid needs at least two bounds");
        }
        if bounds.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return domain("grid bounds must be finite and non-negative");
        }
        if bounds.windows(2).any(|w| w[0] >= w[1]) {
            return domain(format!("grid bounds must be strictly increasing: {bounds:?}"));
        }
        Ok(Self { bounds })
    }

    pub fn short() -> Self {
        Self { bounds: SHORT_BOUNDS.to_vec() }
    }

    pub fn long() -> Self {
        Self { bounds: LONG_BOUNDS.to_vec() }
    }

    pub fn overall_merged() -> Self {
        Self { bounds: MERGED_BOUNDS.to_vec() }
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// Number of intervals `L`.
    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.bounds[0]
    }

    pub fn end(&self) -> f64 {
        self.bounds[self.bounds.len() - 1]
    }

    /// `(lower, upper)` of the zero-based interval `l`.
    pub fn interval(&self, l: usize) -> (f64, f64) {
        (self.bounds[l], self.bounds[l + 1])
    }

    pub fn upper(&self, l: usize) -> f64 {
        self.bounds[l + 1]
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bounds.windows(2).map(|w| w[1] - w[0])
    }

    /// Locates `day` on the grid. Days at or below the first bound fall into
    /// the first interval.
    pub fn interval_index(&self, day: f64) -> Result<GridPosition> {
        if !(day > 0.0) || !day.is_finite() {
            return domain(format!("day must be positive and finite, got {day}"));
        }
        if day > self.end() {
            return Ok(GridPosition::BeyondGrid);
        }
        // First upper bound >= day.
        let l = self.bounds[1..].partition_point(|&ub| ub < day);
        Ok(GridPosition::Interval(l))
    }

    /// Index of the interval whose upper bound equals `day`, if any.
    pub fn interval_ending_at(&self, day: f64) -> Option<usize> {
        self.bounds[1..].iter().position(|&ub| ub == day)
    }

    pub(crate) fn ensure_same(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self != other {
            return contract(format!(
                "{what}: grid mismatch {:?} vs {:?}",
                self.bounds, other.bounds
            ));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = crate::Error;

    fn try_from(bounds: Vec<f64>) -> Result<Self> {
        TimeGrid::new(bounds)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.bounds
    }
}
