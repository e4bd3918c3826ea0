use serde::{Deserialize, Serialize};

use super::grid::{GridPosition, TimeGrid};
use crate::error::{contract, domain, Result};

/// Per-interval discontinuation probabilities on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardVector {
    grid: TimeGrid,
    h: Vec<f64>,
}

impl HazardVector {
    pub fn new(grid: TimeGrid, h: Vec<f64>) -> Result<Self> {
        if h.len() != grid.len() {
            return contract(format!(
                "hazard length {} does not match grid with {} intervals",
                h.len(),
                grid.len()
            ));
        }
        if let Some(bad) = h.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return domain(format!("hazard probability {bad} outside [0,1]"));
        }
        Ok(Self { grid, h })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Event indicators for one creative on a grid.
///
/// Stored compactly as the observed interval count `l'` and whether the
/// last observed interval holds the event; the indicator list is
/// `[0, .., 0, 1]` for events and all zeros for censored records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLabels {
    grid: TimeGrid,
    observed: usize,
    event: bool,
}

impl EventLabels {
    pub fn new(grid: TimeGrid, observed: usize, event: bool) -> Result<Self> {
        if observed == 0 || observed > grid.len() {
            return domain(format!(
                "observed interval count {observed} outside 1..={}",
                grid.len()
            ));
        }
        Ok(Self { grid, observed, event })
    }

    /// Builds labels from an explicit indicator list.
    pub fn from_delta(grid: TimeGrid, delta: &[u8]) -> Result<Self> {
        let n = delta.len();
        if n == 0 {
            return domain("indicator list must be non-empty");
        }
        if delta.iter().any(|&d| d > 1) {
            return domain("indicators must be 0 or 1");
        }
        if delta[..n - 1].iter().any(|&d| d == 1) {
            return domain("an event indicator may only appear in the last observed interval");
        }
        Self::new(grid, n, delta[n - 1] == 1)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `l'`, the number of observed intervals.
    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn is_event(&self) -> bool {
        self.event
    }

    pub fn is_censored(&self) -> bool {
        !self.event
    }

    /// Zero-based interval of the event, if observed.
    pub fn event_interval(&self) -> Option<usize> {
        self.event.then(|| self.observed - 1)
    }

    pub fn delta(&self) -> Vec<u8> {
        let mut d = vec![0u8; self.observed];
        if self.event {
            d[self.observed - 1] = 1;
        }
        d
    }

    /// Indicator for the zero-based interval `l < l'`.
    pub fn indicator(&self, l: usize) -> u8 {
        u8::from(self.event && l + 1 == self.observed)
    }
}

/// Discrete labels for a lifetime. Lifetimes past the grid end are censored
/// in the last interval.
pub fn labels_from_lifetime(grid: &TimeGrid, lifetime_days: f64, censored: bool) -> Result<EventLabels> {
    match grid.interval_index(lifetime_days)? {
        GridPosition::Interval(l) => EventLabels::new(grid.clone(), l + 1, !censored),
        GridPosition::BeyondGrid => EventLabels::new(grid.clone(), grid.len(), false),
    }
}

/// `s_l = prod_{k<=l} (1 - h_k)`: probability of still serving at the end of interval `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    grid: TimeGrid,
    s: Vec<f64>,
}

impl SurvivalCurve {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.s
    }

    /// Survival at `day`: the curve value at the end of the last interval
    /// fully elapsed by `day`.
    pub fn at(&self, day: f64) -> f64 {
        let mut out = 1.0;
        for (l, s) in self.s.iter().enumerate() {
            if self.grid.upper(l) <= day {
                out = *s;
            }
        }
        out
    }
}

pub fn survival_curve(h: &HazardVector) -> SurvivalCurve {
    let mut acc = 1.0;
    let s = h
        .values()
        .iter()
        .map(|p| {
            acc *= 1.0 - p;
            acc
        })
        .collect();
    SurvivalCurve { grid: h.grid().clone(), s }
}

/// Splices short-term hazards with long-term hazards 2..=5 on the merged grid.
///
/// The long model's first interval (1,10] is covered at finer resolution by
/// the four short intervals, so its hazard is dropped.
pub fn merge_two_term(h_short: &HazardVector, h_long: &HazardVector) -> Result<HazardVector> {
    h_short.grid().ensure_same(&TimeGrid::short(), "merge short input")?;
    h_long.grid().ensure_same(&TimeGrid::long(), "merge long input")?;
    let mut merged = h_short.values().to_vec();
    merged.extend_from_slice(&h_long.values()[1..]);
    HazardVector::new(TimeGrid::overall_merged(), merged)
}

/// First zero-based interval whose hazard exceeds `threshold`.
pub fn decide_discontinuation(h: &HazardVector, threshold: f64) -> Option<usize> {
    h.values().iter().position(|&p| p > threshold)
}

/// Negative expected serving time on the grid, `-sum_l s_l * width_l`.
/// Larger means earlier predicted discontinuation.
pub fn risk_score(h: &HazardVector) -> f64 {
    let curve = survival_curve(h);
    -curve
        .values()
        .iter()
        .zip(h.grid().widths())
        .map(|(s, w)| s * w)
        .sum::<f64>()
}
