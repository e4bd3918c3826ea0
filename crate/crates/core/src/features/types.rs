use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    All,
    Male,
    Female,
}

impl Gender {
    pub const VALUES: [Gender; 3] = [Gender::All, Gender::Male, Gender::Female];

    pub fn one_hot(self) -> [f64; 3] {
        match self {
            Gender::All => [1.0, 0.0, 0.0],
            Gender::Male => [0.0, 1.0, 0.0],
            Gender::Female => [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DailyPerformance {
    pub day: u32,
    pub impressions: u64,
    pub clicks: u64,
    pub conversions: u64,
    pub spend: f64,
}

/// One advertising creative with its serving history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdCreative {
    pub creative_id: String,
    pub campaign_id: String,
    pub gender: Gender,
    pub genre: String,
    pub target_cpa: f64,
    pub text_embedding: Vec<f64>,
    pub image_embedding: Vec<f64>,
    #[serde(default)]
    pub daily: Vec<DailyPerformance>,
    pub lifetime_days: f64,
    pub censored: bool,
    pub total_sales: f64,
}

impl AdCreative {
    pub fn validate(&self) -> Result<()> {
        let id = &self.creative_id;
        if self.daily.is_empty() {
            return domain(format!("{id}: daily history is empty"));
        }
        for (i, d) in self.daily.iter().enumerate() {
            if d.day as usize != i + 1 {
                return domain(format!("{id}: daily rows must be contiguous from day 1"));
            }
            if d.conversions > d.clicks || d.clicks > d.impressions {
                return domain(format!("{id}: day {} violates conversions <= clicks <= impressions", d.day));
            }
            if !(d.spend >= 0.0) {
                return domain(format!("{id}: day {} has negative spend", d.day));
            }
        }
        if !(self.lifetime_days >= self.daily.len() as f64) {
            return domain(format!("{id}: lifetime shorter than served history"));
        }
        if !(self.total_sales >= 0.0) {
            return domain(format!("{id}: negative sales"));
        }
        if !(self.target_cpa > 0.0) {
            return domain(format!("{id}: target CPA must be positive"));
        }
        if self.text_embedding.iter().chain(&self.image_embedding).any(|v| !v.is_finite()) {
            return domain(format!("{id}: non-finite embedding"));
        }
        Ok(())
    }

    pub fn served_days(&self) -> usize {
        self.daily.len()
    }

    pub fn total_impressions(&self) -> u64 {
        self.daily.iter().map(|d| d.impressions).sum()
    }

    pub fn total_clicks(&self) -> u64 {
        self.daily.iter().map(|d| d.clicks).sum()
    }

    /// Lifetime clicks per impression, 0 without impressions.
    pub fn overall_ctr(&self) -> f64 {
        let imp = self.total_impressions();
        if imp == 0 {
            0.0
        } else {
            self.total_clicks() as f64 / imp as f64
        }
    }
}

/// Genre vocabulary with the unknown bucket at index 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenreVocab {
    pub names: Vec<String>,
}

impl GenreVocab {
    pub fn new(names: Vec<String>) -> Self {
        Self { names }
    }

    pub fn from_creatives<'a>(creatives: impl IntoIterator<Item = &'a AdCreative>) -> Self {
        let set: std::collections::BTreeSet<&str> = creatives.into_iter().map(|c| c.genre.as_str()).collect();
        Self { names: set.into_iter().map(str::to_string).collect() }
    }

    /// Table rows, including the unknown row.
    pub fn cardinality(&self) -> usize {
        self.names.len() + 1
    }

    pub fn index(&self, genre: &str) -> usize {
        self.names.iter().position(|g| g == genre).map_or(0, |i| i + 1)
    }
}
