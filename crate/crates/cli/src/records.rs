//! Prediction lines written by `predict` and read back by `evaluate`.

use adsurv_core::experiment::{Prediction, RunSpec, TrainedModel};
use adsurv_core::nn::HeadKind;
use adsurv_core::survival::{decide_discontinuation, risk_score, GridPreset, HazardVector};
use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadOutput {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalOut {
    pub index: usize,
    pub start_day: f64,
    pub end_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub creative_id: String,
    pub as_of_day: usize,
    pub run: RunSpec,
    pub heads: Vec<HeadOutput>,
    pub short_hazard: Option<Vec<f64>>,
    pub long_hazard: Option<Vec<f64>>,
    /// Hazards on the merged nine-interval grid.
    pub overall_hazard: Option<Vec<f64>>,
    /// Grid of `risk_score` and `predicted_interval`: the widest one the model provides.
    pub grid: Option<GridPreset>,
    pub risk_score: Option<f64>,
    pub threshold: f64,
    /// First interval whose hazard exceeds `threshold`; absent when none does.
    pub predicted_interval: Option<IntervalOut>,
}

fn values(h: Option<HazardVector>) -> Option<Vec<f64>> {
    h.map(|h| h.values().to_vec())
}

impl PredictionRecord {
    pub fn new(model: &TrainedModel, run: &RunSpec, p: &Prediction, threshold: f64) -> Result<Self> {
        let kind = &run.kind;
        let heads = model
            .checkpoint
            .spec
            .heads
            .iter()
            .zip(&p.heads)
            .map(|(spec, v)| HeadOutput { name: spec.name.clone(), values: v.clone() })
            .collect();
        let short = p.hazard_on(kind, GridPreset::Short)?;
        let long = p.hazard_on(kind, GridPreset::Long)?;
        let overall = p.hazard_on(kind, GridPreset::OverallMerged)?;
        let widest = [(GridPreset::OverallMerged, &overall), (GridPreset::Long, &long), (GridPreset::Short, &short)]
            .into_iter()
            .find_map(|(g, h)| h.as_ref().map(|h| (g, h.clone())));
        let (grid, risk, interval) = match widest {
            Some((g, h)) => {
                let interval = decide_discontinuation(&h, threshold).map(|l| {
                    let (a, b) = h.grid().interval(l);
                    IntervalOut { index: l, start_day: a, end_day: b }
                });
                (Some(g), Some(risk_score(&h)), interval)
            }
            None => (None, None, None),
        };
        Ok(Self {
            creative_id: p.creative_id.clone(),
            as_of_day: p.as_of_day,
            run: run.clone(),
            heads,
            short_hazard: values(short),
            long_hazard: values(long),
            overall_hazard: values(overall),
            grid,
            risk_score: risk,
            threshold,
            predicted_interval: interval,
        })
    }

    pub fn prediction(&self) -> Prediction {
        Prediction {
            creative_id: self.creative_id.clone(),
            as_of_day: self.as_of_day,
            heads: self.heads.iter().map(|h| h.values.clone()).collect(),
        }
    }
}

/// The single run shared by every record, with the records as core predictions.
pub fn split_records(records: &[PredictionRecord]) -> Result<(RunSpec, Vec<Prediction>)> {
    let Some(first) = records.first() else {
        bail!("prediction file is empty");
    };
    if let Some(other) = records.iter().find(|r| r.run != first.run) {
        bail!("prediction file mixes runs {} and {}", first.run.name, other.run.name);
    }
    Ok((first.run.clone(), records.iter().map(PredictionRecord::prediction).collect()))
}

/// Interval counts of the hazard heads of a checkpoint.
pub fn hazard_widths(model: &TrainedModel) -> Vec<usize> {
    model
        .checkpoint
        .spec
        .heads
        .iter()
        .filter_map(|h| match &h.kind {
            HeadKind::Hazard { grid } => Some(grid.len()),
            _ => None,
        })
        .collect()
}
