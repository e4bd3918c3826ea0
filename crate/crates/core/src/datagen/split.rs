use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::AdCreative;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.6, validation: 0.2, test: 0.2 }
    }
}

impl SplitFractions {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

/// Campaign to split mapping; creatives inherit their campaign's split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitAssignment {
    pub campaigns: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn of(&self, creative: &AdCreative) -> Option<Split> {
        self.campaigns.get(&creative.campaign_id).copied()
    }

    /// Creatives of `which`, in input order.
    pub fn select<'a>(&self, creatives: &'a [AdCreative], which: Split) -> Vec<&'a AdCreative> {
        creatives.iter().filter(|c| self.of(c) == Some(which)).collect()
    }
}

const STRATA: usize = 10;

/// Whole-campaign split stratified by campaign mean-lifetime deciles.
///
/// Within each stratum campaigns are shuffled and handed, one at a time, to
/// the split furthest below its target creative count.
pub fn split(creatives: &[AdCreative], fractions: SplitFractions, seed: u64) -> Result<SplitAssignment> {
    let f = fractions.as_array();
    if f.iter().any(|x| !(*x >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config("split fractions must be non-negative and sum to 1".into()));
    }
    let mut stats: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for c in creatives {
        let e = stats.entry(c.campaign_id.as_str()).or_default();
        e.0 += 1;
        e.1 += c.lifetime_days;
    }
    if stats.len() < 3 {
        return Err(Error::Config(format!("need at least 3 campaigns to split, got {}", stats.len())));
    }
    let mut camps: Vec<(&str, usize, f64)> = stats.iter().map(|(id, (n, s))| (*id, *n, s / *n as f64)).collect();
    camps.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(b.0)));

    let strata: Vec<Vec<(&str, usize, f64)>> = if camps.len() >= 2 * STRATA {
        let n = camps.len();
        (0..STRATA).map(|k| camps[k * n / STRATA..(k + 1) * n / STRATA].to_vec()).collect()
    } else {
        log::warn!("only {} campaigns; falling back to an unstratified campaign split", camps.len());
        vec![camps]
    };

    let total: usize = creatives.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0usize; 3];
    let mut assigned = 0usize;
    let mut out = BTreeMap::new();
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        for (id, n, _) in stratum {
            let after = (assigned + n) as f64;
            let k = (0..3)
                .max_by(|&a, &b| {
                    let da = f[a] * after - counts[a] as f64;
                    let db = f[b] * after - counts[b] as f64;
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap_or(0);
            counts[k] += n;
            assigned += n;
            out.insert(id.to_string(), Split::ALL[k]);
        }
    }
    debug_assert_eq!(assigned, total);
    Ok(SplitAssignment { campaigns: out })
}
