use std::collections::{BTreeMap, BTreeSet};

use adsurv_core::datagen::{
    generate, lifetime_share, sales_share, split, GeneratorConfig, Mechanism, Split, SplitFractions, SHARE_EDGES,
};
use adsurv_core::features::AdCreative;

fn small(seed: u64, n_campaigns: usize) -> GeneratorConfig {
    GeneratorConfig { seed, n_campaigns, ..GeneratorConfig::default() }
}

#[test]
fn same_config_gives_identical_datasets() {
    let cfg = small(7, 40);
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert_eq!(serde_json::to_string(&a.creatives).unwrap(), serde_json::to_string(&b.creatives).unwrap());
    assert_eq!(a.traces, b.traces);
    let c = generate(&small(8, 40)).unwrap();
    assert_ne!(a.creatives, c.creatives);
}

#[test]
fn campaigns_do_not_depend_on_their_neighbours() {
    let few = generate(&small(3, 10)).unwrap();
    let many = generate(&small(3, 25)).unwrap();
    assert_eq!(few.creatives[..], many.creatives[..few.creatives.len()]);
}

#[test]
fn records_respect_funnel_and_oracle_contract() {
    let cfg = small(11, 120);
    let ds = generate(&cfg).unwrap();
    assert_eq!(ds.creatives.len(), ds.traces.len());
    for (c, t) in ds.creatives.iter().zip(&ds.traces) {
        c.validate().unwrap();
        assert_eq!(c.creative_id, t.creative_id);
        assert!(c.daily.iter().all(|d| d.conversions <= d.clicks && d.clicks <= d.impressions));
        assert_eq!(c.daily.len() as u32, t.discontinuation_day);
        assert!(t.discontinuation_day >= cfg.min_serving_days);
        assert_eq!(c.lifetime_days, f64::from(t.discontinuation_day));
        let ctr = c.overall_ctr();
        assert!((0.0..=1.0).contains(&ctr));
        match t.mechanism {
            Mechanism::CutOut => assert!(t.discontinuation_day <= 10),
            Mechanism::WearOut => assert!(t.discontinuation_day > 10),
            Mechanism::Censored => {
                assert_eq!(t.discontinuation_day, cfg.horizon_days);
                assert!(c.censored);
            }
        }
        assert!(c.lifetime_days <= f64::from(cfg.horizon_days));
        assert_eq!(c.text_embedding.len(), cfg.text_dim);
        assert_eq!(c.image_embedding.len(), cfg.image_dim);
    }
}

#[test]
fn uncensored_runs_may_pass_the_horizon() {
    let cfg = GeneratorConfig {
        censor_at_horizon: false,
        horizon_days: 120,
        wearout_decay: 0.999,
        decay_spread: 0.0,
        ..small(5, 30)
    };
    let ds = generate(&cfg).unwrap();
    assert!(ds.creatives.iter().any(|c| c.lifetime_days > 120.0));
    assert!(ds.traces.iter().all(|t| t.mechanism != Mechanism::Censored || t.discontinuation_day == 480));
}

#[test]
fn infeasible_configs_are_rejected() {
    for cfg in [
        GeneratorConfig { n_campaigns: 0, ..GeneratorConfig::default() },
        GeneratorConfig { cutout_fraction: 1.5, ..GeneratorConfig::default() },
        GeneratorConfig { horizon_days: 100, ..GeneratorConfig::default() },
        GeneratorConfig { min_serving_days: 0, ..GeneratorConfig::default() },
        GeneratorConfig {
            creatives_per_campaign: adsurv_core::datagen::CountRange { min: 0, max: 0 },
            ..GeneratorConfig::default()
        },
    ] {
        assert!(generate(&cfg).is_err());
    }
    let unknown = r#"{"seed": 1, "n_campaign": 3}"#;
    assert!(serde_json::from_str::<GeneratorConfig>(unknown).is_err());
}

#[test]
fn default_dataset_matches_reference_shares() {
    let ds = generate(&GeneratorConfig::default()).unwrap();
    let n = ds.creatives.len();
    assert!((4500..=5500).contains(&n), "{n} creatives");
    let life = lifetime_share(&ds.creatives, &SHARE_EDGES).unwrap();
    for (got, want) in life.iter().zip([0.4266, 0.3872, 0.1862]) {
        assert!((got - want).abs() <= 0.05, "lifetime shares {life:?}");
    }
    let sales = sales_share(&ds.creatives, &SHARE_EDGES).unwrap();
    assert!((0.70..=0.90).contains(&sales[2]), "sales shares {sales:?}");
}

#[test]
fn equal_sales_give_count_shares() {
    let mut ds = generate(&small(2, 30)).unwrap();
    ds.creatives.iter_mut().for_each(|c| c.total_sales = 4.0);
    let sales = sales_share(&ds.creatives, &SHARE_EDGES).unwrap();
    let counts = lifetime_share(&ds.creatives, &SHARE_EDGES).unwrap();
    for (a, b) in sales.iter().zip(&counts) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((sales.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(sales_share(&[], &SHARE_EDGES).is_err());
}

fn split_counts(creatives: &[AdCreative], seed: u64) -> BTreeMap<Split, usize> {
    let a = split(creatives, SplitFractions::default(), seed).unwrap();
    let mut counts = BTreeMap::new();
    for c in creatives {
        *counts.entry(a.of(c).expect("every campaign assigned")).or_insert(0) += 1;
    }
    counts
}

#[test]
fn splits_are_disjoint_and_campaign_contained_over_seeds() {
    for seed in 0..20u64 {
        let ds = generate(&small(100 + seed, 150)).unwrap();
        let a = split(&ds.creatives, SplitFractions::default(), seed).unwrap();
        let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
        let mut ids: [BTreeSet<&str>; 3] = Default::default();
        for c in &ds.creatives {
            let s = a.of(c).unwrap();
            if let Some(prev) = seen.insert(c.campaign_id.as_str(), s) {
                assert_eq!(prev, s, "campaign {} split across sets", c.campaign_id);
            }
            ids[s as usize].insert(c.creative_id.as_str());
        }
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(ids[i].is_disjoint(&ids[j]));
            }
        }
        assert_eq!(ids.iter().map(BTreeSet::len).sum::<usize>(), ds.creatives.len());

        let counts = split_counts(&ds.creatives, seed);
        let n = ds.creatives.len() as f64;
        for (s, want) in [(Split::Train, 0.6), (Split::Validation, 0.2), (Split::Test, 0.2)] {
            let got = counts.get(&s).copied().unwrap_or(0) as f64 / n;
            assert!((got - want).abs() <= 0.05, "seed {seed}: {s:?} holds {got}");
        }
    }
}

#[test]
fn split_is_deterministic_and_guards_small_inputs() {
    let ds = generate(&small(1, 60)).unwrap();
    let a = split(&ds.creatives, SplitFractions::default(), 9).unwrap();
    assert_eq!(a, split(&ds.creatives, SplitFractions::default(), 9).unwrap());
    assert_ne!(a, split(&ds.creatives, SplitFractions::default(), 10).unwrap());

    let two = generate(&small(1, 2)).unwrap();
    assert!(split(&two.creatives, SplitFractions::default(), 0).is_err());
    let five = generate(&small(1, 5)).unwrap();
    let a = split(&five.creatives, SplitFractions::default(), 0).unwrap();
    assert_eq!(a.campaigns.len(), 5);

    let bad = SplitFractions { train: 0.5, validation: 0.2, test: 0.2 };
    assert!(split(&ds.creatives, bad, 0).is_err());
}

#[test]
fn latent_quality_drives_lifetime() {
    let ds = generate(&small(3, 200)).unwrap();
    let q: Vec<f64> = ds.traces.iter().map(|t| t.quality).collect();
    let life: Vec<f64> = ds.creatives.iter().map(|c| c.lifetime_days).collect();
    let rho = adsurv_core::eval::spearman(&q, &life).unwrap();
    assert!(rho > 0.4, "spearman {rho}");
}
