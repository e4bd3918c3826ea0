use adsurv_core::datagen::{generate, GeneratorConfig};
use adsurv_core::experiment::{feature_context, input_spec, AsOf};
use adsurv_core::features::{assemble, build_input, encode_statistical, AdCreative, DailyPerformance, FeatureContext};
use adsurv_core::nn::{FeatureMask, InputSpec, ModelSpec, Network};
use proptest::prelude::*;

fn dataset() -> Vec<AdCreative> {
    let cfg = GeneratorConfig { n_campaigns: 12, ..GeneratorConfig::default() };
    generate(&cfg).unwrap().creatives
}

fn setup(creatives: &[AdCreative], mask: FeatureMask) -> (FeatureContext, Network, adsurv_core::nn::ModelState) {
    let refs: Vec<&AdCreative> = creatives.iter().collect();
    let ctx = feature_context(&refs, AsOf::Day(1)).unwrap();
    let input = input_spec(&InputSpec::default(), &ctx, &creatives[0], mask);
    let net = Network::new(ModelSpec::two_term(input)).unwrap();
    let state = net.init_state(7);
    (ctx, net, state)
}

#[test]
fn default_blocks_assemble_to_width_59() {
    let creatives = dataset();
    let (ctx, net, state) = setup(&creatives, FeatureMask::ALL);
    let fv = assemble(&creatives[0], 1, &ctx, &net, &state).unwrap();
    let widths = [fv.text.len(), fv.categorical.len(), fv.image.len(), fv.stats.len(), fv.series.len()];
    assert_eq!(widths, [16, 11, 16, 6, 10]);
    assert_eq!(fv.width(), 59);
    let flat = fv.assembled();
    assert_eq!(flat.len(), 59);
    assert_eq!(&flat[..16], &fv.text[..]);
    assert_eq!(&flat[16..27], &fv.categorical[..]);
    assert_eq!(&flat[27..43], &fv.image[..]);
    assert_eq!(&flat[43..49], &fv.stats[..]);
    assert_eq!(&flat[49..], &fv.series[..]);
}

#[test]
fn every_mask_sums_its_enabled_blocks() {
    let creatives = dataset();
    for mask in FeatureMask::all_masks() {
        let (ctx, net, state) = setup(&creatives, mask);
        let fv = assemble(&creatives[1], 1, &ctx, &net, &state).unwrap();
        let expected = 11
            + if mask.text { 16 } else { 0 }
            + if mask.image { 16 } else { 0 }
            + if mask.stats { 6 } else { 0 }
            + if mask.series { 10 } else { 0 };
        assert_eq!(fv.width(), expected, "{mask:?}");
        assert_eq!(fv.assembled().len(), expected);
    }
    let (ctx, net, state) = setup(&creatives, FeatureMask { image: false, ..FeatureMask::ALL });
    assert_eq!(assemble(&creatives[1], 1, &ctx, &net, &state).unwrap().width(), 59 - 16);
}

#[test]
fn encoding_is_deterministic() {
    let creatives = dataset();
    let (ctx, net, state) = setup(&creatives, FeatureMask::ALL);
    for c in creatives.iter().take(20) {
        let a = assemble(c, 1, &ctx, &net, &state).unwrap();
        let b = assemble(c, 1, &ctx, &net, &state).unwrap();
        assert_eq!(a.assembled(), b.assembled());
    }
}

#[test]
fn future_rows_never_reach_the_features() {
    let creatives = dataset();
    let (ctx, net, state) = setup(&creatives, FeatureMask::ALL);
    let mut checked = 0;
    for c in creatives.iter().filter(|c| c.daily.len() >= 4) {
        for t in 1..=3 {
            let clean = assemble(c, t, &ctx, &net, &state).unwrap().assembled();
            let mut poisoned = c.clone();
            for d in poisoned.daily.iter_mut().skip(t) {
                d.spend = f64::NAN;
                d.impressions = u64::MAX;
                d.clicks = u64::MAX / 2;
                d.conversions = u64::MAX / 4;
            }
            let dirty = assemble(&poisoned, t, &ctx, &net, &state).unwrap().assembled();
            assert!(dirty.iter().all(|v| v.is_finite()));
            assert_eq!(clean.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), dirty.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            checked += 1;
        }
    }
    assert!(checked > 10);
}

#[test]
fn days_beyond_the_history_are_rejected() {
    let creatives = dataset();
    let refs: Vec<&AdCreative> = creatives.iter().collect();
    let ctx = feature_context(&refs, AsOf::Day(1)).unwrap();
    let c = &creatives[0];
    assert!(build_input(c, c.daily.len(), &ctx).is_ok());
    assert!(build_input(c, c.daily.len() + 1, &ctx).is_err());
}

fn day_rows() -> impl Strategy<Value = Vec<DailyPerformance>> {
    prop::collection::vec((0u64..100_000, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..5_000.0), 1..15).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (imp, c, v, spend))| {
                let clicks = (imp as f64 * c * 0.2) as u64;
                let conversions = (clicks as f64 * v) as u64;
                DailyPerformance { day: i as u32 + 1, impressions: imp, clicks, conversions, spend }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn rates_stay_in_unit_interval_and_logs_non_negative(rows in day_rows(), target in 1.0f64..500.0) {
        let s = encode_statistical(&rows, target).unwrap();
        prop_assert!((0.0..=1.0).contains(&s[3]));
        prop_assert!((0.0..=1.0).contains(&s[4]));
        for i in [0, 1, 2, 5] {
            prop_assert!(s[i] >= 0.0);
        }
    }
}
