use adsurv_core::datagen::{generate, GeneratorConfig};
use adsurv_core::eval::*;
use adsurv_core::features::{AdCreative, DailyPerformance, Gender};
use adsurv_core::survival::{HazardVector, TimeGrid};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct enumeration of every ordered pair.
fn brute_force_ci(risks: &[f64], truths: &[Truth]) -> (u64, u64, u64) {
    let (mut c, mut t, mut a) = (0, 0, 0);
    for i in 0..risks.len() {
        for j in 0..risks.len() {
            if truths[i].censored || truths[i].lifetime_days >= truths[j].lifetime_days {
                continue;
            }
            a += 1;
            if risks[i] > risks[j] {
                c += 1;
            } else if risks[i] == risks[j] {
                t += 1;
            }
        }
    }
    (c, t, a)
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<Truth>) {
    let risks = (0..n).map(|_| f64::from(rng.random_range(0..12u8)) / 4.0).collect();
    let truths = (0..n)
        .map(|_| Truth { lifetime_days: f64::from(rng.random_range(1..30u8)), censored: rng.random_bool(0.3) })
        .collect();
    (risks, truths)
}

#[test]
fn concordance_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let (risks, truths) = random_instance(&mut rng, n);
        let (c, t, a) = brute_force_ci(&risks, &truths);
        match concordance_index(&risks, &truths) {
            Ok(ci) => {
                assert_eq!((ci.concordant, ci.tied, ci.admissible), (c, t, a));
                assert_eq!(ci.value, (c as f64 + 0.5 * t as f64) / a as f64);
                checked += 1;
            }
            Err(_) => assert_eq!(a, 0),
        }
    }
    assert!(checked > 90);
}

#[test]
fn concordance_reference_points() {
    let truths: Vec<Truth> =
        [1.0, 2.0, 3.0].iter().map(|&d| Truth { lifetime_days: d, censored: false }).collect();
    assert_eq!(concordance_index(&[3.0, 2.0, 1.0], &truths).unwrap().value, 1.0);
    assert_eq!(concordance_index(&[1.0, 2.0, 3.0], &truths).unwrap().value, 0.0);
    assert_eq!(concordance_index(&[1.0, 1.0, 1.0], &truths).unwrap().value, 0.5);

    let all_censored = vec![Truth { lifetime_days: 1.0, censored: true }; 3];
    assert!(matches!(
        concordance_index(&[1.0, 2.0, 3.0], &all_censored),
        Err(adsurv_core::Error::Undefined(_))
    ));
    let tied = vec![Truth { lifetime_days: 4.0, censored: false }; 3];
    assert!(concordance_index(&[1.0, 2.0, 3.0], &tied).is_err());
    assert!(concordance_index(&[1.0], &truths).is_err());
    assert!(concordance_index(&[f64::NAN, 1.0, 2.0], &truths).is_err());
}

#[test]
fn random_risks_give_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 10_000;
    let risks: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let truths: Vec<Truth> = (0..n)
        .map(|_| Truth { lifetime_days: f64::from(rng.random_range(1..121u8)), censored: rng.random_bool(0.2) })
        .collect();
    let ci = concordance_index(&risks, &truths).unwrap().value;
    assert!((ci - 0.5).abs() <= 0.02, "{ci}");
}

proptest! {
    #[test]
    fn concordance_ignores_monotone_transforms(
        raw in proptest::collection::vec((0u8..20, 1u8..40, any::<bool>()), 2..60)
    ) {
        let risks: Vec<f64> = raw.iter().map(|r| f64::from(r.0)).collect();
        let truths: Vec<Truth> = raw.iter().map(|r| Truth { lifetime_days: f64::from(r.1), censored: r.2 }).collect();
        let moved: Vec<f64> = risks.iter().map(|r| (r * 0.3).exp() - 7.0).collect();
        match (concordance_index(&risks, &truths), concordance_index(&moved, &truths)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one side defined"),
        }
    }

    #[test]
    fn ndcg_of_identity_is_one_and_label_free(n in 1usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        ids.shuffle(&mut rng);
        prop_assert_eq!(ndcg_order(&ids, &ids).unwrap(), 1.0);
        let mut pred = ids.clone();
        pred.shuffle(&mut rng);
        let v = ndcg_order(&pred, &ids).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0 + 1e-12);
        let relabel = |v: &[String]| v.iter().map(|s| format!("x-{s}")).collect::<Vec<_>>();
        prop_assert_eq!(ndcg_order(&relabel(&pred), &relabel(&ids)).unwrap(), v);
    }

    #[test]
    fn f1_is_harmonic_mean(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..80)) {
        let p: Vec<bool> = pairs.iter().map(|x| x.0).collect();
        let a: Vec<bool> = pairs.iter().map(|x| x.1).collect();
        let r = f1_score(&p, &a).unwrap();
        let h = if r.precision + r.recall > 0.0 { 2.0 * r.precision * r.recall / (r.precision + r.recall) } else { 0.0 };
        prop_assert!((r.f1 - h).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.f1));
    }

    #[test]
    fn cpa_ratio_is_scale_free(spend in 0.0f64..1e4, conv in 0u64..50, target in 0.1f64..500.0, k in 0.01f64..100.0) {
        let c1 = creative_with(vec![row(1, 100, 20, conv, spend)], target);
        let c2 = creative_with(vec![row(1, 100, 20, conv, spend * k)], target * k);
        match (cpa_ratio(&c1, 1).unwrap(), cpa_ratio(&c2, 1).unwrap()) {
            (CpaRatio::Finite(a), CpaRatio::Finite(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
            (CpaRatio::Infinite, CpaRatio::Infinite) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }
}

#[test]
fn ndcg_reference_points() {
    let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let actual = ids(&["a", "b", "c"]);
    let reversed = ndcg_order(&ids(&["c", "b", "a"]), &actual).unwrap();
    // Gains 1, 2, 3 at discounts 1, 1/log2(3), 1/2 over the ideal 3, 2, 1.
    let l3 = 3f64.log2();
    let expect = (1.0 + 2.0 / l3 + 1.5) / (3.0 + 2.0 / l3 + 0.5);
    assert!((reversed - expect).abs() < 1e-15);
    assert!((reversed - 0.789_998_004).abs() < 1e-9);
    assert_eq!(ndcg_order(&ids(&["z"]), &ids(&["z"])).unwrap(), 1.0);
    assert!(ndcg_order(&ids(&["a", "b", "d"]), &actual).is_err());
    assert!(ndcg_order(&ids(&["a", "a", "b"]), &actual).is_err());
    assert!(ndcg_order(&ids(&["a", "b"]), &actual).is_err());
}

#[test]
fn tied_ndcg_ignores_order_inside_ties() {
    let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let singletons: Vec<Vec<String>> = ["a", "b", "c"].iter().map(|s| vec![s.to_string()]).collect();
    let pred = ids(&["c", "a", "b"]);
    assert_eq!(ndcg_tied(&pred, &singletons).unwrap(), ndcg_order(&pred, &ids(&["a", "b", "c"])).unwrap());
    let all_tied = vec![ids(&["a", "b", "c"])];
    assert!((ndcg_tied(&pred, &all_tied).unwrap() - 1.0).abs() < 1e-15);
    let groups = vec![ids(&["a"]), ids(&["b", "c"])];
    let x = ndcg_tied(&ids(&["a", "b", "c"]), &groups).unwrap();
    let y = ndcg_tied(&ids(&["a", "c", "b"]), &groups).unwrap();
    assert!((x - 1.0).abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
    // Gains 3, 1.5, 1.5: "b" first costs the top slot.
    let l3 = 3f64.log2();
    let z = ndcg_tied(&ids(&["b", "a", "c"]), &groups).unwrap();
    assert!((z - (1.5 + 3.0 / l3 + 0.75) / (3.0 + 1.5 / l3 + 0.75)).abs() < 1e-15);
    assert!(ndcg_tied(&ids(&["a", "b"]), &groups).is_err());
}

#[test]
fn f1_reference_points() {
    let r = f1_score(&[true, true, true, false], &[true, true, false, true]).unwrap();
    assert_eq!((r.true_positive, r.false_positive, r.false_negative), (2, 1, 1));
    assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);

    let perfect = f1_score(&[true, false, true], &[true, false, true]).unwrap();
    assert_eq!(perfect.f1, 1.0);
    let none = f1_score(&[false, false], &[true, false]).unwrap();
    assert_eq!((none.f1, none.undefined), (0.0, false));
    let empty = f1_score(&[false, false], &[false, false]).unwrap();
    assert_eq!((empty.f1, empty.undefined), (0.0, true));
}

#[test]
fn horizons_map_to_interval_endings() {
    assert_eq!(horizon_interval(3).unwrap(), (TimeGrid::short(), 0));
    assert_eq!(horizon_interval(7).unwrap(), (TimeGrid::short(), 2));
    assert_eq!(horizon_interval(30).unwrap(), (TimeGrid::long(), 1));
    assert_eq!(horizon_interval(90).unwrap(), (TimeGrid::long(), 3));
    assert!(horizon_interval(8).is_err());

    let t = |d: f64, c: bool| Truth { lifetime_days: d, censored: c };
    let truths = [t(1.0, false), t(3.0, false), t(4.0, false), t(25.0, false), t(25.0, true), t(150.0, false)];
    let perfect_3: Vec<Option<usize>> = vec![Some(0), Some(0), Some(1), None, None, None];
    assert_eq!(f1_at_horizon(&perfect_3, &truths, 3).unwrap().f1, 1.0);
    let perfect_30: Vec<Option<usize>> = vec![Some(0), Some(0), Some(0), Some(1), None, None];
    assert_eq!(f1_at_horizon(&perfect_30, &truths, 30).unwrap().f1, 1.0);
    // The censored record and the one beyond the grid are never positive.
    assert!(!discontinued_in(t(150.0, false), &TimeGrid::long(), 4));
}

#[test]
fn top_sales_slice_takes_ceiling_with_id_ties() {
    let ds = generate(&GeneratorConfig { n_campaigns: 2, ..GeneratorConfig::default() }).unwrap();
    let mut cs: Vec<AdCreative> = ds.creatives.into_iter().take(8).collect();
    let refs: Vec<&AdCreative> = cs.iter().collect();
    assert_eq!(top_sales_slice(&refs, 0.25).len(), 2);
    let best = refs.iter().enumerate().max_by(|a, b| a.1.total_sales.total_cmp(&b.1.total_sales)).unwrap().0;
    assert!(top_sales_slice(&refs, 0.25).contains(&best));

    cs.iter_mut().for_each(|c| c.total_sales = 1.0);
    let mut refs: Vec<&AdCreative> = cs.iter().collect();
    let first: Vec<String> = top_sales_slice(&refs, 0.25).iter().map(|&i| refs[i].creative_id.clone()).collect();
    refs.reverse();
    let second: Vec<String> = top_sales_slice(&refs, 0.25).iter().map(|&i| refs[i].creative_id.clone()).collect();
    let mut sorted = first.clone();
    sorted.sort();
    assert_eq!(sorted, {
        let mut s = second.clone();
        s.sort();
        s
    });
    let mut all: Vec<String> = cs.iter().map(|c| c.creative_id.clone()).collect();
    all.sort();
    assert_eq!(sorted, all[..2].to_vec());
    assert_eq!(top_sales_slice(&refs[..3], 0.25).len(), 1);
}

fn hv(grid: &TimeGrid, v: &[f64]) -> HazardVector {
    HazardVector::new(grid.clone(), v.to_vec()).unwrap()
}

#[test]
fn discontinuation_order_rules() {
    let g = TimeGrid::long();
    let items = vec![
        ("late".to_string(), hv(&g, &[0.1, 0.1, 0.95, 0.1, 0.1])),
        ("none".to_string(), hv(&g, &[0.1, 0.1, 0.1, 0.1, 0.3])),
        ("early".to_string(), hv(&g, &[0.92, 0.1, 0.1, 0.1, 0.1])),
        ("late-hi".to_string(), hv(&g, &[0.1, 0.1, 0.99, 0.1, 0.1])),
        ("none-hi".to_string(), hv(&g, &[0.1, 0.1, 0.1, 0.1, 0.8])),
        ("late-b".to_string(), hv(&g, &[0.1, 0.1, 0.95, 0.1, 0.1])),
    ];
    let order = predicted_discontinuation_order(&items, 0.9);
    assert_eq!(order, ["early", "late-hi", "late", "late-b", "none-hi", "none"]);
    let mut shuffled = items.clone();
    shuffled.reverse();
    assert_eq!(predicted_discontinuation_order(&shuffled, 0.9), order);
}

fn row(day: u32, imp: u64, clk: u64, conv: u64, spend: f64) -> DailyPerformance {
    DailyPerformance { day, impressions: imp, clicks: clk, conversions: conv, spend }
}

fn creative_with(daily: Vec<DailyPerformance>, target_cpa: f64) -> AdCreative {
    AdCreative {
        creative_id: "x".into(),
        campaign_id: "c".into(),
        gender: Gender::All,
        genre: "books".into(),
        target_cpa,
        text_embedding: vec![],
        image_embedding: vec![],
        lifetime_days: daily.len() as f64,
        daily,
        censored: false,
        total_sales: 0.0,
    }
}

#[test]
fn cpa_ratio_reference_points() {
    let c = creative_with(vec![row(1, 100, 10, 2, 100.0), row(2, 100, 10, 0, 60.0)], 50.0);
    assert_eq!(cpa_ratio(&c, 1).unwrap(), CpaRatio::Finite(1.0));
    assert_eq!(cpa_ratio(&c, 2).unwrap(), CpaRatio::Finite(1.6));
    assert_eq!(cpa_ratio(&c, 9).unwrap(), CpaRatio::Finite(1.6));
    let z = creative_with(vec![row(1, 100, 0, 0, 0.0)], 50.0);
    assert_eq!(cpa_ratio(&z, 1).unwrap(), CpaRatio::Finite(0.0));
    let inf = creative_with(vec![row(1, 100, 3, 0, 9.0)], 50.0);
    assert_eq!(cpa_ratio(&inf, 1).unwrap(), CpaRatio::Infinite);
    assert!(cpa_ratio(&creative_with(vec![row(1, 1, 1, 1, 1.0)], 0.0), 1).is_err());
}

#[test]
fn short_case_study_contract() {
    let creatives: Vec<AdCreative> = (0..4)
        .map(|k| {
            let daily = (1..=8).map(|d| row(d, 100, 10, 1 + u64::from(d % 3 == 0), 40.0 + f64::from(k * d))).collect();
            AdCreative { creative_id: format!("k{k}"), ..creative_with(daily, 30.0) }
        })
        .collect();
    let grid = TimeGrid::short();
    let exact: Vec<ShortCaseItem> = creatives
        .iter()
        .map(|c| ShortCaseItem { creative: c, predicted_interval: Some(2), oracle_day: 7 })
        .collect();
    let r = short_term_case_study(&exact, &grid).unwrap();
    assert_eq!(r.model, r.oracle);

    let first: Vec<ShortCaseItem> = creatives
        .iter()
        .map(|c| ShortCaseItem { creative: c, predicted_interval: Some(0), oracle_day: 8 })
        .collect();
    let r = short_term_case_study(&first, &grid).unwrap();
    let at3: Vec<CpaRatio> = creatives.iter().map(|c| cpa_ratio(c, 3).unwrap()).collect();
    assert_eq!(r.model, RatioSummary::of(&at3));

    // Predictions after the real stop are capped there.
    let late: Vec<ShortCaseItem> = creatives
        .iter()
        .map(|c| ShortCaseItem { creative: c, predicted_interval: Some(3), oracle_day: 4 })
        .collect();
    let r = short_term_case_study(&late, &grid).unwrap();
    assert_eq!(r.model, r.oracle);
}

#[test]
fn long_case_study_with_oracle_order_is_perfect() {
    let g = TimeGrid::long();
    let items: Vec<LongCaseItem> = (0..30)
        .map(|k| {
            let life = 11.0 + 3.5 * f64::from(k);
            // Hazard crosses 0.9 in the interval containing the lifetime, stronger for earlier stops.
            let l = g.bounds().iter().skip(1).position(|b| life <= *b).unwrap_or(4);
            let mut h = vec![0.05; 5];
            h[l] = 0.999 - 0.001 * f64::from(k);
            LongCaseItem {
                creative_id: format!("i{k:02}"),
                lifetime_days: life.min(120.0),
                censored: life > 120.0,
                total_sales: f64::from(k),
                cpa_ratio: CpaRatio::Finite(1.0),
                hazard: hv(&g, &h),
            }
        })
        .collect();
    let checkpoints: Vec<u32> = (1..=13).map(|i| i * 10).collect();
    let r = long_term_case_study(&items, &checkpoints, 0.9).unwrap();
    for p in r.points.iter().filter(|p| p.method == METHOD_MODEL) {
        assert!((p.ndcg - 1.0).abs() < 1e-12, "checkpoint {}", p.checkpoint_day);
    }
    // Sales rise with lifetime, so descending sales is the reverse of the stop order.
    for p in r.points.iter().filter(|p| p.method == METHOD_SALES && p.n > 1) {
        assert!(p.ndcg < 1.0);
    }
    assert_eq!(r.skipped, vec![120, 130]);
    assert_eq!(r.points.len(), 3 * 11);
    let csv = String::from_utf8(ndcg_plot_csv(&r.points).unwrap()).unwrap();
    assert!(csv.starts_with("checkpoint_day,method,ndcg\n"));
}

#[test]
fn ablation_sweep_reports_trend() {
    let sweep = day_ablation_sweep(&[1, 2, 3, 4], |d| Ok((0.6 + 0.01 * d as f64, 0.7 - 0.01 * d as f64))).unwrap();
    assert_eq!(sweep.rows.len(), 4);
    assert_eq!(sweep.spearman_short, Some(1.0));
    assert_eq!(sweep.spearman_long, Some(-1.0));
}

#[test]
fn reports_render() {
    let rows = vec![EvalReport {
        metric: "ci/short".into(),
        slice: SLICE_ALL.into(),
        value: 0.8,
        n: 10,
        flag: String::new(),
        config_fingerprint: "abc".into(),
    }];
    let csv = String::from_utf8(reports_csv(&rows).unwrap()).unwrap();
    assert_eq!(csv, "metric,slice,value,n,flag,config_fingerprint\nci/short,all,0.8,10,,abc\n");
    assert!(summary_text(&rows).contains("0.8000"));
}
