use memmaps_core::entropy::{entropy_map, EntropyConfig};
use memmaps_core::evaluation::{auc, pr_curve_from_matches, QueryMatch};
use memmaps_core::io::{parse_scores, render_scores};
use memmaps_core::selection::rescore_verdicts;
use memmaps_core::staticity::{staticity_map, staticity_score, BBox, Detection};
use memmaps_core::{FrameScores, GrayImage, MemorableMap, Role, Thresholds};
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn scores() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((unit(), unit(), unit()), 1..30)
}

fn map_of(triples: &[(f64, f64, f64)], t: &Thresholds) -> MemorableMap {
    let entries = triples
        .iter()
        .enumerate()
        .map(|(i, &(m, s, e))| FrameScores::judge(format!("{i:03}"), Role::Query, m, s, e, t))
        .collect();
    MemorableMap::new("p", *t, entries)
}

proptest! {
    #[test]
    fn raising_a_threshold_only_shrinks_selection(triples in scores(), t in (unit(), unit(), unit()), bump in unit()) {
        let lo = Thresholds::new(t.0, t.1, t.2).unwrap();
        let hi = Thresholds::new((t.0 + bump).min(1.0), t.1, (t.2 + bump).min(1.0)).unwrap();
        let map = map_of(&triples, &lo);
        let raised = rescore_verdicts(&map, &hi);
        for (a, b) in map.entries.iter().zip(&raised.entries) {
            prop_assert!(!b.selected || a.selected);
        }
    }

    #[test]
    fn scores_csv_round_trips(triples in scores()) {
        let map = map_of(&triples, &Thresholds::DEFAULT);
        let parsed = parse_scores(&render_scores(&map).unwrap()).unwrap();
        prop_assert_eq!(parsed, map.entries);
    }

    #[test]
    fn staticity_score_is_a_fraction(boxes in prop::collection::vec((unit(), unit(), unit(), unit()), 0..5)) {
        let dets: Vec<Detection> = boxes
            .iter()
            .map(|&(a, b, c, d)| Detection::new("car", 1.0, BBox::new(a.min(b), c.min(d), a.max(b), c.max(d))))
            .collect();
        let ss = staticity_score(&staticity_map(&dets, 40, 30).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&ss));
    }

    #[test]
    fn entropy_bounded_by_disk_population(pixels in prop::collection::vec(any::<u8>(), 24 * 20)) {
        let img = GrayImage::new(24, 20, pixels).unwrap();
        let e = entropy_map(&img, &EntropyConfig::default()).unwrap();
        prop_assert!(e.min() >= 0.0);
        prop_assert!(e.max() <= 81f64.log2() + 1e-12);
    }

    #[test]
    fn constant_precision_curve_area(p in unit(), cuts in prop::collection::vec(unit(), 0..8)) {
        let mut r: Vec<f64> = cuts;
        r.push(0.0);
        r.push(1.0);
        r.sort_by(f64::total_cmp);
        let pts: Vec<(f64, f64)> = r.iter().map(|&x| (x, p)).collect();
        prop_assert!((auc(&pts).unwrap() - p).abs() < 1e-12);
    }

    #[test]
    fn pr_curve_is_well_formed(outcomes in prop::collection::vec((unit(), any::<bool>(), any::<bool>()), 1..25)) {
        let matches: Vec<QueryMatch> = outcomes
            .iter()
            .enumerate()
            .map(|(i, &(s, correct, discarded))| QueryMatch {
                query_id: i.to_string(),
                reference_id: "0".into(),
                similarity: s,
                correct,
                discarded,
            })
            .collect();
        prop_assume!(matches.iter().any(|m| !m.discarded));
        let curve = pr_curve_from_matches(&matches, 10).unwrap();
        prop_assert!((0.0..=1.0).contains(&curve.auc));
        prop_assert!(curve.points.windows(2).all(|w| w[0].0 <= w[1].0));
        for op in &curve.operating {
            prop_assert_eq!(op.tn, matches.iter().filter(|m| m.discarded).count());
        }
    }
}
