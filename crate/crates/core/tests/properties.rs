mod common;

use pqah::aggregate::{aggregate_scores, dataset_summary, quantile};
use pqah::io::{decode_f32_grid, encode_f32_grid, resize_bilinear};
use pqah::metric::{binarize, score_binary, score_image};
use pqah::regions::{connected_components, split_lung_mask};
use pqah::{BinaryGrid, Heatmap, PHRecord, PartMaskSet};
use proptest::prelude::*;
use rand::Rng;

use common::{seeded, Scene};

fn heatmap_strategy(max_side: u32) -> impl Strategy<Value = Heatmap> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0f64..=1.0, (w * h) as usize)
            .prop_map(move |v| Heatmap::new(w, h, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn indexed_mask_roundtrip(w in 1u32..12, h in 1u32..12, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let label_map: Vec<(u8, String)> = vec![(3, "a".into()), (7, "b".into()), (200, "c".into())];
        let indices: Vec<u8> = (0..w * h)
            .map(|_| [0u8, 3, 7, 200][rng.random_range(0..4)])
            .collect();
        let set = PartMaskSet::from_indexed(w, h, &indices, &label_map, "c").unwrap();
        prop_assert_eq!(set.to_indexed(&label_map), indices);

        let mut union = BinaryGrid::zeros(w, h);
        for (i, (_, a)) in set.parts.iter().enumerate() {
            for (_, b) in &set.parts[i + 1..] {
                prop_assert!(a.is_disjoint(b));
            }
            union.union_with(a);
        }
        prop_assert_eq!(union, set.foreground);
    }

    #[test]
    fn f32_grid_roundtrip_keeps_range(h in heatmap_strategy(10)) {
        let rounded = Heatmap::new(h.width(), h.height(), h.values().iter().map(|&v| v as f32 as f64).collect()).unwrap();
        let back = decode_f32_grid(&encode_f32_grid(&rounded)).unwrap();
        prop_assert_eq!(&back, &rounded);
        prop_assert!(back.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn resize_stays_within_input_range(h in heatmap_strategy(8), tw in 1u32..20, th in 1u32..20) {
        let lo = h.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = h.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let r = resize_bilinear(&h, tw, th).unwrap();
        prop_assert_eq!(r.dims(), (tw, th));
        for &v in r.values() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} outside [{}, {}]", v, lo, hi);
        }
    }

    #[test]
    fn resize_preserves_constants(c in 0.0f64..=1.0, w in 1u32..8, h in 1u32..8, tw in 1u32..20, th in 1u32..20) {
        let src = Heatmap::new(w, h, vec![c; (w * h) as usize]).unwrap();
        let r = resize_bilinear(&src, tw, th).unwrap();
        prop_assert!(r.values().iter().all(|&v| v == c));
    }

    #[test]
    fn scores_stay_in_unit_range(seed in any::<u64>(), normalize in any::<bool>()) {
        let scene = Scene::random(&mut seeded(seed), 8);
        for r in score_image("i", &scene.mask_set(), &scene.heatmap(), scene.threshold, normalize).unwrap() {
            for v in [r.ph, r.recall, r.precision_used] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn perfect_binary_map_scores_one(seed in any::<u64>()) {
        let set = Scene::random(&mut seeded(seed), 8).mask_set();
        let recs = score_binary("i", &set, &set.foreground).unwrap();
        prop_assert!(recs.iter().all(|r| r.ph == 1.0));
    }

    /// Scores only depend on which side of the threshold each pixel falls.
    #[test]
    fn binarization_invariance(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let scene = Scene::random(&mut rng, 8);
        let t = scene.threshold;
        let moved: Vec<f64> = scene.heat.iter().flatten().map(|&v| {
            if v > t {
                let u: f64 = rng.random_range(0.0..=1.0);
                let nv = t + (1.0 - t) * u;
                if nv > t { nv } else { v }
            } else {
                t * rng.random_range(0.0..=1.0)
            }
        }).collect();
        let h2 = Heatmap::new(scene.width as u32, scene.height as u32, moved).unwrap();
        let set = scene.mask_set();
        prop_assert_eq!(binarize(&h2, t).unwrap(), binarize(&scene.heatmap(), t).unwrap());
        prop_assert_eq!(
            score_image("i", &set, &h2, t, false).unwrap(),
            score_image("i", &set, &scene.heatmap(), t, false).unwrap()
        );
    }

    #[test]
    fn background_precision_is_exact(seed in any::<u64>()) {
        let scene = Scene::random(&mut seeded(seed), 8);
        let set = scene.mask_set();
        let hb = binarize(&scene.heatmap(), scene.threshold).unwrap();
        let recs = score_binary("i", &set, &hb).unwrap();
        if let Some(bg) = recs.iter().find(|r| r.is_background()) {
            let (mut tp, mut cold) = (0u64, 0u64);
            for y in 0..hb.height() {
                for x in 0..hb.width() {
                    if !hb.get(x, y) {
                        cold += 1;
                        if !set.foreground.get(x, y) {
                            tp += 1;
                        }
                    }
                }
            }
            let exact = if cold == 0 { 0.0 } else { tp as f64 / cold as f64 };
            prop_assert_eq!(bg.precision_used, exact);
            prop_assert!((bg.precision_used * cold as f64 - tp as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn quantile_monotone_and_bounded(mut v in prop::collection::vec(0.0f64..=1.0, 1..40), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let ql = quantile(&v, lo).unwrap();
        let qh = quantile(&v, hi).unwrap();
        prop_assert!(ql <= qh);
        prop_assert!(ql >= v[0] && qh <= v[v.len() - 1]);
    }

    #[test]
    fn group_stats_ordering(values in prop::collection::vec(0.0f64..=1.0, 1..60), seed in any::<u64>()) {
        let recs: Vec<PHRecord> = values.iter().map(|&ph| rec("c", "p", ph)).collect();
        let stats = aggregate_scores(&recs);
        let g = &stats.groups[0];
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= g.whisker_low && g.whisker_low <= g.q1 && g.q1 <= g.q2);
        prop_assert!(g.q2 <= g.q3 && g.q3 <= g.whisker_high && g.whisker_high <= max);
        prop_assert!(g.outliers.iter().all(|&o| o < g.whisker_low || o > g.whisker_high));
        prop_assert_eq!(g.n, values.len());

        let mut shuffled = recs.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut seeded(seed));
        prop_assert_eq!(aggregate_scores(&shuffled), stats);
    }

    #[test]
    fn summary_within_cell_range(cells in prop::collection::vec((0usize..6, 0.0f64..=1.0), 1..40)) {
        let recs: Vec<PHRecord> = cells.iter().map(|&(p, v)| rec("c", &format!("part{p}"), v)).collect();
        let stats = aggregate_scores(&recs);
        let row = dataset_summary(&stats, "x", false).unwrap();
        for (mean, pick) in [(row.mean_q1, 0), (row.mean_q2, 1), (row.mean_q3, 2)] {
            let qs: Vec<f64> = stats.groups.iter().map(|g| [g.q1, g.q2, g.q3][pick]).collect();
            let lo = qs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(mean >= lo - 1e-12 && mean <= hi + 1e-12);
        }
    }

    #[test]
    fn lung_split_partitions_components(
        lw in 1u32..8, lh in 1u32..20, rw in 1u32..8, rh in 1u32..20,
        ly in 0u32..10, ry in 0u32..10, gap in 1u32..5, swap in any::<bool>(),
    ) {
        let (lx0, rx0) = (1, 1 + lw + gap);
        let width = rx0 + rw + 1;
        let mut rects = [(lx0, lw, ly, lh), (rx0, rw, ry, rh)];
        if swap {
            // mirror horizontally: the former left rectangle is now on the right
            for r in rects.iter_mut() {
                r.0 = width - r.0 - r.1;
            }
        }
        let mask = BinaryGrid::from_fn(width, 30, |x, y| {
            rects.iter().any(|&(x0, w, y0, h)| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
        });
        let split = split_lung_mask(&mask).unwrap();
        let regions = split.regions();
        let mut union = BinaryGrid::zeros(width, 30);
        for (i, (_, a)) in regions.iter().enumerate() {
            for (_, b) in &regions[i + 1..] {
                prop_assert!(a.is_disjoint(b));
            }
            union.union_with(a);
        }
        prop_assert_eq!(&union, &mask);

        // band areas follow the floor rule on each side
        let comps = connected_components(&mask);
        let (left_w, left_h, right_w, right_h) = if swap { (rw, rh, lw, lh) } else { (lw, lh, rw, rh) };
        let expect = |w: u32, h: u32| [h / 3 * w, (2 * h / 3 - h / 3) * w, (h - 2 * h / 3) * w];
        let counts: Vec<u64> = regions.iter().map(|(_, g)| g.count()).collect();
        let want: Vec<u64> = expect(left_w, left_h).into_iter().chain(expect(right_w, right_h)).map(u64::from).collect();
        prop_assert_eq!(counts.iter().sum::<u64>(), comps.iter().map(|c| c.area).sum::<u64>());
        prop_assert_eq!(counts, want);
    }
}

fn rec(cat: &str, part: &str, ph: f64) -> PHRecord {
    PHRecord {
        image_id: String::new(),
        category: cat.into(),
        part: part.into(),
        ph,
        recall: ph,
        precision_used: ph,
        part_pixels: 1,
    }
}

#[test]
fn mirrored_components_swap_sides() {
    let left = BinaryGrid::from_fn(30, 20, |x, y| (2..6).contains(&x) && (1..13).contains(&y));
    let right = BinaryGrid::from_fn(30, 20, |x, y| (18..27).contains(&x) && (4..19).contains(&y));
    let mut mask = left.clone();
    mask.union_with(&right);
    let mirrored = BinaryGrid::from_fn(30, 20, |x, y| mask.get(29 - x, y));
    let a = split_lung_mask(&mask).unwrap();
    let b = split_lung_mask(&mirrored).unwrap();
    let flip = |g: &BinaryGrid| BinaryGrid::from_fn(30, 20, |x, y| g.get(29 - x, y));
    assert_eq!(flip(&a.lt), b.rt);
    assert_eq!(flip(&a.lm), b.rm);
    assert_eq!(flip(&a.lb), b.rb);
    assert_eq!(flip(&a.rt), b.lt);
    assert_eq!(flip(&a.rb), b.lb);
}
