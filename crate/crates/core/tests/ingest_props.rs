use proptest::prelude::*;
use tablelayout::completer::{MedianSizeTable, PlaceSettingTemplate};
use tablelayout::ingest::{
    compute_median_sizes, median, polygon_to_bbox, record_to_layout, AnnotationRecord, Shape, ShapeKind, SynonymMap,
};
use tablelayout::planner::mock_plan_sized;
use tablelayout::{Inventory, Mode, ObjectClass};

fn arb_polygon() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1e4f64..1e4, -1e4f64..1e4), 2..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bbox_contains_every_vertex(points in arb_polygon()) {
        if let Ok(b) = polygon_to_bbox(&points) {
            for (x, y) in &points {
                prop_assert!(b.contains(*x, *y));
            }
            prop_assert!(points.iter().any(|p| p.0 == b.x_min));
            prop_assert!(points.iter().any(|p| p.1 == b.y_max));
        }
    }
}

proptest! {
    #[test]
    fn normalization_round_trips_within_half_pixel(
        w in 64u32..2000,
        h in 64u32..2000,
        boxes in prop::collection::vec((0.0f64..0.8, 0.0f64..0.8, 0.05f64..0.2, 0.05f64..0.2), 1..10),
    ) {
        let shapes: Vec<Shape> = boxes
            .iter()
            .map(|(x, y, bw, bh)| {
                let (x0, y0) = ((x * w as f64).round(), (y * h as f64).round());
                let (x1, y1) = (((x + bw) * w as f64).round(), ((y + bh) * h as f64).round());
                Shape {
                    label: "plate".into(),
                    points: vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
                    kind: ShapeKind::Polygon,
                }
            })
            .collect();
        let rec = AnnotationRecord { image_width: w, image_height: h, shapes: shapes.clone() };
        let layout = record_to_layout(&rec, None, &SynonymMap::default()).unwrap().layout;
        prop_assert_eq!(layout.len(), shapes.len());
        for (obj, shape) in layout.objects.iter().zip(&shapes) {
            let px = polygon_to_bbox(&shape.points).unwrap();
            let [a, b, c, d] = obj.bbox.to_array();
            prop_assert!((a * w as f64 - px.x_min).abs() <= 0.5);
            prop_assert!((b * h as f64 - px.y_min).abs() <= 0.5);
            prop_assert!((c * w as f64 - px.x_max).abs() <= 0.5);
            prop_assert!((d * h as f64 - px.y_max).abs() <= 0.5);
        }
    }

    #[test]
    fn median_ignores_order(mut values in prop::collection::vec(-100.0f64..100.0, 1..50), seed in any::<u64>()) {
        let m = median(&values);
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        values.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(median(&values), m);
    }
}

#[test]
fn median_table_of_mock_corpus_recovers_plate_size() {
    let s = 0.21;
    let mut sizes = MedianSizeTable::default();
    sizes.insert(ObjectClass::plate(), s, s);
    let inv = Inventory::from_counts([("plate", 4)]).unwrap();
    let layouts: Vec<_> = (0..100)
        .map(|seed| mock_plan_sized(&inv, Mode::PlatesOnly, seed, 0.03, &sizes, &PlaceSettingTemplate::default()).unwrap())
        .collect();
    let table = compute_median_sizes(&layouts);
    let (w, h) = table.get(&ObjectClass::plate()).unwrap();
    // centers carry jitter, so x_max - x_min is s up to one rounding step
    assert!((w - s).abs() < 1e-12 && (h - s).abs() < 1e-12, "{w} {h}");
    assert!(table.get(&ObjectClass::table()).is_ok());
    assert!(table.get(&ObjectClass::new("fork").unwrap()).is_err());
}
