mod common;

use common::{arb_class, arb_inventory, arb_layout, arb_unit_bbox};
use proptest::prelude::*;
use tablelayout::conditioner::{
    caption_from_inventory, export_grounding, pixel_rect, render_segmentation, Palette, CAPTION_PREFIX,
};
use tablelayout::{Layout, PlacedObject};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_object_pixels_equal_rounded_rect(class in arb_class(), b in arb_unit_bbox(), size in 64u32..300) {
        let obj = PlacedObject::generated(class, b);
        let palette = Palette::default();
        let layout = Layout::with_objects("one", vec![obj.clone()]);
        let map = render_segmentation(&layout, size, &palette).unwrap();
        let (x0, y0, x1, y1) = pixel_rect(&obj, size);
        let expected = ((x1 - x0) * (y1 - y0)) as usize;
        prop_assert_eq!(map.count_color(palette.color(&obj.class).unwrap()), expected);
    }

    #[test]
    fn every_pixel_has_exactly_one_color(layout in arb_layout(10), size in 64u32..200) {
        let palette = Palette::default();
        let map = render_segmentation(&layout, size, &palette).unwrap();
        let classes: usize = palette.classes.values().map(|c| map.count_color(*c)).sum();
        prop_assert_eq!(classes + map.count_color(palette.background), (size * size) as usize);
    }

    #[test]
    fn rendering_is_deterministic(layout in arb_layout(10)) {
        let palette = Palette::default();
        let a = render_segmentation(&layout, 96, &palette).unwrap().to_png().unwrap();
        let b = render_segmentation(&layout.clone(), 96, &palette.clone()).unwrap().to_png().unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #[test]
    fn grounding_reconstructs_clamped_layout(layout in arb_layout(15), inv in arb_inventory()) {
        let spec = export_grounding(&layout, &inv).unwrap();
        let back = spec.entity_classes().unwrap();
        prop_assert_eq!(back.len(), layout.len());
        for ((class, b), obj) in back.iter().zip(&layout.objects) {
            prop_assert_eq!(class, &obj.class);
            prop_assert_eq!(*b, obj.bbox.clamped_unit());
        }
        let json = spec.to_json().unwrap();
        let parsed: tablelayout::conditioner::GroundingSpec = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(parsed, spec);
    }

    #[test]
    fn captions_share_the_prefix(inv in arb_inventory()) {
        let c = caption_from_inventory(&inv).unwrap();
        prop_assert!(c.starts_with(CAPTION_PREFIX));
        prop_assert_eq!(c, caption_from_inventory(&inv.clone()).unwrap());
    }
}
