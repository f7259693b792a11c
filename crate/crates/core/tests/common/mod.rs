#![allow(dead_code)]

use proptest::prelude::*;
use tablelayout::{BBox, Inventory, Layout, ObjectClass, PlacedObject};

pub const CLASSES: [&str; 11] = [
    "table",
    "plate",
    "glass",
    "fork",
    "knife",
    "spoon",
    "bowl",
    "cup",
    "bottle",
    "large_serving_bowl",
    "pot",
];

/// Boxes with corners in [-0.5, 1.5] and sides of at least 1e-3.
pub fn arb_bbox() -> impl Strategy<Value = BBox> {
    (-0.5f64..1.4, -0.5f64..1.4, 1e-3f64..0.6, 1e-3f64..0.6)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
}

/// Boxes inside the unit canvas.
pub fn arb_unit_bbox() -> impl Strategy<Value = BBox> {
    (0.0f64..0.9, 0.0f64..0.9, 0.01f64..0.5, 0.01f64..0.5).prop_map(|(x, y, w, h)| {
        BBox::new(x, y, (x + w).min(1.0), (y + h).min(1.0)).unwrap()
    })
}

pub fn arb_class() -> impl Strategy<Value = ObjectClass> {
    prop::sample::select(&CLASSES[..]).prop_map(|c| ObjectClass::new(c).unwrap())
}

pub fn arb_object() -> impl Strategy<Value = PlacedObject> {
    (arb_class(), arb_bbox()).prop_map(|(c, b)| PlacedObject::generated(c, b))
}

pub fn arb_layout(max: usize) -> impl Strategy<Value = Layout> {
    prop::collection::vec(arb_object(), 0..max).prop_map(|objs| Layout::with_objects("arb", objs))
}

/// Non-empty inventories over the canonical classes except tables.
pub fn arb_inventory() -> impl Strategy<Value = Inventory> {
    prop::collection::btree_map(prop::sample::select(&CLASSES[1..]), 1u32..6, 1..6)
        .prop_map(|m| Inventory::from_counts(m).unwrap())
}

/// Layout with `counts[class]` copies of each class at arbitrary positions.
pub fn layout_from_counts(counts: &[(ObjectClass, u32)]) -> Layout {
    let mut l = Layout::new("counts");
    let mut k = 0usize;
    for (class, n) in counts {
        for _ in 0..*n {
            let x = (k % 20) as f64 * 0.05;
            let y = (k / 20 % 20) as f64 * 0.05;
            l.push(PlacedObject::generated(class.clone(), BBox::new(x, y, x + 0.04, y + 0.04).unwrap()));
            k += 1;
        }
    }
    l
}
