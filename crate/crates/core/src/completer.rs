//! Rule-based completion of a core layout (plates or place settings) into a
//! full table setting.
//!
//! Each plate gets a local frame from the table edge it sits on: `f` points
//! from the diner toward the table center and `r` to the diner's right. In
//! canvas coordinates (y down) `r = (-f.y, f.x)`. Template offsets are given in
//! multiples of the plate's extent along `r` and `f`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBox, Inventory, Layout, ObjectClass, PlacedObject, Provenance};

pub const TABLE_BOX: [f64; 4] = [0.02, 0.02, 0.98, 0.98];
/// Distance of an edge seat's plate center from its table edge.
pub const EDGE_BAND: f64 = 0.15;
pub const SHARED_LINE_Y: f64 = 0.5;
pub const SHARED_SPACING: f64 = 1.2;

/// Per-class `(width, height)` in normalized units, oriented for a diner on the
/// bottom edge (height runs along `f`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MedianSizeTable {
    pub sizes: BTreeMap<ObjectClass, (f64, f64)>,
}

impl Default for MedianSizeTable {
    fn default() -> Self {
        let entries: [(&str, f64, f64); 11] = [
            ("plate", 0.18, 0.18),
            ("fork", 0.05, 0.20),
            ("knife", 0.05, 0.20),
            ("spoon", 0.05, 0.18),
            ("glass", 0.06, 0.06),
            ("cup", 0.08, 0.08),
            ("bowl", 0.10, 0.10),
            ("large_serving_bowl", 0.22, 0.22),
            ("pot", 0.22, 0.22),
            ("bottle", 0.07, 0.20),
            ("place_setting", 0.28, 0.24),
        ];
        Self {
            sizes: entries
                .into_iter()
                .map(|(k, w, h)| (ObjectClass::new(k).expect("static label"), (w, h)))
                .collect(),
        }
    }
}

impl MedianSizeTable {
    pub fn empty() -> Self {
        Self {
            sizes: BTreeMap::new(),
        }
    }

    pub fn get(&self, class: &ObjectClass) -> Result<(f64, f64)> {
        self.sizes
            .get(class)
            .copied()
            .ok_or_else(|| Error::MissingSize(class.clone()))
    }

    pub fn insert(&mut self, class: ObjectClass, width: f64, height: f64) {
        self.sizes.insert(class, (width, height));
    }

    /// Entries of `other` override entries here.
    pub fn merged_with(&self, other: &MedianSizeTable) -> MedianSizeTable {
        let mut out = self.clone();
        out.sizes.extend(other.sizes.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (class, (w, h)) in &self.sizes {
            if !(*w > 0.0 && *w < 1.0 && *h > 0.0 && *h < 1.0) {
                return Err(Error::Completion(format!(
                    "median size for {class} must lie in (0,1), got {w}x{h}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateItem {
    pub class: ObjectClass,
    pub offset_r: f64,
    pub offset_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlaceSettingTemplate {
    pub items: Vec<TemplateItem>,
}

impl Default for PlaceSettingTemplate {
    fn default() -> Self {
        let items: [(&str, f64, f64); 6] = [
            ("fork", -0.85, 0.0),
            ("knife", 0.85, 0.0),
            ("spoon", 1.25, 0.0),
            ("bowl", 0.0, 0.85),
            ("glass", 0.75, 0.9),
            ("glass", 1.15, 0.9),
        ];
        Self {
            items: items
                .into_iter()
                .map(|(c, r, f)| TemplateItem {
                    class: ObjectClass::new(c).expect("static label"),
                    offset_r: r,
                    offset_f: f,
                })
                .collect(),
        }
    }
}

impl PlaceSettingTemplate {
    pub fn has_class(&self, class: &ObjectClass) -> bool {
        self.items.iter().any(|i| &i.class == class)
    }

    pub fn validate(&self, sizes: &MedianSizeTable) -> Result<()> {
        for item in &self.items {
            if !item.offset_r.is_finite() || !item.offset_f.is_finite() {
                return Err(Error::Completion(format!(
                    "template offsets for {} must be finite",
                    item.class
                )));
            }
            sizes.get(&item.class)?;
        }
        Ok(())
    }
}

/// Template plus size table, as stored in one configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CompletionConfig {
    #[serde(default)]
    pub template: PlaceSettingTemplate,
    #[serde(default)]
    pub sizes: MedianSizeTable,
}

impl CompletionConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: CompletionConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.sizes.validate()?;
        cfg.template.validate(&cfg.sizes)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Top,
    Bottom,
    Left,
    Right,
}

impl Edge {
    /// Unit vector from the seat toward the table center.
    pub fn forward(self) -> (f64, f64) {
        match self {
            Edge::Bottom => (0.0, -1.0),
            Edge::Top => (0.0, 1.0),
            Edge::Left => (1.0, 0.0),
            Edge::Right => (-1.0, 0.0),
        }
    }

    /// Unit vector to the seated diner's right.
    pub fn right(self) -> (f64, f64) {
        let (fx, fy) = self.forward();
        (-fy, fx)
    }

    fn is_vertical(self) -> bool {
        matches!(self, Edge::Left | Edge::Right)
    }

    /// Local `(along r, along f)` extents to canvas `(width, height)` and back.
    fn orient(self, a: f64, b: f64) -> (f64, f64) {
        if self.is_vertical() {
            (b, a)
        } else {
            (a, b)
        }
    }
}

/// Nearest canvas edge to the box center; ties go Bottom, Top, Left, Right.
pub fn assign_edge(plate_box: &BBox) -> Edge {
    let (cx, cy) = plate_box.center();
    let candidates = [
        (Edge::Bottom, 1.0 - cy),
        (Edge::Top, cy),
        (Edge::Left, cx),
        (Edge::Right, 1.0 - cx),
    ];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.1 < best.1 {
            best = *c;
        }
    }
    best.0
}

/// Seat positions for `n` diners: `(edge, cx, cy)`, long edges first.
///
/// One diner sits at the bottom, two face each other, and larger parties fill
/// the top and bottom edges evenly with the odd or remaining seats on the
/// left/right ends.
pub fn edge_slots(n: usize) -> Vec<(Edge, f64, f64)> {
    let (long, ends) = match n {
        0 => (0, 0),
        1 => return vec![(Edge::Bottom, 0.5, 1.0 - EDGE_BAND)],
        2 => (1, 0),
        3 => (1, 1),
        4 => (2, 0),
        5 => (2, 1),
        6 => (2, 2),
        7 => (3, 1),
        8 => (3, 2),
        _ => {
            let ends = if n % 2 == 1 { 1 } else { 2 };
            ((n - ends) / 2, ends)
        }
    };
    let mut slots = Vec::with_capacity(n);
    let along = |i: usize| (i + 1) as f64 / (long + 1) as f64;
    for i in 0..long {
        slots.push((Edge::Top, along(i), EDGE_BAND));
    }
    for i in 0..long {
        slots.push((Edge::Bottom, along(i), 1.0 - EDGE_BAND));
    }
    if ends >= 1 {
        slots.push((Edge::Left, EDGE_BAND, 0.5));
    }
    if ends >= 2 {
        slots.push((Edge::Right, 1.0 - EDGE_BAND, 0.5));
    }
    slots
}

/// Box of `class` centered at `(cx, cy)` with its median size oriented for `edge`.
pub fn oriented_box(class: &ObjectClass, edge: Edge, cx: f64, cy: f64, sizes: &MedianSizeTable) -> Result<BBox> {
    let (w, h) = sizes.get(class)?;
    let (w, h) = edge.orient(w, h);
    BBox::from_center(cx, cy, w, h)
}

fn place_item(plate: &BBox, edge: Edge, item: &TemplateItem, sizes: &MedianSizeTable) -> Result<PlacedObject> {
    let (cx, cy) = plate.center();
    let (ext_r, ext_f) = edge.orient(plate.width(), plate.height());
    let (fx, fy) = edge.forward();
    let (rx, ry) = edge.right();
    let dr = item.offset_r * ext_r;
    let df = item.offset_f * ext_f;
    let x = cx + dr * rx + df * fx;
    let y = cy + dr * ry + df * fy;
    Ok(PlacedObject::inserted(
        item.class.clone(),
        oriented_box(&item.class, edge, x, y, sizes)?,
    ))
}

/// Every template item placed around `plate`, in template order.
pub fn expand_place(
    plate: &PlacedObject,
    template: &PlaceSettingTemplate,
    sizes: &MedianSizeTable,
) -> Result<Vec<PlacedObject>> {
    if !plate.class.is_plate() {
        return Err(Error::Completion(format!(
            "expected a plate, got {}",
            plate.class
        )));
    }
    let edge = assign_edge(&plate.bbox);
    template
        .items
        .iter()
        .map(|item| place_item(&plate.bbox, edge, item, sizes))
        .collect()
}

fn check_not_overfull(class: &ObjectClass, required: u32, present: u32) -> Result<()> {
    if present > required {
        return Err(Error::Overfull {
            class: class.clone(),
            required,
            present,
        });
    }
    Ok(())
}

/// Completes `core` so that every inventory class ends up with exactly its
/// required count.
///
/// `place_setting` boxes are first replaced by a median plate at their center.
/// Missing plates take the free edge seats; per-setting items (template
/// classes) are dealt round-robin over plates in layout order; every other
/// class goes on a horizontal line through the table center. Tables only count
/// when the inventory lists them. Nothing already in `core` is removed.
pub fn complete_layout(
    core: &Layout,
    inventory: &Inventory,
    template: &PlaceSettingTemplate,
    sizes: &MedianSizeTable,
) -> Result<Layout> {
    let mut out = Layout {
        canvas_px: core.canvas_px,
        source_tag: core.source_tag.clone(),
        objects: Vec::with_capacity(core.len()),
    };
    for obj in &core.objects {
        if obj.class.is_place_setting() {
            let (cx, cy) = obj.bbox.center();
            let edge = assign_edge(&obj.bbox);
            out.push(PlacedObject {
                class: ObjectClass::plate(),
                bbox: oriented_box(&ObjectClass::plate(), edge, cx, cy, sizes)?,
                provenance: obj.provenance,
            });
        } else {
            out.push(obj.clone());
        }
    }

    let table = ObjectClass::table();
    if inventory.contains(&table) {
        let (required, present) = (inventory.get(&table), out.count_of(&table));
        check_not_overfull(&table, required, present)?;
        for _ in present..required {
            let [a, b, c, d] = TABLE_BOX;
            out.push(PlacedObject::inserted(table.clone(), BBox::new(a, b, c, d)?));
        }
    }

    let plate = ObjectClass::plate();
    let required_plates = inventory.plates();
    let present_plates = out.count_of(&plate);
    check_not_overfull(&plate, required_plates, present_plates)?;
    if present_plates < required_plates {
        insert_missing_plates(&mut out, required_plates as usize, sizes)?;
    }

    let plates: Vec<BBox> = out
        .objects
        .iter()
        .filter(|o| o.class.is_plate())
        .map(|o| o.bbox)
        .collect();

    // (class, present, required) for everything that is neither table nor plate
    let mut per_setting: Vec<(ObjectClass, u32, u32)> = Vec::new();
    let mut shared: Vec<(ObjectClass, u32)> = Vec::new();
    for (class, required) in inventory.iter() {
        if class.is_table() || class.is_plate() {
            continue;
        }
        let present = out.count_of(class);
        check_not_overfull(class, required, present)?;
        if present == required {
            continue;
        }
        if template.has_class(class) {
            per_setting.push((class.clone(), present, required));
        } else {
            shared.push((class.clone(), required - present));
        }
    }

    if !per_setting.is_empty() {
        if plates.is_empty() {
            return Err(Error::Completion(
                "per-setting items requested but the layout has no plates".into(),
            ));
        }
        insert_per_setting(&mut out, &plates, &per_setting, template, sizes)?;
    }
    insert_shared(&mut out, &shared, sizes)?;
    Ok(out)
}

fn insert_missing_plates(out: &mut Layout, required: usize, sizes: &MedianSizeTable) -> Result<()> {
    let mut centers: Vec<(f64, f64)> = out
        .objects
        .iter()
        .filter(|o| o.class.is_plate())
        .map(|o| o.bbox.center())
        .collect();
    let mut free = edge_slots(required);
    while centers.len() < required {
        let (idx, _) = free
            .iter()
            .enumerate()
            .map(|(i, (_, x, y))| {
                let d = centers
                    .iter()
                    .map(|(px, py)| (px - x).powi(2) + (py - y).powi(2))
                    .fold(f64::INFINITY, f64::min);
                (i, d)
            })
            // first slot wins ties
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let (edge, x, y) = free.remove(idx);
        out.push(PlacedObject::inserted(
            ObjectClass::plate(),
            oriented_box(&ObjectClass::plate(), edge, x, y, sizes)?,
        ));
        centers.push((x, y));
    }
    Ok(())
}

fn insert_per_setting(
    out: &mut Layout,
    plates: &[BBox],
    wanted: &[(ObjectClass, u32, u32)],
    template: &PlaceSettingTemplate,
    sizes: &MedianSizeTable,
) -> Result<()> {
    let n_plates = plates.len();
    // copies[plate][template item]
    let mut copies = vec![vec![0u32; template.items.len()]; n_plates];
    for (class, present, required) in wanted {
        let slots: Vec<usize> = template
            .items
            .iter()
            .enumerate()
            .filter(|(_, it)| &it.class == class)
            .map(|(j, _)| j)
            .collect();
        for k in *present as usize..*required as usize {
            let plate = k % n_plates;
            let slot = slots[(k / n_plates) % slots.len()];
            copies[plate][slot] += 1;
        }
    }
    for (plate, row) in plates.iter().zip(&copies) {
        let edge = assign_edge(plate);
        for (item, &n) in template.items.iter().zip(row) {
            for _ in 0..n {
                out.push(place_item(plate, edge, item, sizes)?);
            }
        }
    }
    Ok(())
}

fn insert_shared(out: &mut Layout, shared: &[(ObjectClass, u32)], sizes: &MedianSizeTable) -> Result<()> {
    let mut items = Vec::new();
    for (class, n) in shared {
        let size = sizes.get(class)?;
        items.extend(std::iter::repeat_n((class, size), *n as usize));
    }
    let total: f64 = items.iter().map(|(_, (w, _))| SHARED_SPACING * w).sum();
    let mut x = 0.5 - total / 2.0;
    for (class, (w, h)) in items {
        let slot = SHARED_SPACING * w;
        out.push(PlacedObject::inserted(
            class.clone(),
            BBox::from_center(x + slot / 2.0, SHARED_LINE_Y, w, h)?,
        ));
        x += slot;
    }
    Ok(())
}

/// Marks every object as generated; used when a whole completed layout stands
/// in for model output.
pub fn as_generated(mut layout: Layout) -> Layout {
    for o in &mut layout.objects {
        o.provenance = Provenance::Generated;
    }
    layout
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plate_centered(cx: f64, cy: f64) -> PlacedObject {
        PlacedObject::generated(
            ObjectClass::plate(),
            BBox::from_center(cx, cy, 0.18, 0.18).unwrap(),
        )
    }

    fn item(class: &str, r: f64, f: f64) -> PlaceSettingTemplate {
        PlaceSettingTemplate {
            items: vec![TemplateItem {
                class: ObjectClass::new(class).unwrap(),
                offset_r: r,
                offset_f: f,
            }],
        }
    }

    #[test]
    fn edge_assignment() {
        let at = |x, y| assign_edge(&BBox::from_center(x, y, 0.1, 0.1).unwrap());
        assert_eq!(at(0.5, 0.9), Edge::Bottom);
        assert_eq!(at(0.1, 0.5), Edge::Left);
        assert_eq!(at(0.5, 0.5), Edge::Bottom);
        assert_eq!(at(0.5, 0.1), Edge::Top);
        assert_eq!(at(0.9, 0.5), Edge::Right);
        // Top beats Left on a tie
        assert_eq!(at(0.2, 0.2), Edge::Top);
    }

    #[test]
    fn frames() {
        assert_eq!(Edge::Bottom.right(), (1.0, 0.0));
        assert_eq!(Edge::Top.right(), (-1.0, 0.0));
        assert_eq!(Edge::Left.right(), (0.0, 1.0));
        assert_eq!(Edge::Right.right(), (0.0, -1.0));
    }

    #[test]
    fn fork_side_flips_with_edge() {
        let sizes = MedianSizeTable::default();
        let tpl = item("fork", -0.85, 0.0);
        let bottom = plate_centered(0.5, 0.85);
        let fork = &expand_place(&bottom, &tpl, &sizes).unwrap()[0];
        let (fx, _) = fork.bbox.center();
        assert!(fx < bottom.bbox.x_min() + 0.05 / 2.0);
        assert_eq!(fork.provenance, Provenance::Inserted);

        let top = plate_centered(0.5, 0.15);
        let fork = &expand_place(&top, &tpl, &sizes).unwrap()[0];
        assert!(fork.bbox.center().0 > top.bbox.x_max() - 0.05 / 2.0);
    }

    #[test]
    fn glass_offset_arithmetic() {
        let sizes = MedianSizeTable::default();
        let glass = &expand_place(&plate_centered(0.5, 0.85), &item("glass", 0.75, 0.9), &sizes).unwrap()[0];
        let (x, y) = glass.bbox.center();
        assert!((x - 0.635).abs() < 1e-12);
        assert!((y - 0.688).abs() < 1e-12);
        assert!((glass.bbox.width() - 0.06).abs() < 1e-12);
    }

    #[test]
    fn cutlery_is_elongated_along_forward() {
        let sizes = MedianSizeTable::default();
        let left = plate_centered(0.15, 0.5);
        let fork = &expand_place(&left, &item("fork", -0.85, 0.0), &sizes).unwrap()[0];
        assert!((fork.bbox.width() - 0.20).abs() < 1e-12);
        assert!((fork.bbox.height() - 0.05).abs() < 1e-12);
        // diner on the left edge has their left hand toward -y
        assert!(fork.bbox.center().1 < 0.5);
    }

    #[test]
    fn expand_errors() {
        let sizes = MedianSizeTable::empty();
        assert!(matches!(
            expand_place(&plate_centered(0.5, 0.85), &PlaceSettingTemplate::default(), &sizes),
            Err(Error::MissingSize(_))
        ));
        let not_plate = PlacedObject::generated(
            ObjectClass::new("cup").unwrap(),
            BBox::new(0.1, 0.1, 0.2, 0.2).unwrap(),
        );
        assert!(expand_place(&not_plate, &PlaceSettingTemplate::default(), &MedianSizeTable::default()).is_err());
    }

    fn two_plate_core() -> Layout {
        Layout::with_objects("core", vec![plate_centered(0.5, 0.15), plate_centered(0.5, 0.85)])
    }

    #[test]
    fn completes_exact_counts() {
        let inv: Inventory = "2 plates, 2 forks, 2 knives, 2 spoons, 4 glasses, 2 bowls".parse().unwrap();
        let out = complete_layout(
            &two_plate_core(),
            &inv,
            &PlaceSettingTemplate::default(),
            &MedianSizeTable::default(),
        )
        .unwrap();
        assert_eq!(Inventory::from_layout(&out), inv);
        for o in &out.objects {
            let expected = if o.class.is_plate() {
                Provenance::Generated
            } else {
                Provenance::Inserted
            };
            assert_eq!(o.provenance, expected);
        }
    }

    #[test]
    fn nothing_to_insert() {
        let core = Layout::with_objects(
            "core",
            (0..4)
                .map(|i| plate_centered(0.2 + 0.2 * i as f64, 0.85))
                .collect(),
        );
        let inv: Inventory = "4 plates".parse().unwrap();
        let out = complete_layout(&core, &inv, &PlaceSettingTemplate::default(), &MedianSizeTable::default()).unwrap();
        assert_eq!(out, core);
    }

    #[test]
    fn single_shared_item_at_center() {
        let inv: Inventory = "2 plates, 1 large serving bowl".parse().unwrap();
        let out = complete_layout(&two_plate_core(), &inv, &PlaceSettingTemplate::default(), &MedianSizeTable::default()).unwrap();
        let bowl = out.objects.last().unwrap();
        assert_eq!(bowl.class.as_str(), "large_serving_bowl");
        let (x, y) = bowl.bbox.center();
        assert!((x - 0.5).abs() < 1e-12 && (y - 0.5).abs() < 1e-12);
        assert!((bowl.bbox.width() - 0.22).abs() < 1e-12);
    }

    #[test]
    fn shared_items_evenly_spaced() {
        let inv: Inventory = "2 plates, 3 pots".parse().unwrap();
        let out = complete_layout(&two_plate_core(), &inv, &PlaceSettingTemplate::default(), &MedianSizeTable::default()).unwrap();
        let xs: Vec<f64> = out.objects[2..].iter().map(|o| o.bbox.center().0).collect();
        assert!((xs[1] - 0.5).abs() < 1e-12);
        assert!((xs[1] - xs[0] - 1.2 * 0.22).abs() < 1e-12);
        assert!((xs[2] - xs[1] - 1.2 * 0.22).abs() < 1e-12);
    }

    #[test]
    fn overfull_core_is_reported() {
        let inv: Inventory = "1 plate".parse().unwrap();
        let err = complete_layout(&two_plate_core(), &inv, &PlaceSettingTemplate::default(), &MedianSizeTable::default())
            .unwrap_err();
        assert!(matches!(err, Error::Overfull { required: 1, present: 2, .. }));
    }

    #[test]
    fn missing_plates_take_free_seats() {
        let core = Layout::with_objects("core", vec![plate_centered(0.5, 0.85)]);
        let inv: Inventory = "2 plates, 2 forks".parse().unwrap();
        let out = complete_layout(&core, &inv, &PlaceSettingTemplate::default(), &MedianSizeTable::default()).unwrap();
        assert_eq!(Inventory::from_layout(&out), inv);
        let added = &out.objects[1];
        assert!(added.class.is_plate());
        assert_eq!(added.provenance, Provenance::Inserted);
        let (x, y) = added.bbox.center();
        assert!((x - 0.5).abs() < 1e-12 && (y - 0.15).abs() < 1e-12);
    }

    #[test]
    fn place_settings_become_plates() {
        let sizes = MedianSizeTable::default();
        let core = Layout::with_objects(
            "core",
            vec![
                PlacedObject::generated(ObjectClass::table(), BBox::new(0.02, 0.02, 0.98, 0.98).unwrap()),
                PlacedObject::generated(
                    ObjectClass::place_setting(),
                    BBox::from_center(0.5, 0.85, 0.28, 0.24).unwrap(),
                ),
            ],
        );
        let inv: Inventory = "1 plate, 1 fork, 1 knife".parse().unwrap();
        let out = complete_layout(&core, &inv, &PlaceSettingTemplate::default(), &sizes).unwrap();
        assert_eq!(out.count_of(&ObjectClass::place_setting()), 0);
        assert_eq!(out.count_of(&ObjectClass::table()), 1);
        assert_eq!(out.count_of(&ObjectClass::plate()), 1);
        let plate = &out.objects[1];
        assert!((plate.bbox.width() - 0.18).abs() < 1e-12);
        assert_eq!(plate.bbox.center(), (0.5, 0.85));
    }

    #[test]
    fn listed_tables_are_counted() {
        let inv: Inventory = "1 table, 2 plates".parse().unwrap();
        let out = complete_layout(&two_plate_core(), &inv, &PlaceSettingTemplate::default(), &MedianSizeTable::default()).unwrap();
        assert_eq!(out.count_of(&ObjectClass::table()), 1);
    }

    #[test]
    fn seat_layouts() {
        let centers = |n| -> Vec<(f64, f64)> { edge_slots(n).iter().map(|s| (s.1, s.2)).collect() };
        assert_eq!(centers(2), vec![(0.5, 0.15), (0.5, 0.85)]);
        let four = centers(4);
        let expect = [(1.0 / 3.0, 0.15), (2.0 / 3.0, 0.15), (1.0 / 3.0, 0.85), (2.0 / 3.0, 0.85)];
        for (got, want) in four.iter().zip(expect) {
            assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12);
        }
        for n in 0..=12 {
            assert_eq!(edge_slots(n).len(), n);
        }
    }

    #[test]
    fn config_file_round_trip() {
        let cfg = CompletionConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("completion.json");
        std::fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        assert_eq!(CompletionConfig::load(&p).unwrap(), cfg);

        let mut bad = cfg.clone();
        bad.sizes.insert(ObjectClass::new("fork").unwrap(), 1.5, 0.2);
        std::fs::write(&p, serde_json::to_string(&bad).unwrap()).unwrap();
        assert!(CompletionConfig::load(&p).is_err());
    }
}
