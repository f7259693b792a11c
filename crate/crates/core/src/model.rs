//! Core domain types: object classes, normalized boxes, layouts and inventories.
//!
//! All coordinates live in the normalized canvas `[0,1]²` with the origin at the
//! top-left corner and `y` growing downward. Boxes may extend past the canvas;
//! that is scored downstream, never rejected here.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The eleven object categories of the table-setting domain.
pub const CANONICAL_CLASSES: [&str; 11] = [
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

pub const TABLE: &str = "table";
pub const PLATE: &str = "plate";
/// Pseudo-class used when the planner emits whole place settings instead of plates.
pub const PLACE_SETTING: &str = "place_setting";

const SYNONYMS: &[(&str, &str)] = &[
    ("large_bowl", "large_serving_bowl"),
    ("serving_bowl", "large_serving_bowl"),
    ("big_bowl", "large_serving_bowl"),
    ("knives", "knife"),
    ("wine_glass", "glass"),
    ("wineglass", "glass"),
    ("drinking_glass", "glass"),
    ("mug", "cup"),
    ("teacup", "cup"),
    ("cooking_pot", "pot"),
    ("saucepan", "pot"),
    ("dish", "plate"),
];

fn normalize_label(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.trim().chars() {
        let ch = if ch == ' ' || ch == '-' || ch == '\t' { '_' } else { ch };
        if ch == '_' && (out.is_empty() || out.ends_with('_')) {
            continue;
        }
        out.extend(ch.to_lowercase());
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

fn known(label: &str) -> Option<&'static str> {
    if let Some(c) = CANONICAL_CLASSES.iter().find(|c| **c == label) {
        return Some(c);
    }
    if label == PLACE_SETTING {
        return Some(PLACE_SETTING);
    }
    SYNONYMS.iter().find(|(k, _)| *k == label).map(|(_, v)| *v)
}

/// A lowercase object class label.
///
/// Labels are normalized on construction (trimmed, lowercased, spaces and
/// hyphens folded to `_`), so equality is case-insensitive on the canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectClass(String);

impl ObjectClass {
    pub fn new(label: &str) -> Result<Self> {
        let norm = normalize_label(label);
        if norm.is_empty() {
            return Err(Error::InvalidClass(label.to_string()));
        }
        Ok(Self(norm))
    }

    /// Resolves a free-form phrase ("Plates", "large bowl", "knives") to a class.
    ///
    /// Known labels and synonyms are matched first, with an optional plural
    /// suffix. Unknown phrases keep their normalized form; with `strip_plural`
    /// a trailing `s` is also removed from them.
    pub fn resolve(phrase: &str, strip_plural: bool) -> Result<Self> {
        let norm = normalize_label(phrase);
        if norm.is_empty() {
            return Err(Error::InvalidClass(phrase.to_string()));
        }
        if let Some(k) = known(&norm) {
            return Ok(Self(k.to_string()));
        }
        for suffix in ["es", "s"] {
            if let Some(stem) = norm.strip_suffix(suffix) {
                if let Some(k) = known(stem) {
                    return Ok(Self(k.to_string()));
                }
            }
        }
        if strip_plural && norm.len() > 1 && norm.ends_with('s') && !norm.ends_with("ss") {
            return Ok(Self(norm[..norm.len() - 1].to_string()));
        }
        Ok(Self(norm))
    }

    pub fn table() -> Self {
        Self(TABLE.to_string())
    }

    pub fn plate() -> Self {
        Self(PLATE.to_string())
    }

    pub fn place_setting() -> Self {
        Self(PLACE_SETTING.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_canonical(&self) -> bool {
        CANONICAL_CLASSES.contains(&self.0.as_str())
    }

    pub fn is_table(&self) -> bool {
        self.0 == TABLE
    }

    pub fn is_plate(&self) -> bool {
        self.0 == PLATE
    }

    pub fn is_place_setting(&self) -> bool {
        self.0 == PLACE_SETTING
    }

    /// Human-readable phrase: underscores become spaces.
    pub fn phrase(&self) -> String {
        self.0.replace('_', " ")
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

impl Serialize for ObjectClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ObjectClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        ObjectClass::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned box `(x_min, y_min, x_max, y_max)` in normalized canvas units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let bad = |why| Err(Error::InvalidBox(x_min, y_min, x_max, y_max, why));
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return bad("coordinates must be finite");
        }
        if x_min >= x_max {
            return bad("x_min must be below x_max");
        }
        if y_min >= y_max {
            return bad("y_min must be below y_max");
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(
            cx - width / 2.0,
            cy - height / 2.0,
            cx + width / 2.0,
            cy + height / 2.0,
        )
    }

    /// The unit canvas `(0,0,1,1)`.
    pub fn unit() -> Self {
        Self {
            x_min: 0.0,
            y_min: 0.0,
            x_max: 1.0,
            y_max: 1.0,
        }
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Area of the overlap with `other`, zero when disjoint or merely touching.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        BBox::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        )
        .ok()
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter == 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    /// Fraction of this box's area that lies inside `region`.
    pub fn inside_fraction(&self, region: &BBox) -> f64 {
        (self.intersection_area(region) / self.area()).clamp(0.0, 1.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<BBox> {
        BBox::new(
            self.x_min + dx,
            self.y_min + dy,
            self.x_max + dx,
            self.y_max + dy,
        )
    }

    /// Coordinates clamped to the unit canvas. The result may be degenerate,
    /// so it is returned as a raw array.
    pub fn clamped_unit(&self) -> [f64; 4] {
        [
            self.x_min.clamp(0.0, 1.0),
            self.y_min.clamp(0.0, 1.0),
            self.x_max.clamp(0.0, 1.0),
            self.y_max.clamp(0.0, 1.0),
        ]
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b, c, e] = <[f64; 4]>::deserialize(d)?;
        BBox::new(a, b, c, e).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Generated,
    Inserted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub class: ObjectClass,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub provenance: Provenance,
}

impl PlacedObject {
    pub fn generated(class: ObjectClass, bbox: BBox) -> Self {
        Self {
            class,
            bbox,
            provenance: Provenance::Generated,
        }
    }

    pub fn inserted(class: ObjectClass, bbox: BBox) -> Self {
        Self {
            class,
            bbox,
            provenance: Provenance::Inserted,
        }
    }
}

pub const DEFAULT_CANVAS_PX: u32 = 512;

/// An ordered set of placed objects. Serializes to the canonical layout JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub canvas_px: u32,
    #[serde(default)]
    pub source_tag: String,
    pub objects: Vec<PlacedObject>,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            canvas_px: DEFAULT_CANVAS_PX,
            source_tag: String::new(),
            objects: Vec::new(),
        }
    }
}

impl Layout {
    pub fn new(source_tag: impl Into<String>) -> Self {
        Self {
            source_tag: source_tag.into(),
            ..Self::default()
        }
    }

    pub fn with_objects(source_tag: impl Into<String>, objects: Vec<PlacedObject>) -> Self {
        Self {
            objects,
            ..Self::new(source_tag)
        }
    }

    pub fn push(&mut self, obj: PlacedObject) {
        self.objects.push(obj);
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Per-class instance counts.
    pub fn class_counts(&self) -> BTreeMap<ObjectClass, u32> {
        let mut counts = BTreeMap::new();
        for o in &self.objects {
            *counts.entry(o.class.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn count_of(&self, class: &ObjectClass) -> u32 {
        self.objects.iter().filter(|o| &o.class == class).count() as u32
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let layout: Layout = serde_json::from_str(text)?;
        if layout.canvas_px == 0 {
            return Err(Error::InvalidLayout("canvas_px must be positive".into()));
        }
        Ok(layout)
    }
}

/// Required multiset of object classes: `{(class, count)}` with every count ≥ 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Inventory {
    entries: BTreeMap<ObjectClass, u32>,
}

impl<'de> Deserialize<'de> for Inventory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = BTreeMap::<ObjectClass, u32>::deserialize(d)?;
        Inventory::from_counts(entries).map_err(serde::de::Error::custom)
    }
}

impl Inventory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<I, C>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (C, u32)>,
        C: Into<ObjectClassArg>,
    {
        let mut inv = Inventory::new();
        for (class, n) in counts {
            inv.add(class.into().0?, n)?;
        }
        Ok(inv)
    }

    /// Adds `n` required instances; repeated classes accumulate.
    pub fn add(&mut self, class: ObjectClass, n: u32) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidInventory(format!(
                "count for {class} must be at least 1"
            )));
        }
        *self.entries.entry(class).or_insert(0) += n;
        Ok(())
    }

    /// Counts every object of `layout`.
    pub fn from_layout(layout: &Layout) -> Self {
        Self {
            entries: layout.class_counts(),
        }
    }

    pub fn get(&self, class: &ObjectClass) -> u32 {
        self.entries.get(class).copied().unwrap_or(0)
    }

    pub fn contains(&self, class: &ObjectClass) -> bool {
        self.entries.contains_key(class)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectClass, u32)> {
        self.entries.iter().map(|(c, n)| (c, *n))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self) -> u64 {
        self.entries.values().map(|n| *n as u64).sum()
    }

    pub fn plates(&self) -> u32 {
        self.get(&ObjectClass::plate())
    }

    /// Inventory restricted to what the planner is asked for in `mode`.
    pub fn core_for(&self, mode: Mode) -> Inventory {
        match mode {
            Mode::Full => self.clone(),
            Mode::PlatesOnly => self.only(&ObjectClass::plate(), ObjectClass::plate()),
            Mode::PlaceSettingsOnly => self.only(&ObjectClass::plate(), ObjectClass::place_setting()),
        }
    }

    fn only(&self, source: &ObjectClass, target: ObjectClass) -> Inventory {
        let mut inv = Inventory::new();
        let n = self.get(source);
        if n > 0 {
            inv.entries.insert(target, n);
        }
        inv
    }
}

/// Helper so `Inventory::from_counts` accepts both `&str` and `ObjectClass` keys.
pub struct ObjectClassArg(Result<ObjectClass>);

impl From<&str> for ObjectClassArg {
    fn from(s: &str) -> Self {
        Self(ObjectClass::new(s))
    }
}

impl From<ObjectClass> for ObjectClassArg {
    fn from(c: ObjectClass) -> Self {
        Self(Ok(c))
    }
}

impl From<&ObjectClass> for ObjectClassArg {
    fn from(c: &ObjectClass) -> Self {
        Self(Ok(c.clone()))
    }
}

/// Parses the prose inventory grammar: comma-separated `<count> <class name>`
/// phrases, e.g. `"4 plates, 4 forks, 1 large bowl"`.
impl FromStr for Inventory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut inv = Inventory::new();
        let phrases = s
            .split([',', ';'])
            .flat_map(|p| p.split(" and "))
            .map(str::trim)
            .filter(|p| !p.is_empty());
        for phrase in phrases {
            let (count, name) = phrase
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::InvalidInventory(format!("expected '<count> <class>', got {phrase:?}")))?;
            let n: u32 = count
                .parse()
                .map_err(|_| Error::InvalidInventory(format!("bad count {count:?} in {phrase:?}")))?;
            inv.add(ObjectClass::resolve(name, true)?, n)?;
        }
        if inv.is_empty() {
            return Err(Error::InvalidInventory("inventory is empty".into()));
        }
        Ok(inv)
    }
}

/// How much of the scene the planner is asked to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Full,
    #[default]
    PlatesOnly,
    PlaceSettingsOnly,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::PlatesOnly => "plates-only",
            Mode::PlaceSettingsOnly => "place-settings-only",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize_label(s).as_str() {
            "full" => Ok(Mode::Full),
            "plates_only" | "plates" => Ok(Mode::PlatesOnly),
            "place_settings_only" | "place_settings" => Ok(Mode::PlaceSettingsOnly),
            other => Err(Error::PlannerConfig(format!("unknown mode {other:?}"))),
        }
    }
}

/// Rounds half-way values toward positive infinity.
pub(crate) fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}
