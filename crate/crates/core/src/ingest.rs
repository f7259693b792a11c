//! LabelMe annotations to normalized layouts and median size tables.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::completer::MedianSizeTable;
use crate::error::{Error, Result};
use crate::model::{BBox, Layout, ObjectClass, PlacedObject, DEFAULT_CANVAS_PX};

pub const MEDIAN_TABLE_FILE: &str = "median_sizes.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Polygon,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    #[serde(rename = "shape_type", default = "default_kind", deserialize_with = "kind_or_polygon")]
    pub kind: ShapeKind,
}

fn default_kind() -> ShapeKind {
    ShapeKind::Polygon
}

// LabelMe writes `null` for polygons in some versions
fn kind_or_polygon<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<ShapeKind, D::Error> {
    Ok(Option::<ShapeKind>::deserialize(d)?.unwrap_or(ShapeKind::Polygon))
}

impl Shape {
    /// Polygon vertices; a two-point rectangle becomes its four corners.
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        match (self.kind, self.points.as_slice()) {
            (ShapeKind::Rectangle, [(x0, y0), (x1, y1)]) => {
                vec![(*x0, *y0), (*x1, *y0), (*x1, *y1), (*x0, *y1)]
            }
            _ => self.points.clone(),
        }
    }
}

/// One annotated image in the LabelMe JSON dialect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    #[serde(rename = "imageWidth")]
    pub image_width: u32,
    #[serde(rename = "imageHeight")]
    pub image_height: u32,
    pub shapes: Vec<Shape>,
}

impl AnnotationRecord {
    pub fn from_json(text: &str) -> Result<Self> {
        let rec: AnnotationRecord = serde_json::from_str(text)?;
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Ingest(format!(
                "image dimensions must be positive, got {}x{}",
                self.image_width, self.image_height
            )));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            if s.points.is_empty() {
                return Err(Error::Ingest(format!("shape {i} ({}) has no points", s.label)));
            }
        }
        Ok(())
    }
}

/// Axis-aligned box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl PixelBox {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

pub fn polygon_to_bbox(points: &[(f64, f64)]) -> Result<PixelBox> {
    if points.is_empty() {
        return Err(Error::Ingest("polygon has no points".into()));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Ingest("polygon has non-finite coordinates".into()));
    }
    let mut b = PixelBox {
        x_min: f64::INFINITY,
        y_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for &(x, y) in points {
        b.x_min = b.x_min.min(x);
        b.y_min = b.y_min.min(y);
        b.x_max = b.x_max.max(x);
        b.y_max = b.y_max.max(y);
    }
    if b.x_max <= b.x_min || b.y_max <= b.y_min {
        return Err(Error::Ingest(format!(
            "degenerate polygon with extent {}x{}",
            b.x_max - b.x_min,
            b.y_max - b.y_min
        )));
    }
    Ok(b)
}

/// Crop window `WxH+X+Y` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crop {
    pub width: u32,
    pub height: u32,
    pub x: u32,
    pub y: u32,
}

impl Crop {
    pub fn square(side: u32, x: u32, y: u32) -> Self {
        Self {
            width: side,
            height: side,
            x,
            y,
        }
    }

    /// `None` for the literal `full`.
    pub fn parse_arg(s: &str) -> Result<Option<Self>> {
        if s.trim().eq_ignore_ascii_case("full") {
            Ok(None)
        } else {
            s.parse().map(Some)
        }
    }
}

impl fmt::Display for Crop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}+{}+{}", self.width, self.height, self.x, self.y)
    }
}

impl FromStr for Crop {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Ingest(format!("crop must look like WxH+X+Y, got {s:?}"));
        let (size, rest) = s.trim().split_once('+').ok_or_else(bad)?;
        let (x, y) = rest.split_once('+').ok_or_else(bad)?;
        let (w, h) = size.split_once(['x', 'X']).ok_or_else(bad)?;
        let num = |v: &str| v.trim().parse::<u32>().map_err(|_| bad());
        let crop = Crop {
            width: num(w)?,
            height: num(h)?,
            x: num(x)?,
            y: num(y)?,
        };
        if crop.width == 0 || crop.height == 0 {
            return Err(Error::Ingest(format!("crop {s:?} has zero size")));
        }
        Ok(crop)
    }
}

/// Dataset label variants folded onto classes, applied before the built-in synonyms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SynonymMap {
    pub map: BTreeMap<String, String>,
}

impl SynonymMap {
    pub fn load(path: &Path) -> Result<Self> {
        let raw: SynonymMap = serde_json::from_str(&fs::read_to_string(path)?)?;
        let mut map = BTreeMap::new();
        for (k, v) in raw.map {
            map.insert(ObjectClass::new(&k)?.as_str().to_string(), ObjectClass::new(&v)?.as_str().to_string());
        }
        Ok(Self { map })
    }

    pub fn class_for(&self, label: &str) -> Result<ObjectClass> {
        let norm = ObjectClass::new(label)?;
        match self.map.get(norm.as_str()) {
            Some(target) => ObjectClass::new(target),
            None => ObjectClass::resolve(label, false),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedRecord {
    pub layout: Layout,
    /// One message per dropped shape.
    pub warnings: Vec<String>,
}

/// Normalizes every shape into the crop window (or the whole image) and
/// clips it there; shapes with no area left are dropped.
pub fn record_to_layout(rec: &AnnotationRecord, crop: Option<&Crop>, synonyms: &SynonymMap) -> Result<IngestedRecord> {
    rec.validate()?;
    let (ox, oy, w, h) = match crop {
        Some(c) => {
            if c.x as u64 + c.width as u64 > rec.image_width as u64
                || c.y as u64 + c.height as u64 > rec.image_height as u64
            {
                return Err(Error::Ingest(format!(
                    "crop {c} exceeds the {}x{} image",
                    rec.image_width, rec.image_height
                )));
            }
            (c.x as f64, c.y as f64, c.width as f64, c.height as f64)
        }
        None => (0.0, 0.0, rec.image_width as f64, rec.image_height as f64),
    };
    let mut layout = Layout::new("");
    layout.canvas_px = DEFAULT_CANVAS_PX;
    let mut warnings = Vec::new();
    for (i, shape) in rec.shapes.iter().enumerate() {
        let class = synonyms.class_for(&shape.label)?;
        let px = match polygon_to_bbox(&shape.vertices()) {
            Ok(b) => b,
            Err(e) => {
                warnings.push(format!("shape {i} ({}): {e}", shape.label));
                continue;
            }
        };
        let x0 = ((px.x_min - ox) / w).max(0.0);
        let y0 = ((px.y_min - oy) / h).max(0.0);
        let x1 = ((px.x_max - ox) / w).min(1.0);
        let y1 = ((px.y_max - oy) / h).min(1.0);
        match BBox::new(x0, y0, x1, y1) {
            Ok(b) => layout.push(PlacedObject::generated(class, b)),
            Err(_) => warnings.push(format!(
                "shape {i} ({}) has no area inside the crop and was dropped",
                shape.label
            )),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(IngestedRecord { layout, warnings })
}

/// Median of `values`; even counts average the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

/// Per-class median width and height, each axis independently. Only classes
/// present in the corpus appear.
pub fn compute_median_sizes(layouts: &[Layout]) -> MedianSizeTable {
    let mut dims: BTreeMap<ObjectClass, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for l in layouts {
        for o in &l.objects {
            let e = dims.entry(o.class.clone()).or_default();
            e.0.push(o.bbox.width());
            e.1.push(o.bbox.height());
        }
    }
    let mut table = MedianSizeTable::empty();
    for (class, (ws, hs)) in dims {
        if let (Some(w), Some(h)) = (median(&ws), median(&hs)) {
            table.insert(class, w, h);
        }
    }
    table
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestSummary {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub failed: Vec<(PathBuf, String)>,
    pub median_table: PathBuf,
}

/// Converts every `*.json` record in `input` (sorted by name) into a layout
/// file in `out`, then writes the median size table of the whole corpus.
/// Unreadable records are reported and skipped.
pub fn ingest_dir(input: &Path, crop: Option<&Crop>, synonyms: &SynonymMap, out: &Path) -> Result<IngestSummary> {
    let mut files: Vec<PathBuf> = fs::read_dir(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Ingest(format!("no .json annotations in {}", input.display())));
    }
    fs::create_dir_all(out)?;
    let mut summary = IngestSummary::default();
    let mut layouts = Vec::new();
    for f in files {
        let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let rec = fs::read_to_string(&f)
            .map_err(Error::from)
            .and_then(|t| AnnotationRecord::from_json(&t))
            .and_then(|r| record_to_layout(&r, crop, synonyms));
        match rec {
            Ok(mut ing) => {
                ing.layout.source_tag = stem.clone();
                let path = out.join(format!("{stem}.json"));
                fs::write(&path, ing.layout.to_json()?)?;
                summary.written.push(path);
                summary
                    .warnings
                    .extend(ing.warnings.into_iter().map(|w| format!("{stem}: {w}")));
                layouts.push(ing.layout);
            }
            Err(e) => {
                log::warn!("{}: {e}", f.display());
                summary.failed.push((f, e.to_string()));
            }
        }
    }
    let table = compute_median_sizes(&layouts);
    summary.median_table = out.join(MEDIAN_TABLE_FILE);
    fs::write(&summary.median_table, serde_json::to_string_pretty(&table)?)?;
    Ok(summary)
}
