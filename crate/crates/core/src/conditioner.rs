//! Diffusion conditioning exports: a class-colored segmentation raster for
//! ControlNet-style models, a grounding spec (caption + phrase/box pairs) for
//! GLIGEN-style models, and the caption shared by both.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{round_half_up, Inventory, Layout, ObjectClass, PlacedObject};

pub type Rgb = [u8; 3];

pub const CAPTION_PREFIX: &str = "A laid table. On the table are ";
pub const MIN_RENDER_PX: u32 = 64;
pub const DEFAULT_RENDER_PX: u32 = 512;

const CAPTION_ORDER: [&str; 10] = [
    "plate",
    "glass",
    "cup",
    "fork",
    "knife",
    "spoon",
    "bowl",
    "large_serving_bowl",
    "pot",
    "bottle",
];

fn pluralize(phrase: &str) -> String {
    if let Some(stem) = phrase.strip_suffix("knife") {
        return format!("{stem}knives");
    }
    if ["s", "x", "ch", "sh"].iter().any(|s| phrase.ends_with(s)) {
        format!("{phrase}es")
    } else {
        format!("{phrase}s")
    }
}

/// Inventory caption, e.g. `"A laid table. On the table are 4 plates, 4 glasses."`.
///
/// Classes follow a fixed order (plate, glass, cup, fork, knife, spoon, bowl,
/// large serving bowl, pot, bottle), then any other labels alphabetically.
/// The table itself is the scene and is never listed.
pub fn caption_from_inventory(inventory: &Inventory) -> Result<String> {
    let mut items: Vec<(usize, &ObjectClass, u32)> = inventory
        .iter()
        .filter(|(c, _)| !c.is_table())
        .map(|(c, n)| {
            let rank = CAPTION_ORDER
                .iter()
                .position(|k| *k == c.as_str())
                .unwrap_or(CAPTION_ORDER.len());
            (rank, c, n)
        })
        .collect();
    if items.is_empty() {
        return Err(Error::InvalidInventory(
            "cannot caption an empty inventory".into(),
        ));
    }
    // BTreeMap iteration already orders extras alphabetically.
    items.sort_by_key(|(rank, _, _)| *rank);
    let parts: Vec<String> = items
        .iter()
        .map(|(_, c, n)| {
            let phrase = c.phrase();
            if *n > 1 {
                format!("{n} {}", pluralize(&phrase))
            } else {
                format!("{n} {phrase}")
            }
        })
        .collect();
    Ok(format!("{CAPTION_PREFIX}{}.", parts.join(", ")))
}

/// Class → RGB color table plus the background color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub background: Rgb,
    pub classes: BTreeMap<ObjectClass, Rgb>,
}

impl Default for Palette {
    fn default() -> Self {
        let entries: [(&str, Rgb); 11] = [
            ("table", [140, 100, 60]),
            ("plate", [255, 255, 255]),
            ("glass", [80, 180, 255]),
            ("fork", [200, 200, 0]),
            ("knife", [255, 80, 80]),
            ("spoon", [255, 160, 60]),
            ("bowl", [160, 60, 200]),
            ("cup", [60, 200, 160]),
            ("bottle", [0, 120, 60]),
            ("large_serving_bowl", [120, 120, 255]),
            ("pot", [90, 90, 90]),
        ];
        Palette {
            background: [0, 0, 0],
            classes: entries
                .into_iter()
                .map(|(k, v)| (ObjectClass::new(k).expect("static label"), v))
                .collect(),
        }
    }
}

impl Palette {
    pub fn color(&self, class: &ObjectClass) -> Option<Rgb> {
        self.classes.get(class).copied()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMap {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl SegmentationMap {
    fn filled(width: u32, height: u32, color: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: color.repeat(width as usize * height as usize),
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn count_color(&self, color: Rgb) -> usize {
        self.pixels.chunks_exact(3).filter(|p| *p == color).count()
    }

    fn fill_rect(&mut self, x0: u32, y0: u32, x1: u32, y1: u32, color: Rgb) {
        if x1 <= x0 {
            return;
        }
        let span = color.repeat((x1 - x0) as usize);
        let stride = self.width as usize * 3;
        for y in y0..y1 {
            let start = y as usize * stride + x0 as usize * 3;
            self.pixels[start..start + span.len()].copy_from_slice(&span);
        }
    }

    /// PNG, 8-bit RGB, no alpha.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header()?;
            writer.write_image_data(&self.pixels)?;
            writer.finish()?;
        }
        Ok(out)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let bytes = self.to_png()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }
}

/// Pixel rectangle `[x0, x1) × [y0, y1)` covered by `obj` at `size` px, clipped
/// to the raster.
pub fn pixel_rect(obj: &PlacedObject, size: u32) -> (u32, u32, u32, u32) {
    let s = size as f64;
    let clip = |v: f64| round_half_up(v * s).clamp(0, size as i64) as u32;
    let b = &obj.bbox;
    (
        clip(b.x_min()),
        clip(b.y_min()),
        clip(b.x_max()),
        clip(b.y_max()),
    )
}

/// Rasterizes `layout` as filled class-colored rectangles, largest area first so
/// smaller objects stay visible on top.
pub fn render_segmentation(layout: &Layout, size_px: u32, palette: &Palette) -> Result<SegmentationMap> {
    if size_px < MIN_RENDER_PX {
        return Err(Error::Render(format!(
            "render size {size_px} is below the minimum of {MIN_RENDER_PX}"
        )));
    }
    let mut order: Vec<(&PlacedObject, Rgb)> = layout
        .objects
        .iter()
        .map(|o| {
            palette
                .color(&o.class)
                .map(|c| (o, c))
                .ok_or_else(|| Error::MissingColor(o.class.clone()))
        })
        .collect::<Result<_>>()?;
    // stable: equal areas keep layout order
    order.sort_by(|a, b| b.0.bbox.area().total_cmp(&a.0.bbox.area()));

    let mut map = SegmentationMap::filled(size_px, size_px, palette.background);
    for (obj, color) in order {
        let (x0, y0, x1, y1) = pixel_rect(obj, size_px);
        map.fill_rect(x0, y0, x1, y1, color);
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingEntity {
    pub phrase: String,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceMeta {
    pub grounding_strength: f64,
    pub sampler: String,
    pub steps: u32,
    pub guidance_scale: f64,
}

impl Default for InferenceMeta {
    fn default() -> Self {
        Self {
            grounding_strength: 1.0,
            sampler: "ddim".to_string(),
            steps: 50,
            guidance_scale: 7.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingSpec {
    pub caption: String,
    pub entities: Vec<GroundingEntity>,
    pub inference_meta: InferenceMeta,
}

impl GroundingSpec {
    /// Rebuilds `(class, clamped box)` pairs from the entities.
    pub fn entity_classes(&self) -> Result<Vec<(ObjectClass, [f64; 4])>> {
        self.entities
            .iter()
            .map(|e| Ok((ObjectClass::new(&e.phrase)?, e.bbox)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One entity per object, boxes clamped to the unit canvas, caption from `inventory`.
pub fn export_grounding(layout: &Layout, inventory: &Inventory) -> Result<GroundingSpec> {
    let caption = caption_from_inventory(inventory)?;
    let entities = layout
        .objects
        .iter()
        .map(|o| GroundingEntity {
            phrase: o.class.phrase(),
            bbox: o.bbox.clamped_unit(),
        })
        .collect();
    Ok(GroundingSpec {
        caption,
        entities,
        inference_meta: InferenceMeta::default(),
    })
}
