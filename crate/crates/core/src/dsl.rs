//! CSS-like layout text exchanged with the language model, and few-shot prompt assembly.
//!
//! One statement per object:
//!
//! ```text
//! plate {width: 120px; height: 120px; left: 100px; top: 200px}
//! ```
//!
//! Pixel values refer to a square canvas of `canvas_px` pixels. Parsing is
//! tolerant: prose, code fences and malformed statements are skipped and
//! reported, never fatal.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use crate::conditioner::caption_from_inventory;
use crate::error::{Error, Result};
use crate::model::{
    round_half_up, BBox, Inventory, Layout, Mode, ObjectClass, PlacedObject, DEFAULT_CANVAS_PX,
};

static STATEMENT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?P<label>[A-Za-z][A-Za-z0-9_ \t-]*?)[ \t]*\{(?P<body>[^{}]*)\}").unwrap()
});

static VALUE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(-?\d+(?:\.\d+)?)\s*(?:px)?\s*$").unwrap());

pub fn default_system_instruction(canvas_px: u32) -> String {
    format!(
        "You are a layout planner for photographs of laid tables seen from above. \
         The canvas is {canvas_px}x{canvas_px} pixels with the origin in the top-left corner. \
         Write one line per object in the form \
         `<object> {{width: Wpx; height: Hpx; left: Xpx; top: Ypx}}` \
         and output nothing except those lines."
    )
}

/// Writes one statement per object, in layout order.
///
/// `left`/`top` are the rounded (half-up) min corner; `width`/`height` are the
/// difference of the rounded corners, so every corner stays within half a pixel.
pub fn serialize_layout(layout: &Layout, canvas_px: u32) -> String {
    let c = canvas_px as f64;
    layout
        .objects
        .iter()
        .map(|o| {
            let b = &o.bbox;
            let left = round_half_up(b.x_min() * c);
            let top = round_half_up(b.y_min() * c);
            let right = round_half_up(b.x_max() * c);
            let bottom = round_half_up(b.y_max() * c);
            format!(
                "{} {{width: {}px; height: {}px; left: {}px; top: {}px}}",
                o.class,
                right - left,
                bottom - top,
                left,
                top
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseReport {
    pub layout: Layout,
    pub skipped_lines: Vec<SkippedLine>,
}

fn resolve_label(raw: &str) -> Option<ObjectClass> {
    let words: Vec<&str> = raw.split_whitespace().collect();
    if words.is_empty() {
        return None;
    }
    // Prefer the longest known suffix so "Here: large serving bowl" still resolves.
    for start in 0..words.len() {
        let cand = words[start..].join("_");
        if let Ok(class) = ObjectClass::resolve(&cand, false) {
            let is_known = class.is_canonical() || class.is_place_setting();
            if is_known {
                return Some(class);
            }
        }
    }
    ObjectClass::new(&words.join("_")).ok()
}

fn parse_body(body: &str) -> std::result::Result<[f64; 4], String> {
    let mut props: [Option<f64>; 4] = [None; 4];
    for decl in body.split(';') {
        let decl = decl.trim();
        if decl.is_empty() {
            continue;
        }
        let Some((key, value)) = decl.split_once(':') else {
            return Err(format!("malformed property {decl:?}"));
        };
        let slot = match key.trim().to_ascii_lowercase().as_str() {
            "width" => 0,
            "height" => 1,
            "left" => 2,
            "top" => 3,
            _ => continue,
        };
        let caps = VALUE
            .captures(value)
            .ok_or_else(|| format!("invalid value {:?} for {}", value.trim(), key.trim()))?;
        let v: f64 = caps[1]
            .parse()
            .map_err(|_| format!("invalid value {:?}", value.trim()))?;
        props[slot] = Some(v);
    }
    match props {
        [Some(w), Some(h), Some(l), Some(t)] => Ok([w, h, l, t]),
        _ => Err("missing property".to_string()),
    }
}

/// Parses model output into a layout. Every object gets provenance `Generated`.
pub fn parse_layout_text(text: &str, canvas_px: u32) -> ParseReport {
    let c = canvas_px.max(1) as f64;
    let line_starts: Vec<usize> = std::iter::once(0)
        .chain(text.match_indices('\n').map(|(i, _)| i + 1))
        .collect();
    let line_of = |offset: usize| line_starts.partition_point(|&s| s <= offset);

    let mut layout = Layout {
        canvas_px,
        source_tag: String::new(),
        objects: Vec::new(),
    };
    let mut skipped = Vec::new();
    let mut covered = HashSet::new();

    for caps in STATEMENT.captures_iter(text) {
        let whole = caps.get(0).unwrap();
        let first = line_of(whole.start());
        let last = line_of(whole.end().saturating_sub(1).max(whole.start()));
        covered.extend(first..=last);

        let Some(class) = resolve_label(&caps["label"]) else {
            skipped.push(SkippedLine {
                line: first,
                reason: "missing class label".into(),
            });
            continue;
        };
        let [w, h, left, top] = match parse_body(&caps["body"]) {
            Ok(v) => v,
            Err(reason) => {
                skipped.push(SkippedLine { line: first, reason });
                continue;
            }
        };
        match BBox::new(left / c, top / c, (left + w) / c, (top + h) / c) {
            Ok(bbox) => layout.objects.push(PlacedObject::generated(class, bbox)),
            Err(_) => skipped.push(SkippedLine {
                line: first,
                reason: "degenerate box".into(),
            }),
        }
    }

    for (idx, line) in text.split('\n').enumerate() {
        let n = idx + 1;
        if covered.contains(&n) || line.trim().is_empty() {
            continue;
        }
        let reason = if line.contains('{') {
            "unterminated statement"
        } else {
            "no statement"
        };
        skipped.push(SkippedLine {
            line: n,
            reason: reason.into(),
        });
    }
    skipped.sort_by_key(|s| s.line);

    ParseReport {
        layout,
        skipped_lines: skipped,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub system_instruction: String,
    pub examples: Vec<(Inventory, Layout)>,
    pub query: Inventory,
    pub mode: Mode,
    pub dsl_canvas_px: u32,
}

impl PromptSpec {
    pub fn new(examples: Vec<(Inventory, Layout)>, query: Inventory, mode: Mode) -> Self {
        Self {
            system_instruction: default_system_instruction(DEFAULT_CANVAS_PX),
            examples,
            query,
            mode,
            dsl_canvas_px: DEFAULT_CANVAS_PX,
        }
    }
}

/// The system part and the user part of a prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptMessages {
    pub system: String,
    pub user: String,
}

/// Request sentence for `inventory` in `mode`.
pub fn query_sentence(inventory: &Inventory, mode: Mode) -> Result<String> {
    match mode {
        Mode::Full => caption_from_inventory(inventory),
        Mode::PlatesOnly | Mode::PlaceSettingsOnly => {
            let n = inventory.plates();
            if n == 0 {
                return Err(Error::InvalidPrompt(format!(
                    "{mode} query needs a plate entry in the inventory"
                )));
            }
            let what = if mode == Mode::PlatesOnly {
                "plates"
            } else {
                "place settings"
            };
            Ok(format!("Generate a layout for {n} {what} on a table."))
        }
    }
}

/// Collapses each plate and the per-setting items nearest to it into one
/// `place_setting` box. Tables are kept; everything else is dropped.
pub fn place_setting_view(layout: &Layout) -> Layout {
    const SETTING_ITEMS: [&str; 6] = ["fork", "knife", "spoon", "bowl", "glass", "cup"];
    let plates: Vec<&PlacedObject> = layout.objects.iter().filter(|o| o.class.is_plate()).collect();
    let mut boxes: Vec<BBox> = plates.iter().map(|p| p.bbox).collect();
    for o in &layout.objects {
        if !SETTING_ITEMS.contains(&o.class.as_str()) || plates.is_empty() {
            continue;
        }
        let (cx, cy) = o.bbox.center();
        let nearest = plates
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (px, py) = p.bbox.center();
                (i, (px - cx).powi(2) + (py - cy).powi(2))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap();
        boxes[nearest] = boxes[nearest].union(&o.bbox);
    }
    let mut out = Layout {
        canvas_px: layout.canvas_px,
        source_tag: layout.source_tag.clone(),
        objects: layout
            .objects
            .iter()
            .filter(|o| o.class.is_table())
            .cloned()
            .collect(),
    };
    out.objects.extend(
        boxes
            .into_iter()
            .map(|b| PlacedObject::generated(ObjectClass::place_setting(), b)),
    );
    out
}

fn example_block(inventory: &Inventory, layout: &Layout, mode: Mode, canvas_px: u32) -> Result<String> {
    let (header, shown) = match mode {
        Mode::Full => (query_sentence(inventory, mode)?, layout.clone()),
        Mode::PlatesOnly => {
            let shown = Layout {
                objects: layout
                    .objects
                    .iter()
                    .filter(|o| o.class.is_plate() || o.class.is_table())
                    .cloned()
                    .collect(),
                ..layout.clone()
            };
            (query_sentence(&Inventory::from_layout(&shown), mode)?, shown)
        }
        Mode::PlaceSettingsOnly => {
            let shown = place_setting_view(layout);
            let n = shown.count_of(&ObjectClass::place_setting());
            let inv = Inventory::from_counts([(ObjectClass::plate(), n)])?;
            (query_sentence(&inv, mode)?, shown)
        }
    };
    Ok(format!("{header}\n{}", serialize_layout(&shown, canvas_px)))
}

/// Builds the system and user messages; `build_prompt` joins them.
pub fn prompt_messages(spec: &PromptSpec) -> Result<PromptMessages> {
    if spec.examples.is_empty() {
        return Err(Error::InvalidPrompt("at least one in-context example is required".into()));
    }
    if spec.query.is_empty() {
        return Err(Error::InvalidPrompt("query inventory is empty".into()));
    }
    if spec.dsl_canvas_px == 0 {
        return Err(Error::InvalidPrompt("canvas size must be positive".into()));
    }
    let mut blocks = Vec::with_capacity(spec.examples.len() + 1);
    for (inv, layout) in &spec.examples {
        blocks.push(example_block(inv, layout, spec.mode, spec.dsl_canvas_px)?);
    }
    blocks.push(query_sentence(&spec.query, spec.mode)?);
    Ok(PromptMessages {
        system: spec.system_instruction.clone(),
        user: blocks.join("\n\n"),
    })
}

/// System instruction, the example blocks, then the query sentence, separated by blank lines.
pub fn build_prompt(spec: &PromptSpec) -> Result<String> {
    let m = prompt_messages(spec)?;
    Ok(format!("{}\n\n{}", m.system, m.user))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plate_at(x0: f64, y0: f64, x1: f64, y1: f64) -> PlacedObject {
        PlacedObject::generated(ObjectClass::plate(), BBox::new(x0, y0, x1, y1).unwrap())
    }

    #[test]
    fn serialize_worked_example() {
        let l = Layout::with_objects(
            "t",
            vec![plate_at(100.0 / 512.0, 200.0 / 512.0, 220.0 / 512.0, 320.0 / 512.0)],
        );
        assert_eq!(
            serialize_layout(&l, 512),
            "plate {width: 120px; height: 120px; left: 100px; top: 200px}"
        );
        assert_eq!(serialize_layout(&Layout::default(), 512), "");
    }

    #[test]
    fn serialize_keeps_order() {
        let mut l = Layout::default();
        l.push(plate_at(0.0, 0.0, 0.1, 0.1));
        l.push(PlacedObject::generated(
            ObjectClass::new("large_serving_bowl").unwrap(),
            BBox::new(0.4, 0.4, 0.6, 0.6).unwrap(),
        ));
        let text = serialize_layout(&l, 512);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("plate {"));
        assert!(lines[1].starts_with("large_serving_bowl {"));
    }

    #[test]
    fn parse_round_trip_example() {
        let r = parse_layout_text(
            "plate {width: 120px; height: 120px; left: 100px; top: 200px}",
            512,
        );
        assert!(r.skipped_lines.is_empty());
        let b = r.layout.objects[0].bbox;
        assert_eq!(b.to_array(), [100.0 / 512.0, 200.0 / 512.0, 220.0 / 512.0, 320.0 / 512.0]);
    }

    #[test]
    fn missing_property_is_skipped() {
        let r = parse_layout_text("plate {width: 120px; left: 100px}", 512);
        assert!(r.layout.is_empty());
        assert_eq!(
            r.skipped_lines,
            vec![SkippedLine {
                line: 1,
                reason: "missing property".into()
            }]
        );
    }

    #[test]
    fn prose_preamble_is_skipped() {
        let r = parse_layout_text(
            "Sure! Here is the layout:\nplate {width: 120px; height: 120px; left: 0px; top: 0px}",
            512,
        );
        assert_eq!(r.layout.len(), 1);
        assert_eq!(r.skipped_lines.len(), 1);
        assert_eq!(r.skipped_lines[0].line, 1);
    }

    #[test]
    fn tolerant_forms() {
        let text = "```css\n1. Plate {top: 10px; left: 20px; height: 30px; width: 40px;}\n\
                    - large serving bowl { width:100px;height:100px;left:200px;top:200px }\n\
                    knife {width: 10px; height: 0px; left: 1px; top: 1px}\n\
                    fork {width: ten; height: 5px; left: 1px; top: 1px}\n\
                    napkin {width: 10px; height: 10px; left: -5px; top: 600px}\n\
                    glass {width: 10px;\n  height: 10px; left: 5px; top: 5px}\n\
                    spoon {width: 10px\n```";
        let r = parse_layout_text(text, 512);
        let classes: Vec<&str> = r.layout.objects.iter().map(|o| o.class.as_str()).collect();
        assert_eq!(classes, ["plate", "large_serving_bowl", "napkin", "glass"]);
        assert_eq!(r.layout.objects[0].bbox.to_array()[0], 20.0 / 512.0);
        // out of canvas survives parsing
        assert!(r.layout.objects[2].bbox.x_min() < 0.0);
        assert!(r.layout.objects[2].bbox.y_min() > 1.0);
        let reasons: Vec<(usize, &str)> = r
            .skipped_lines
            .iter()
            .map(|s| (s.line, s.reason.as_str()))
            .collect();
        assert_eq!(reasons[0], (1, "no statement"));
        assert_eq!(reasons[1], (4, "degenerate box"));
        assert_eq!(reasons[2].0, 5);
        assert!(reasons[2].1.starts_with("invalid value"));
        assert_eq!(reasons[3], (9, "unterminated statement"));
        assert_eq!(reasons[4], (10, "no statement"));
    }

    fn example(n_plates: usize) -> (Inventory, Layout) {
        let mut l = Layout::default();
        l.push(PlacedObject::generated(
            ObjectClass::table(),
            BBox::new(0.02, 0.02, 0.98, 0.98).unwrap(),
        ));
        for i in 0..n_plates {
            let x = 0.1 + 0.2 * i as f64;
            l.push(plate_at(x, 0.1, x + 0.15, 0.25));
            l.push(PlacedObject::generated(
                ObjectClass::new("fork").unwrap(),
                BBox::new(x - 0.04, 0.1, x - 0.01, 0.25).unwrap(),
            ));
        }
        (Inventory::from_layout(&l), l)
    }

    #[test]
    fn plates_only_prompt() {
        let spec = PromptSpec::new(
            vec![example(2), example(4)],
            "4 plates".parse().unwrap(),
            Mode::PlatesOnly,
        );
        let p = build_prompt(&spec).unwrap();
        assert!(p.ends_with("Generate a layout for 4 plates on a table."));
        assert!(p.starts_with(&spec.system_instruction));
        assert!(p.contains("Generate a layout for 2 plates on a table.\ntable {"));
        assert!(!p.contains("fork {"));
    }

    #[test]
    fn place_settings_prompt() {
        let spec = PromptSpec::new(vec![example(3)], "3 plates, 3 forks".parse().unwrap(), Mode::PlaceSettingsOnly);
        let p = build_prompt(&spec).unwrap();
        assert!(p.ends_with("Generate a layout for 3 place settings on a table."));
        assert_eq!(p.matches("place_setting {").count(), 3);
        assert!(!p.contains("\nplate {"));
    }

    #[test]
    fn prompt_errors() {
        let full = PromptSpec::new(vec![], "2 plates".parse().unwrap(), Mode::Full);
        assert!(build_prompt(&full).is_err());
        let no_plate = PromptSpec::new(vec![example(2)], "2 forks".parse().unwrap(), Mode::PlatesOnly);
        assert!(matches!(build_prompt(&no_plate), Err(Error::InvalidPrompt(_))));
    }

    #[test]
    fn full_prompt_has_every_example_in_order() {
        let examples: Vec<_> = (0..16).map(|i| example(1 + i % 4)).collect();
        let spec = PromptSpec::new(examples, "2 plates, 2 forks".parse().unwrap(), Mode::Full);
        let p = build_prompt(&spec).unwrap();
        assert_eq!(p.matches("A laid table. On the table are ").count(), 17);
        let headers: Vec<&str> = p
            .lines()
            .filter(|l| l.starts_with("A laid table."))
            .collect();
        for (i, h) in headers.iter().take(16).enumerate() {
            let n = 1 + i % 4;
            let plural = if n > 1 { "s" } else { "" };
            assert_eq!(
                *h,
                format!("A laid table. On the table are {n} plate{plural}, {n} fork{plural}.")
            );
        }
        assert!(p.ends_with("A laid table. On the table are 2 plates, 2 forks."));
        assert_eq!(build_prompt(&spec).unwrap(), p);
    }
}
