//! Heuristic layout quality score and best-of-k selection.
//!
//! `S = alpha * S_count + beta * S_overlap + gamma * S_boundary`, with the
//! penalties carrying negative weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::precision_recall;
use crate::model::{BBox, Inventory, Layout};
use crate::planner::{Candidate, CandidateSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: -0.5,
            gamma: -0.3,
        }
    }
}

impl ScoreWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if ![alpha, beta, gamma].iter().all(|w| w.is_finite()) {
            return Err(Error::Eval("score weights must be finite".into()));
        }
        Ok(Self { alpha, beta, gamma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub s_count: f64,
    pub s_overlap: f64,
    pub s_boundary: f64,
    pub total: f64,
    pub total_pct: f64,
}

impl ScoreBreakdown {
    pub fn from_components(s_count: f64, s_overlap: f64, s_boundary: f64, w: &ScoreWeights) -> Self {
        let total = w.alpha * s_count + w.beta * s_overlap + w.gamma * s_boundary;
        Self {
            s_count,
            s_overlap,
            s_boundary,
            total,
            total_pct: total * 100.0,
        }
    }
}

fn on_canvas(b: &BBox) -> bool {
    b.inside_fraction(&BBox::unit()) > 0.0
}

/// Layout restricted to objects that touch the canvas with positive area.
fn visible(layout: &Layout) -> Layout {
    Layout {
        objects: layout
            .objects
            .iter()
            .filter(|o| on_canvas(&o.bbox))
            .cloned()
            .collect(),
        ..layout.clone()
    }
}

/// F1 of count precision and recall against `inventory`.
///
/// Only objects that overlap the canvas count; an object lying entirely off
/// the table is not part of the setting.
pub fn s_count(layout: &Layout, inventory: &Inventory) -> f64 {
    let Ok(report) = precision_recall(&visible(layout), inventory) else {
        return 0.0;
    };
    let (p, r) = (report.precision, report.recall);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Mean IoU over unordered pairs of non-table objects on the canvas.
pub fn s_overlap(layout: &Layout) -> f64 {
    let boxes: Vec<&BBox> = layout
        .objects
        .iter()
        .filter(|o| !o.class.is_table() && on_canvas(&o.bbox))
        .map(|o| &o.bbox)
        .collect();
    if boxes.len() < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, a) in boxes.iter().enumerate() {
        for b in &boxes[i + 1..] {
            sum += a.iou(b);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

/// Mean fraction of each object's area lying outside the unit canvas.
pub fn s_boundary(layout: &Layout) -> f64 {
    if layout.is_empty() {
        return 0.0;
    }
    let unit = BBox::unit();
    let sum: f64 = layout
        .objects
        .iter()
        .map(|o| 1.0 - o.bbox.inside_fraction(&unit))
        .sum();
    sum / layout.len() as f64
}

pub fn score(layout: &Layout, inventory: &Inventory, weights: &ScoreWeights) -> ScoreBreakdown {
    ScoreBreakdown::from_components(
        s_count(layout, inventory),
        s_overlap(layout),
        s_boundary(layout),
        weights,
    )
}

/// Highest total wins; equal totals go to the lowest candidate index.
pub fn select_best<'a>(
    candidates: &'a CandidateSet,
    inventory: &Inventory,
    weights: &ScoreWeights,
) -> Result<(&'a Candidate, ScoreBreakdown)> {
    let mut best: Option<(&Candidate, ScoreBreakdown)> = None;
    for cand in &candidates.candidates {
        let s = score(&cand.layout, inventory, weights);
        let better = match &best {
            None => true,
            Some((b, bs)) => s.total > bs.total || (s.total == bs.total && cand.index < b.index),
        };
        if better {
            best = Some((cand, s));
        }
    }
    best.ok_or(Error::NoCandidates)
}
