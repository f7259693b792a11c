//! Two-stage table-setting layout generation.
//!
//! A planner (language model endpoint or seeded mock) proposes core layouts of
//! plates or place settings on a normalized canvas. The best candidate under a
//! heuristic score is completed by convention rules, then turned into
//! conditioning signals for layout-to-image models: a class-colored
//! segmentation map and a grounding spec of phrase/box pairs.

pub mod completer;
pub mod conditioner;
pub mod dsl;
pub mod error;
pub mod evaluator;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod planner;
pub mod scorer;

pub use error::{Error, Result};
pub use model::{BBox, Inventory, Layout, Mode, ObjectClass, PlacedObject, Provenance};
