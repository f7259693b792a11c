use crate::model::ObjectClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid box [{0}, {1}, {2}, {3}]: {4}")]
    InvalidBox(f64, f64, f64, f64, &'static str),

    #[error("invalid object class label {0:?}")]
    InvalidClass(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid inventory: {0}")]
    InvalidInventory(String),

    #[error("invalid prompt spec: {0}")]
    InvalidPrompt(String),

    #[error("planner configuration: {0}")]
    PlannerConfig(String),

    #[error("mock planner: {0}")]
    Mock(String),

    #[error("no median size entry for class {0}")]
    MissingSize(ObjectClass),

    #[error("core layout already holds {present} {class} but the inventory requires {required}")]
    Overfull {
        class: ObjectClass,
        required: u32,
        present: u32,
    },

    #[error("completion: {0}")]
    Completion(String),

    #[error("no candidates to select from")]
    NoCandidates,

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("signed-rank test: {0}")]
    Stats(String),

    #[error("render: {0}")]
    Render(String),

    #[error("no palette color for class {0}")]
    MissingColor(ObjectClass),

    #[error("ingest: {0}")]
    Ingest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("png encoding: {0}")]
    Png(#[from] png::EncodingError),
}
