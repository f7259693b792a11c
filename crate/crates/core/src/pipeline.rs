//! End-to-end run: prompt, candidates, selection, completion, conditioning.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::completer::{complete_layout, MedianSizeTable, PlaceSettingTemplate};
use crate::conditioner::{caption_from_inventory, export_grounding, render_segmentation, Palette, DEFAULT_RENDER_PX, MIN_RENDER_PX};
use crate::dsl::{build_prompt, PromptSpec};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate_suite, precision_recall, EvalReport, SuiteCase, SuiteReport};
use crate::model::{Inventory, Layout, Mode};
use crate::planner::{default_few_shot_examples, generate_candidates_with, CandidateSet, PlannerConfig};
use crate::scorer::{score, select_best, ScoreBreakdown, ScoreWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub planner: PlannerConfig,
    pub weights: ScoreWeights,
    pub template: PlaceSettingTemplate,
    pub sizes: MedianSizeTable,
    pub palette: Palette,
    pub render_size: u32,
    pub output_dir: PathBuf,
    /// Adds wall-clock stage timings to report.json, which makes reruns differ.
    pub timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            weights: ScoreWeights::default(),
            template: PlaceSettingTemplate::default(),
            sizes: MedianSizeTable::default(),
            palette: Palette::default(),
            render_size: DEFAULT_RENDER_PX,
            output_dir: PathBuf::from("out"),
            timings: false,
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON config; a partial `sizes` table is layered over the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.sizes = MedianSizeTable::default().merged_with(&cfg.sizes);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        ScoreWeights::new(self.weights.alpha, self.weights.beta, self.weights.gamma)?;
        self.sizes.validate()?;
        self.template.validate(&self.sizes)?;
        if self.render_size < MIN_RENDER_PX {
            return Err(Error::Render(format!(
                "render size must be at least {MIN_RENDER_PX}, got {}",
                self.render_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Prompt,
    Plan,
    Select,
    Complete,
    Render,
    Ground,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum");
        f.write_str(s.as_str().unwrap_or("unknown"))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({"stage": self.stage, "message": self.source.to_string()})
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub index: usize,
    pub score: ScoreBreakdown,
    pub layout: Layout,
}

/// In-memory result of planning, selection and completion.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub prompt: String,
    pub core_inventory: Inventory,
    pub scored: Vec<ScoredCandidate>,
    pub failures: Vec<(usize, String)>,
    pub selected_index: usize,
    pub selected_score: ScoreBreakdown,
    pub completed: Layout,
}

impl PlanOutcome {
    pub fn selected(&self) -> &ScoredCandidate {
        self.scored
            .iter()
            .find(|c| c.index == self.selected_index)
            .expect("selected candidate is scored")
    }

    /// Score of the lowest-index candidate.
    pub fn first_score(&self) -> Option<&ScoreBreakdown> {
        self.scored.first().map(|c| &c.score)
    }
}

/// Prompt, k candidates scored against the core inventory, best pick, completion.
pub fn plan_layout(
    inventory: &Inventory,
    cfg: &PipelineConfig,
    examples: &[(Inventory, Layout)],
) -> std::result::Result<PlanOutcome, StageError> {
    let mode = cfg.planner.mode;
    let spec = PromptSpec::new(examples.to_vec(), inventory.clone(), mode);
    let prompt = build_prompt(&spec).at(Stage::Prompt)?;
    let set: CandidateSet =
        generate_candidates_with(inventory, &spec, &cfg.planner, &cfg.sizes, &cfg.template).at(Stage::Plan)?;
    let core = inventory.core_for(mode);
    let (best_index, selected_score) = {
        let (best, s) = select_best(&set, &core, &cfg.weights).at(Stage::Select)?;
        (best.index, s)
    };
    let scored: Vec<ScoredCandidate> = set
        .candidates
        .iter()
        .map(|c| ScoredCandidate {
            index: c.index,
            score: score(&c.layout, &core, &cfg.weights),
            layout: c.layout.clone(),
        })
        .collect();
    let selected = &set
        .candidates
        .iter()
        .find(|c| c.index == best_index)
        .expect("selected comes from the set")
        .layout;
    let mut completed = complete_layout(selected, inventory, &cfg.template, &cfg.sizes).at(Stage::Complete)?;
    completed.source_tag = format!("completed-{best_index}");
    Ok(PlanOutcome {
        prompt,
        core_inventory: core,
        scored,
        failures: set.failures,
        selected_index: best_index,
        selected_score,
        completed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub index: usize,
    pub score: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    /// Prompt, candidates, selection and completion.
    pub plan_ms: f64,
    pub render_ms: f64,
    pub ground_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub inventory: Inventory,
    pub mode: Mode,
    pub endpoint: String,
    pub seed: u64,
    pub candidates: Vec<CandidateSummary>,
    pub failures: Vec<(usize, String)>,
    pub selected_index: usize,
    pub selected_score: ScoreBreakdown,
    pub completed_score: ScoreBreakdown,
    pub precision: f64,
    pub recall: f64,
    pub eval: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub const ERROR_FILE: &str = "error.json";

/// Runs every stage and writes the artifacts under `cfg.output_dir`.
///
/// On failure `error.json` records the stage and message next to whatever the
/// finished stages already wrote.
pub fn run_pipeline(inventory: &Inventory, cfg: &PipelineConfig) -> std::result::Result<PipelineReport, StageError> {
    let out = cfg.output_dir.clone();
    let result = run_stages(inventory, cfg, &out);
    if let Err(e) = &result {
        if fs::create_dir_all(&out).is_ok() {
            let _ = write_json(&out.join(ERROR_FILE), &e.to_json());
        }
    }
    result
}

fn run_stages(inventory: &Inventory, cfg: &PipelineConfig, out: &Path) -> std::result::Result<PipelineReport, StageError> {
    cfg.validate().at(Stage::Config)?;
    if inventory.is_empty() {
        return Err(Error::InvalidInventory("inventory is empty".into())).at(Stage::Config);
    }
    let cand_dir = out.join("candidates");
    fs::create_dir_all(&cand_dir).map_err(Error::from).at(Stage::Config)?;
    let _ = fs::remove_file(out.join(ERROR_FILE));

    let t0 = Instant::now();
    let examples = default_few_shot_examples().at(Stage::Prompt)?;
    let plan = plan_layout(inventory, cfg, &examples);
    let plan_ms = t0.elapsed().as_secs_f64() * 1e3;
    let plan = plan?;
    fs::write(out.join("prompt.txt"), &plan.prompt).map_err(Error::from).at(Stage::Prompt)?;
    for c in &plan.scored {
        write_json(&cand_dir.join(format!("candidate_{}.json", c.index)), c).at(Stage::Plan)?;
    }
    for (index, reason) in &plan.failures {
        write_json(
            &cand_dir.join(format!("candidate_{index}.json")),
            &serde_json::json!({"index": index, "error": reason}),
        )
        .at(Stage::Plan)?;
    }
    write_json(&out.join("selected.json"), &plan.selected().layout).at(Stage::Select)?;
    write_json(&out.join("completed.json"), &plan.completed).at(Stage::Complete)?;

    let t1 = Instant::now();
    render_segmentation(&plan.completed, cfg.render_size, &cfg.palette)
        .and_then(|m| m.write_png(&out.join("segmentation.png")))
        .at(Stage::Render)?;
    let render_ms = t1.elapsed().as_secs_f64() * 1e3;

    let t2 = Instant::now();
    let grounding = export_grounding(&plan.completed, inventory).at(Stage::Ground)?;
    write_json(&out.join("grounding.json"), &grounding).at(Stage::Ground)?;
    let caption = caption_from_inventory(inventory).at(Stage::Ground)?;
    fs::write(out.join("caption.txt"), format!("{caption}\n"))
        .map_err(Error::from)
        .at(Stage::Ground)?;
    let ground_ms = t2.elapsed().as_secs_f64() * 1e3;

    let eval = precision_recall(&plan.completed, inventory).at(Stage::Report)?;
    let report = PipelineReport {
        inventory: inventory.clone(),
        mode: cfg.planner.mode,
        endpoint: cfg.planner.endpoint.to_string(),
        seed: cfg.planner.seed,
        candidates: plan
            .scored
            .iter()
            .map(|c| CandidateSummary {
                index: c.index,
                score: c.score,
            })
            .collect(),
        failures: plan.failures.clone(),
        selected_index: plan.selected_index,
        selected_score: plan.selected_score,
        completed_score: score(&plan.completed, inventory, &cfg.weights),
        precision: eval.precision,
        recall: eval.recall,
        eval,
        timings: cfg.timings.then_some(StageTimings {
            plan_ms,
            render_ms,
            ground_ms,
        }),
    };
    write_json(&out.join("report.json"), &report).at(Stage::Report)?;
    Ok(report)
}

/// Random two- and four-person table inventories.
pub fn random_inventories(count: usize, seed: u64) -> Result<Vec<Inventory>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n: u32 = if rng.random_bool(0.5) { 2 } else { 4 };
            let mut inv = Inventory::from_counts([("plate", n), ("fork", n), ("knife", n)])?;
            if rng.random_bool(0.7) {
                inv.add("spoon".parse()?, n)?;
            }
            let glasses = if rng.random_bool(0.5) { n } else { 2 * n };
            inv.add("glass".parse()?, glasses)?;
            if rng.random_bool(0.4) {
                inv.add("bowl".parse()?, n)?;
            }
            if rng.random_bool(0.3) {
                inv.add("large_serving_bowl".parse()?, 1)?;
            }
            Ok(inv)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub approach: Mode,
    pub precision_pct: f64,
    pub recall_pct: f64,
    pub score_pct: f64,
    /// Mean score of the first candidate before best-of-k selection.
    pub first_candidate_score_pct: f64,
    pub selected_candidate_score_pct: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub cases: usize,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
    #[serde(skip)]
    pub suites: Vec<SuiteReport>,
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "approach",
            "precision_pct",
            "recall_pct",
            "score_pct",
            "first_candidate_score_pct",
            "selected_candidate_score_pct",
            "failed",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.approach.to_string(),
                format!("{:.1}", r.precision_pct),
                format!("{:.1}", r.recall_pct),
                format!("{:.1}", r.score_pct),
                format!("{:.1}", r.first_candidate_score_pct),
                format!("{:.1}", r.selected_candidate_score_pct),
                r.failed.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Runs the planner in every mode over `cases` random inventories and
/// evaluates the completed layouts; one row per mode.
pub fn run_bench(cases: usize, seed: u64, base: &PipelineConfig) -> Result<BenchReport> {
    if cases == 0 {
        return Err(Error::Eval("bench needs at least one case".into()));
    }
    let inventories = random_inventories(cases, seed)?;
    let examples = default_few_shot_examples()?;
    let mut rows = Vec::new();
    let mut suites = Vec::new();
    for mode in [Mode::Full, Mode::PlatesOnly, Mode::PlaceSettingsOnly] {
        let mut suite_cases = Vec::with_capacity(cases);
        let (mut first, mut selected, mut planned) = (0.0, 0.0, 0usize);
        let mut failed = 0;
        for (i, inv) in inventories.iter().enumerate() {
            let mut cfg = base.clone();
            cfg.planner.mode = mode;
            cfg.planner.seed = seed.wrapping_add(1000 * i as u64);
            match plan_layout(inv, &cfg, &examples) {
                Ok(p) => {
                    first += p.first_score().map_or(0.0, |s| s.total);
                    selected += p.selected_score.total;
                    planned += 1;
                    suite_cases.push(SuiteCase::new(format!("case-{i}"), p.completed, inv.clone()));
                }
                Err(e) => {
                    log::warn!("bench case {i} ({mode}): {e}");
                    failed += 1;
                    suite_cases.push(SuiteCase::new(format!("case-{i}"), Layout::default(), inv.clone()));
                }
            }
        }
        let suite = evaluate_suite(&suite_cases, &base.weights)?;
        let denom = planned.max(1) as f64;
        rows.push(BenchRow {
            approach: mode,
            precision_pct: suite.mean_precision * 100.0,
            recall_pct: suite.mean_recall * 100.0,
            score_pct: suite.mean_score * 100.0,
            first_candidate_score_pct: first / denom * 100.0,
            selected_candidate_score_pct: selected / denom * 100.0,
            failed,
        });
        suites.push(suite);
    }
    Ok(BenchReport {
        cases,
        seed,
        rows,
        suites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObjectClass;

    fn sample_inventory() -> Inventory {
        "4 plates, 4 forks, 4 knives, 4 spoons, 4 glasses, 1 large bowl".parse().unwrap()
    }

    #[test]
    fn plan_layout_completes_exactly() {
        let inv = sample_inventory();
        let examples = default_few_shot_examples().unwrap();
        for mode in [Mode::Full, Mode::PlatesOnly, Mode::PlaceSettingsOnly] {
            let mut cfg = PipelineConfig::default();
            cfg.planner.mode = mode;
            cfg.planner.seed = 7;
            let p = plan_layout(&inv, &cfg, &examples).unwrap();
            assert_eq!(p.scored.len(), 5);
            let r = precision_recall(&p.completed, &inv).unwrap();
            assert_eq!((r.precision, r.recall), (1.0, 1.0), "{mode}");
            assert!(p.scored.iter().all(|c| c.score.total <= p.selected_score.total));
        }
    }

    #[test]
    fn pipeline_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig {
            output_dir: dir.path().join("run"),
            ..PipelineConfig::default()
        };
        cfg.planner.seed = 7;
        let inv = sample_inventory();
        let report = run_pipeline(&inv, &cfg).unwrap();
        assert_eq!(report.recall, 1.0);
        for f in [
            "selected.json",
            "completed.json",
            "segmentation.png",
            "grounding.json",
            "caption.txt",
            "report.json",
            "candidates/candidate_0.json",
            "candidates/candidate_4.json",
        ] {
            assert!(cfg.output_dir.join(f).is_file(), "{f}");
        }
        let completed = Layout::from_json(&fs::read_to_string(cfg.output_dir.join("completed.json")).unwrap()).unwrap();
        for (class, n) in inv.iter() {
            assert_eq!(completed.count_of(class), n);
        }
        assert!(!cfg.output_dir.join(ERROR_FILE).exists());
    }

    #[test]
    fn stage_failure_writes_error_json() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            output_dir: dir.path().to_path_buf(),
            ..PipelineConfig::default()
        };
        // the mock seats at most eight diners
        let inv = Inventory::from_counts([("plate", 12)]).unwrap();
        let err = run_pipeline(&inv, &cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Plan);
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(ERROR_FILE)).unwrap()).unwrap();
        assert_eq!(v["stage"], "plan");
        assert!(v["message"].as_str().unwrap().contains("mock"));
    }

    #[test]
    fn config_file_layers_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.json");
        fs::write(
            &p,
            r#"{"planner": {"num_candidates": 3, "seed": 4}, "sizes": {"plate": [0.2, 0.2]}, "render_size": 256}"#,
        )
        .unwrap();
        let cfg = PipelineConfig::load(&p).unwrap();
        assert_eq!(cfg.planner.num_candidates, 3);
        assert_eq!(cfg.sizes.get(&ObjectClass::plate()).unwrap(), (0.2, 0.2));
        assert!(cfg.sizes.get(&"fork".parse().unwrap()).is_ok());
        fs::write(&p, r#"{"render_size": 8}"#).unwrap();
        assert!(PipelineConfig::load(&p).is_err());
    }

    #[test]
    fn bench_rows() {
        let b = run_bench(6, 3, &PipelineConfig::default()).unwrap();
        assert_eq!(b.rows.len(), 3);
        for r in &b.rows {
            assert_eq!(r.recall_pct, 100.0);
            assert_eq!(r.failed, 0);
            assert!(r.selected_candidate_score_pct >= r.first_candidate_score_pct);
        }
        assert!(b.to_csv().unwrap().starts_with("approach,"));
    }
}
