//! `tablelayout`: plan, complete and condition table-setting layouts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use tablelayout::completer::{complete_layout, CompletionConfig};
use tablelayout::conditioner::{export_grounding, render_segmentation, Palette};
use tablelayout::dsl::{build_prompt, PromptSpec};
use tablelayout::evaluator::{evaluate_suite, wilcoxon_signed_rank, SuiteCase};
use tablelayout::ingest::{ingest_dir, Crop, SynonymMap};
use tablelayout::pipeline::{run_bench, run_pipeline, PipelineConfig, ScoredCandidate};
use tablelayout::planner::{default_few_shot_examples, generate_candidates_with, Endpoint};
use tablelayout::scorer::{score, ScoreWeights};
use tablelayout::{Inventory, Layout, Mode};

#[derive(Parser)]
#[command(name = "tablelayout", version, about = "Table-setting layout generation and conditioning")]
struct Cli {
    /// Pipeline config file (JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline and write every artifact.
    Plan {
        #[arg(value_parser = parse_inventory)]
        inventory: Inventory,
        #[command(flatten)]
        planner: PlannerArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        render_size: Option<u32>,
        /// Record stage timings in report.json.
        #[arg(long)]
        timings: bool,
    },
    /// Print the few-shot prompt for an inventory.
    Prompt {
        #[arg(value_parser = parse_inventory)]
        inventory: Inventory,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Generate and score candidates without completing them.
    Candidates {
        #[arg(value_parser = parse_inventory)]
        inventory: Inventory,
        #[command(flatten)]
        planner: PlannerArgs,
        #[arg(long, default_value = "candidates")]
        out: PathBuf,
    },
    /// Complete a core layout against an inventory.
    Complete {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, value_parser = parse_inventory)]
        inventory: Inventory,
        /// Template and size table (JSON).
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a layout against an inventory.
    Score {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, value_parser = parse_inventory)]
        inventory: Inventory,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Precision/recall over a directory of `<name>.layout.json` and
    /// `<name>.inventory.json` pairs.
    Eval {
        dir: PathBuf,
        /// Second directory with the same case names; compares per-case recall.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Significance level for the signed-rank test.
        #[arg(long, default_value_t = 0.05)]
        significance: f64,
        /// Write `suite.csv` and `suite.json` here instead of printing CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Rasterize a layout into a class-colored PNG.
    Render {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 512)]
        size: u32,
        #[arg(long)]
        palette: Option<PathBuf>,
    },
    /// Export a layout as caption plus phrase/box grounding pairs.
    Ground {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, value_parser = parse_inventory)]
        inventory: Inventory,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert LabelMe annotations into layouts and a median size table.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// `WxH+X+Y` in pixels, or `full` for the whole image.
        #[arg(long)]
        crop: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        synonyms: Option<PathBuf>,
    },
    /// Precision/recall/score table over random inventories in every mode.
    Bench {
        #[arg(long, default_value_t = 50)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct PlannerArgs {
    /// `mock` or a chat-completions base URL.
    #[arg(long, value_parser = parse_endpoint)]
    endpoint: Option<Endpoint>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Number of candidates k.
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mock center perturbation, in canvas units.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    retries: Option<u32>,
    /// Request timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[command(flatten)]
    weights: WeightArgs,
}

#[derive(Args, Clone, Default)]
struct WeightArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
}

impl WeightArgs {
    fn apply(&self, w: &mut ScoreWeights) {
        if let Some(a) = self.alpha {
            w.alpha = a;
        }
        if let Some(b) = self.beta {
            w.beta = b;
        }
        if let Some(g) = self.gamma {
            w.gamma = g;
        }
    }
}

impl PlannerArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let p = &mut cfg.planner;
        if let Some(e) = &self.endpoint {
            p.endpoint = e.clone();
        }
        if let Some(m) = &self.model {
            p.model_name = m.clone();
        }
        if let Some(t) = self.temperature {
            p.temperature = t;
        }
        if let Some(k) = self.candidates {
            p.num_candidates = k;
        }
        if let Some(m) = self.mode {
            p.mode = m;
        }
        if let Some(s) = self.seed {
            p.seed = s;
        }
        if let Some(j) = self.jitter {
            p.jitter = j;
        }
        if let Some(r) = self.retries {
            p.retries = r;
        }
        if let Some(t) = self.timeout {
            p.request_timeout = t;
        }
        self.weights.apply(&mut cfg.weights);
    }
}

fn parse_inventory(s: &str) -> Result<Inventory, String> {
    s.parse().map_err(|e: tablelayout::Error| e.to_string())
}

fn parse_endpoint(s: &str) -> Result<Endpoint, String> {
    s.parse().map_err(|e: tablelayout::Error| e.to_string())
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn read_layout(path: &Path) -> anyhow::Result<Layout> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Layout::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Inventory file: JSON count map, or the text grammar.
fn read_inventory(path: &Path) -> anyhow::Result<Inventory> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    } else {
        Ok(text.parse().with_context(|| format!("parsing {}", path.display()))?)
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn load_cases(dir: &Path) -> anyhow::Result<Vec<SuiteCase>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()
                .and_then(|n| n.strip_suffix(".layout.json"))
                .map(str::to_string)
        })
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no *.layout.json files in {}", dir.display());
    }
    names
        .into_iter()
        .map(|name| {
            let layout = read_layout(&dir.join(format!("{name}.layout.json")))?;
            let inv = read_inventory(&dir.join(format!("{name}.inventory.json")))?;
            Ok(SuiteCase::new(name, layout, inv))
        })
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Plan {
            inventory,
            planner,
            out,
            render_size,
            timings,
        } => {
            planner.apply(&mut cfg);
            cfg.output_dir = out;
            if let Some(s) = render_size {
                cfg.render_size = s;
            }
            cfg.timings |= timings;
            match run_pipeline(&inventory, &cfg) {
                Ok(report) => {
                    println!("{}", serde_json::to_string_pretty(&report)?);
                    Ok(())
                }
                Err(e) => Err(StageFailure(e.to_json()).into()),
            }
        }
        Command::Prompt { inventory, mode } => {
            let mode = mode.unwrap_or(cfg.planner.mode);
            let spec = PromptSpec::new(default_few_shot_examples()?, inventory, mode);
            println!("{}", build_prompt(&spec)?);
            Ok(())
        }
        Command::Candidates {
            inventory,
            planner,
            out,
        } => {
            planner.apply(&mut cfg);
            cfg.validate()?;
            let mode = cfg.planner.mode;
            let spec = PromptSpec::new(default_few_shot_examples()?, inventory.clone(), mode);
            let set = generate_candidates_with(&inventory, &spec, &cfg.planner, &cfg.sizes, &cfg.template)?;
            fs::create_dir_all(&out)?;
            let core = inventory.core_for(mode);
            let mut summary = Vec::new();
            for c in &set.candidates {
                let scored = ScoredCandidate {
                    index: c.index,
                    score: score(&c.layout, &core, &cfg.weights),
                    layout: c.layout.clone(),
                };
                fs::write(
                    out.join(format!("candidate_{}.json", c.index)),
                    serde_json::to_string_pretty(&scored)?,
                )?;
                summary.push(serde_json::json!({"index": c.index, "total": scored.score.total}));
            }
            let failures: Vec<_> = set
                .failures
                .iter()
                .map(|(i, r)| serde_json::json!({"index": i, "error": r}))
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({"candidates": summary, "failures": failures}))?
            );
            Ok(())
        }
        Command::Complete {
            layout,
            inventory,
            rules,
            out,
        } => {
            let core = read_layout(&layout)?;
            let rules = match rules {
                Some(p) => CompletionConfig::load(&p)?,
                None => CompletionConfig {
                    template: cfg.template,
                    sizes: cfg.sizes,
                },
            };
            let done = complete_layout(&core, &inventory, &rules.template, &rules.sizes)?;
            emit(out.as_deref(), &done.to_json()?)
        }
        Command::Score {
            layout,
            inventory,
            weights,
        } => {
            weights.apply(&mut cfg.weights);
            let l = read_layout(&layout)?;
            let s = score(&l, &inventory, &cfg.weights);
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(())
        }
        Command::Eval {
            dir,
            baseline,
            significance,
            out,
            weights,
        } => {
            weights.apply(&mut cfg.weights);
            let suite = evaluate_suite(&load_cases(&dir)?, &cfg.weights)?;
            let comparison = match baseline {
                Some(b) => {
                    let base = evaluate_suite(&load_cases(&b)?, &cfg.weights)?;
                    let by_name: BTreeMap<&str, f64> = base
                        .cases
                        .iter()
                        .filter_map(|c| Some((c.name.as_str(), c.report.as_ref()?.recall)))
                        .collect();
                    let (a, b): (Vec<f64>, Vec<f64>) = suite
                        .cases
                        .iter()
                        .filter_map(|c| Some((c.report.as_ref()?.recall, *by_name.get(c.name.as_str())?)))
                        .unzip();
                    Some(wilcoxon_signed_rank(&a, &b, significance)?)
                }
                None => None,
            };
            let json = serde_json::json!({"suite": suite, "wilcoxon_recall": comparison});
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    fs::write(dir.join("suite.csv"), suite.to_csv()?)?;
                    fs::write(dir.join("suite.json"), serde_json::to_string_pretty(&json)?)?;
                }
                None => {
                    print!("{}", suite.to_csv()?);
                    if let Some(w) = comparison {
                        eprintln!("{}", serde_json::to_string(&w)?);
                    }
                }
            }
            Ok(())
        }
        Command::Render {
            layout,
            out,
            size,
            palette,
        } => {
            let palette = match palette {
                Some(p) => Palette::load(&p)?,
                None => cfg.palette,
            };
            let map = render_segmentation(&read_layout(&layout)?, size, &palette)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            map.write_png(&out)?;
            Ok(())
        }
        Command::Ground {
            layout,
            inventory,
            out,
        } => {
            let g = export_grounding(&read_layout(&layout)?, &inventory)?;
            emit(out.as_deref(), &g.to_json()?)
        }
        Command::Ingest {
            input,
            crop,
            out,
            synonyms,
        } => {
            let crop = Crop::parse_arg(&crop)?;
            let synonyms = match synonyms {
                Some(p) => SynonymMap::load(&p)?,
                None => SynonymMap::default(),
            };
            let summary = ingest_dir(&input, crop.as_ref(), &synonyms, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Bench { cases, seed, out } => {
            let report = run_bench(cases, seed, &cfg)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    fs::write(dir.join("bench.csv"), report.to_csv()?)?;
                    fs::write(dir.join("bench.json"), serde_json::to_string_pretty(&report)?)?;
                }
                None => print!("{}", report.to_csv()?),
            }
            Ok(())
        }
    }
}

/// Pipeline failure already rendered as `{stage, message}`.
#[derive(Debug)]
struct StageFailure(serde_json::Value);

impl std::fmt::Display for StageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for StageFailure {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.kind() == ErrorKind::InvalidSubcommand => {
            let names: Vec<String> = Cli::command()
                .get_subcommands()
                .map(|c| c.get_name().to_string())
                .collect();
            let _ = e.print();
            eprintln!("\nsubcommands: {}", names.join(", "));
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let json = match e.downcast_ref::<StageFailure>() {
                Some(StageFailure(v)) => v.clone(),
                None => serde_json::json!({"stage": "command", "message": format!("{e:#}")}),
            };
            eprintln!("{json}");
            ExitCode::from(1)
        }
    }
}
