//! Candidate layouts from a chat-completions endpoint or from the seeded mock.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::completer::{
    as_generated, complete_layout, edge_slots, oriented_box, MedianSizeTable, PlaceSettingTemplate,
    TABLE_BOX,
};
use crate::dsl::{parse_layout_text, prompt_messages, serialize_layout, PromptMessages, PromptSpec};
use crate::error::{Error, Result};
use crate::model::{BBox, Inventory, Layout, Mode, ObjectClass, PlacedObject};

pub const API_KEY_VAR: &str = "LAYOUT_LLM_API_KEY";
pub const MAX_MOCK_DINERS: u32 = 8;

/// Where completions come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Endpoint {
    Mock,
    Http(String),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Mock => f.write_str("mock"),
            Endpoint::Http(u) => f.write_str(u),
        }
    }
}

impl FromStr for Endpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("mock") {
            return Ok(Endpoint::Mock);
        }
        let url = url::Url::parse(s).map_err(|e| Error::PlannerConfig(format!("bad endpoint URL {s:?}: {e}")))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(Error::PlannerConfig(format!(
                "endpoint URL must be http or https, got {s:?}"
            )));
        }
        Ok(Endpoint::Http(s.to_string()))
    }
}

impl TryFrom<String> for Endpoint {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub temperature: f64,
    pub num_candidates: usize,
    pub mode: Mode,
    pub endpoint: Endpoint,
    pub model_name: String,
    /// Seconds.
    pub request_timeout: f64,
    pub seed: u64,
    pub jitter: f64,
    /// Extra attempts per candidate after a transport failure.
    pub retries: u32,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            num_candidates: 5,
            mode: Mode::PlatesOnly,
            endpoint: Endpoint::Mock,
            model_name: "gpt-3.5-turbo".into(),
            request_timeout: 60.0,
            seed: 0,
            jitter: 0.03,
            retries: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_candidates == 0 {
            return Err(Error::PlannerConfig("num_candidates must be at least 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::PlannerConfig(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::PlannerConfig(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        if !(self.request_timeout.is_finite() && self.request_timeout > 0.0) {
            return Err(Error::PlannerConfig(format!(
                "request_timeout must be > 0, got {}",
                self.request_timeout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub layout: Layout,
}

/// Parsed candidates and per-index failures; together they cover `0..k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub failures: Vec<(usize, String)>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len() + self.failures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One completion per call; `Err` carries a transport-level reason.
pub trait CompletionBackend: Sync {
    fn complete(&self, index: usize, messages: &PromptMessages) -> std::result::Result<String, String>;
}

/// Answers candidate `i` with the DSL text of `mock_plan(seed + i)`.
pub struct MockBackend {
    inventory: Inventory,
    mode: Mode,
    seed: u64,
    jitter: f64,
    canvas_px: u32,
    sizes: MedianSizeTable,
    template: PlaceSettingTemplate,
}

impl MockBackend {
    pub fn new(inventory: &Inventory, mode: Mode, seed: u64, jitter: f64, canvas_px: u32) -> Result<Self> {
        Self::with_tables(
            inventory,
            mode,
            seed,
            jitter,
            canvas_px,
            MedianSizeTable::default(),
            PlaceSettingTemplate::default(),
        )
    }

    pub fn with_tables(
        inventory: &Inventory,
        mode: Mode,
        seed: u64,
        jitter: f64,
        canvas_px: u32,
        sizes: MedianSizeTable,
        template: PlaceSettingTemplate,
    ) -> Result<Self> {
        // unsupported inventories fail here rather than per candidate
        mock_plan_sized(inventory, mode, seed, jitter, &sizes, &template)?;
        Ok(Self {
            inventory: inventory.clone(),
            mode,
            seed,
            jitter,
            canvas_px,
            sizes,
            template,
        })
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, index: usize, _messages: &PromptMessages) -> std::result::Result<String, String> {
        let layout = mock_plan_sized(
            &self.inventory,
            self.mode,
            self.seed.wrapping_add(index as u64),
            self.jitter,
            &self.sizes,
            &self.template,
        )
        .map_err(|e| e.to_string())?;
        Ok(serialize_layout(&layout, self.canvas_px))
    }
}

/// Minimal chat-completions client: one request per candidate, `n = 1`.
pub struct HttpBackend {
    url: String,
    model: String,
    temperature: f64,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, temperature: f64, timeout_s: f64) -> Result<Self> {
        let api_key = std::env::var(API_KEY_VAR)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| Error::PlannerConfig(format!("{API_KEY_VAR} is not set")))?;
        Self::with_key(endpoint, model, temperature, timeout_s, api_key)
    }

    pub fn with_key(endpoint: &str, model: &str, temperature: f64, timeout_s: f64, api_key: String) -> Result<Self> {
        let Endpoint::Http(base) = endpoint.parse()? else {
            return Err(Error::PlannerConfig("mock is not an HTTP endpoint".into()));
        };
        Ok(Self {
            url: chat_completions_url(&base),
            model: model.to_string(),
            temperature,
            api_key,
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs_f64(timeout_s)))
                .build()
                .into(),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

/// Appends `/chat/completions` unless the URL already ends with it.
pub fn chat_completions_url(base: &str) -> String {
    let trimmed = base.trim_end_matches('/');
    if trimmed.ends_with("/chat/completions") {
        trimmed.to_string()
    } else {
        format!("{trimmed}/chat/completions")
    }
}

pub fn request_body(model: &str, temperature: f64, messages: &PromptMessages) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": [
            {"role": "system", "content": messages.system},
            {"role": "user", "content": messages.user},
        ],
        "temperature": temperature,
        "n": 1,
    })
}

/// `choices[0].message.content`, or `choices[0].text` for completion-style servers.
pub fn response_text(body: &serde_json::Value) -> Option<String> {
    let choice = body.get("choices")?.get(0)?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(|v| v.as_str())
        .map(str::to_string)
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, _index: usize, messages: &PromptMessages) -> std::result::Result<String, String> {
        let body = request_body(&self.model, self.temperature, messages);
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| format!("transport: {e}"))?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| format!("transport: unreadable response body: {e}"))?;
        response_text(&value).ok_or_else(|| "transport: response has no completion text".to_string())
    }
}

fn backend_for(
    inventory: &Inventory,
    spec: &PromptSpec,
    cfg: &PlannerConfig,
    sizes: &MedianSizeTable,
    template: &PlaceSettingTemplate,
) -> Result<Box<dyn CompletionBackend>> {
    Ok(match &cfg.endpoint {
        Endpoint::Mock => Box::new(MockBackend::with_tables(
            inventory,
            cfg.mode,
            cfg.seed,
            cfg.jitter,
            spec.dsl_canvas_px,
            sizes.clone(),
            template.clone(),
        )?),
        Endpoint::Http(url) => Box::new(HttpBackend::new(
            url,
            &cfg.model_name,
            cfg.temperature,
            cfg.request_timeout,
        )?),
    })
}

/// k candidates for `inventory`; per-candidate problems land in `failures`.
pub fn generate_candidates(inventory: &Inventory, spec: &PromptSpec, cfg: &PlannerConfig) -> Result<CandidateSet> {
    generate_candidates_with(
        inventory,
        spec,
        cfg,
        &MedianSizeTable::default(),
        &PlaceSettingTemplate::default(),
    )
}

/// As [`generate_candidates`], with the mock drawing on the given tables.
pub fn generate_candidates_with(
    inventory: &Inventory,
    spec: &PromptSpec,
    cfg: &PlannerConfig,
    sizes: &MedianSizeTable,
    template: &PlaceSettingTemplate,
) -> Result<CandidateSet> {
    cfg.validate()?;
    if spec.mode != cfg.mode {
        return Err(Error::PlannerConfig(format!(
            "prompt mode {} does not match planner mode {}",
            spec.mode, cfg.mode
        )));
    }
    let messages = prompt_messages(spec)?;
    let backend = backend_for(inventory, spec, cfg, sizes, template)?;
    Ok(generate_with_backend(
        backend.as_ref(),
        &messages,
        cfg.num_candidates,
        cfg.retries,
        spec.dsl_canvas_px,
    ))
}

/// Runs `k` completions concurrently and assembles them in index order.
pub fn generate_with_backend(
    backend: &dyn CompletionBackend,
    messages: &PromptMessages,
    k: usize,
    retries: u32,
    canvas_px: u32,
) -> CandidateSet {
    let results: Vec<std::result::Result<Layout, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..k)
            .map(|i| s.spawn(move || one_candidate(backend, messages, i, retries, canvas_px)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err("backend panicked".into())))
            .collect()
    });
    let mut set = CandidateSet::default();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(layout) => set.candidates.push(Candidate { index, layout }),
            Err(reason) => set.failures.push((index, reason)),
        }
    }
    set
}

fn one_candidate(
    backend: &dyn CompletionBackend,
    messages: &PromptMessages,
    index: usize,
    retries: u32,
    canvas_px: u32,
) -> std::result::Result<Layout, String> {
    let mut attempt = 0;
    let text = loop {
        match backend.complete(index, messages) {
            Ok(t) => break t,
            Err(e) if attempt < retries => {
                log::warn!("candidate {index}: {e}; retrying");
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let report = parse_layout_text(&text, canvas_px);
    for s in &report.skipped_lines {
        log::debug!("candidate {index}: skipped line {}: {}", s.line, s.reason);
    }
    if report.layout.is_empty() {
        return Err(format!(
            "unparseable response: no layout statements ({} lines skipped)",
            report.skipped_lines.len()
        ));
    }
    let mut layout = report.layout;
    layout.source_tag = format!("candidate-{index}");
    Ok(layout)
}

/// Seeded stand-in for the language model using default sizes and template.
pub fn mock_plan(inventory: &Inventory, mode: Mode, seed: u64, jitter: f64) -> Result<Layout> {
    mock_plan_sized(
        inventory,
        mode,
        seed,
        jitter,
        &MedianSizeTable::default(),
        &PlaceSettingTemplate::default(),
    )
}

/// Table plus `n` median plates (or place settings) on the edge seats, each
/// center moved by `u * jitter` per axis with `u` uniform in [-1, 1]. Full mode
/// completes the plan and reports every object as generated.
pub fn mock_plan_sized(
    inventory: &Inventory,
    mode: Mode,
    seed: u64,
    jitter: f64,
    sizes: &MedianSizeTable,
    template: &PlaceSettingTemplate,
) -> Result<Layout> {
    if !(jitter.is_finite() && jitter >= 0.0) {
        return Err(Error::Mock(format!("jitter must be >= 0, got {jitter}")));
    }
    let n = inventory
        .plates()
        .max(inventory.get(&ObjectClass::place_setting()));
    let min = if mode == Mode::Full { 0 } else { 1 };
    if n < min || n > MAX_MOCK_DINERS {
        return Err(Error::Mock(format!(
            "mock planner supports {min} to {MAX_MOCK_DINERS} diners, got {n}"
        )));
    }
    let seat_class = if mode == Mode::PlaceSettingsOnly {
        ObjectClass::place_setting()
    } else {
        ObjectClass::plate()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layout = Layout::new(format!("mock-{seed}"));
    let [a, b, c, d] = TABLE_BOX;
    layout.push(PlacedObject::generated(ObjectClass::table(), BBox::new(a, b, c, d)?));
    for (edge, x, y) in edge_slots(n as usize) {
        let dx = rng.random_range(-1.0..=1.0) * jitter;
        let dy = rng.random_range(-1.0..=1.0) * jitter;
        layout.push(PlacedObject::generated(
            seat_class.clone(),
            oriented_box(&seat_class, edge, x + dx, y + dy, sizes)?,
        ));
    }
    if mode == Mode::Full {
        let mut full = Inventory::new();
        for (class, k) in inventory.iter().filter(|(c, _)| !c.is_place_setting()) {
            full.add(class.clone(), k)?;
        }
        if !full.contains(&ObjectClass::plate()) && n > 0 {
            full.add(ObjectClass::plate(), n)?;
        }
        layout = as_generated(complete_layout(&layout, &full, template, sizes)?);
    }
    Ok(layout)
}

/// Inventory of one conventional place setting per diner.
pub fn place_setting_inventory(diners: u32) -> Result<Inventory> {
    Inventory::from_counts([
        ("plate", diners),
        ("fork", diners),
        ("knife", diners),
        ("spoon", diners),
        ("bowl", diners),
        ("glass", 2 * diners),
    ])
}

/// Sixteen built-in few-shot examples: eight two-person and eight
/// four-person completed mock layouts drawn with low jitter.
pub fn default_few_shot_examples() -> Result<Vec<(Inventory, Layout)>> {
    let mut out = Vec::with_capacity(16);
    for diners in [2u32, 4] {
        let inv = place_setting_inventory(diners)?;
        for i in 0..8u64 {
            let seed = 1000 * diners as u64 + i;
            let mut layout = mock_plan(&inv, Mode::Full, seed, 0.01)?;
            layout.source_tag = format!("example-{diners}-{i}");
            out.push((inv.clone(), layout));
        }
    }
    Ok(out)
}
