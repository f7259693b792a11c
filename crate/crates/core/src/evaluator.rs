//! Count-based precision/recall, suite aggregation, the Wilcoxon signed-rank
//! test and few-shot example curation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Inventory, Layout, ObjectClass};
use crate::scorer::{score, ScoreBreakdown, ScoreWeights};

/// Exact signed-rank p-values are used up to this many non-zero pairs.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub required: u32,
    pub generated: u32,
    pub matched: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub per_class: BTreeMap<ObjectClass, ClassCounts>,
}

/// Precision = Σ min(n, y) / Σ y, recall = Σ min(n, y) / Σ n over all classes.
///
/// Classes generated but never required add to the precision denominator. A
/// table in the layout is scene context and only counts when the inventory
/// lists tables. An empty layout has precision 0.
pub fn precision_recall(generated: &Layout, required: &Inventory) -> Result<EvalReport> {
    if required.total() == 0 {
        return Err(Error::Eval("required inventory is empty".into()));
    }
    let mut counts = generated.class_counts();
    let table = ObjectClass::table();
    if !required.contains(&table) {
        counts.remove(&table);
    }
    let mut per_class: BTreeMap<ObjectClass, ClassCounts> = required
        .iter()
        .map(|(c, n)| {
            (
                c.clone(),
                ClassCounts {
                    required: n,
                    generated: 0,
                    matched: 0,
                },
            )
        })
        .collect();
    for (class, y) in counts {
        per_class
            .entry(class)
            .or_insert(ClassCounts {
                required: 0,
                generated: 0,
                matched: 0,
            })
            .generated = y;
    }
    let (mut matched, mut gen_total, mut req_total) = (0u64, 0u64, 0u64);
    for c in per_class.values_mut() {
        c.matched = c.required.min(c.generated);
        matched += c.matched as u64;
        gen_total += c.generated as u64;
        req_total += c.required as u64;
    }
    let precision = if gen_total == 0 {
        0.0
    } else {
        matched as f64 / gen_total as f64
    };
    Ok(EvalReport {
        precision,
        recall: matched as f64 / req_total as f64,
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCase {
    pub name: String,
    pub generated: Layout,
    pub required: Inventory,
}

impl SuiteCase {
    pub fn new(name: impl Into<String>, generated: Layout, required: Inventory) -> Self {
        Self {
            name: name.into(),
            generated,
            required,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-case results and unweighted means over the cases that evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub cases: Vec<CaseOutcome>,
    pub evaluated: usize,
    pub failed: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_score: f64,
}

impl SuiteReport {
    /// Rows of `case,precision_pct,recall_pct,score_pct,error`, closed by a `mean` row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["case", "precision_pct", "recall_pct", "score_pct", "error"])?;
        let pct = |v: f64| format!("{:.1}", v * 100.0);
        for c in &self.cases {
            match (&c.report, &c.score) {
                (Some(r), Some(s)) => w.write_record([
                    c.name.as_str(),
                    &pct(r.precision),
                    &pct(r.recall),
                    &pct(s.total),
                    "",
                ])?,
                _ => w.write_record([
                    c.name.as_str(),
                    "",
                    "",
                    "",
                    c.error.as_deref().unwrap_or(""),
                ])?,
            }
        }
        w.write_record([
            "mean",
            &pct(self.mean_precision),
            &pct(self.mean_recall),
            &pct(self.mean_score),
            "",
        ])?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Per-case recall in case order, `None` where the case failed.
    pub fn recalls(&self) -> Vec<Option<f64>> {
        self.cases
            .iter()
            .map(|c| c.report.as_ref().map(|r| r.recall))
            .collect()
    }
}

pub fn evaluate_suite(cases: &[SuiteCase], weights: &ScoreWeights) -> Result<SuiteReport> {
    if cases.is_empty() {
        return Err(Error::Eval("suite has no cases".into()));
    }
    let outcomes: Vec<CaseOutcome> = cases
        .iter()
        .map(|c| match precision_recall(&c.generated, &c.required) {
            Ok(report) => CaseOutcome {
                name: c.name.clone(),
                score: Some(score(&c.generated, &c.required, weights)),
                report: Some(report),
                error: None,
            },
            Err(e) => CaseOutcome {
                name: c.name.clone(),
                report: None,
                score: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let ok: Vec<(&EvalReport, &ScoreBreakdown)> = outcomes
        .iter()
        .filter_map(|o| Some((o.report.as_ref()?, o.score.as_ref()?)))
        .collect();
    let n = ok.len();
    let mean = |f: &dyn Fn(&(&EvalReport, &ScoreBreakdown)) -> f64| {
        if n == 0 {
            0.0
        } else {
            ok.iter().map(f).sum::<f64>() / n as f64
        }
    };
    Ok(SuiteReport {
        mean_precision: mean(&|(r, _)| r.precision),
        mean_recall: mean(&|(r, _)| r.recall),
        mean_score: mean(&|(_, s)| s.total),
        evaluated: n,
        failed: outcomes.len() - n,
        cases: outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_effective: usize,
    /// min(W+, W-)
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub significant: bool,
    pub method: PValueMethod,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided exact p-value: the null distribution of W+ over all 2^n sign
/// assignments, tabulated by subset-sum counting on doubled ranks.
pub fn exact_p_value(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut ways = vec![0u64; total + 1];
    ways[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if ways[s] != 0 {
                ways[s + r] += ways[s];
            }
        }
        reach += r;
    }
    let w2 = (statistic * 2.0).round() as usize;
    let below: u64 = ways[..=w2.min(total)].iter().sum();
    let p = 2.0 * below as f64 / 2f64.powi(ranks.len() as i32);
    p.min(1.0)
}

/// Two-sided normal approximation with tie and continuity corrections.
pub fn normal_p_value(ranks: &[f64], abs_diffs: &[f64], statistic: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs_diffs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Paired signed-rank test of `a` against `b`; zero differences are dropped.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alpha: f64) -> Result<WilcoxonResult> {
    wilcoxon_with_method(a, b, alpha, None)
}

/// As [`wilcoxon_signed_rank`], optionally forcing the p-value method.
pub fn wilcoxon_with_method(
    a: &[f64],
    b: &[f64],
    alpha: f64,
    method: Option<PValueMethod>,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Stats(format!(
            "samples must be non-empty and paired, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Stats(format!("alpha {alpha} outside [0,1]")));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Stats("differences must be finite".into()));
    }
    if diffs.is_empty() {
        return Err(Error::Stats("no nonzero pairs".into()));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w_minus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d < 0.0)
        .map(|(_, r)| r)
        .sum();
    let statistic = w_plus.min(w_minus);
    let method = method.unwrap_or(if diffs.len() <= EXACT_MAX_N {
        PValueMethod::Exact
    } else {
        PValueMethod::Normal
    });
    let p_value = match method {
        PValueMethod::Exact => exact_p_value(&ranks, statistic),
        PValueMethod::Normal => normal_p_value(&ranks, &abs, statistic),
    };
    Ok(WilcoxonResult {
        n_effective: diffs.len(),
        statistic,
        w_plus,
        w_minus,
        p_value,
        significant: p_value < alpha,
        method,
    })
}

/// Scores each layout against its own inventory and keeps the best `top_n`,
/// ties in input order.
pub fn curate_examples(
    layouts: &[Layout],
    inventories: &[Inventory],
    weights: &ScoreWeights,
    top_n: usize,
) -> Result<Vec<(Inventory, Layout)>> {
    if layouts.len() != inventories.len() {
        return Err(Error::Eval(format!(
            "{} layouts but {} inventories",
            layouts.len(),
            inventories.len()
        )));
    }
    if top_n > layouts.len() {
        return Err(Error::Eval(format!(
            "asked for {top_n} examples but only {} layouts are available",
            layouts.len()
        )));
    }
    let mut scored: Vec<(usize, f64)> = layouts
        .iter()
        .zip(inventories)
        .enumerate()
        .map(|(i, (l, inv))| (i, score(l, inv, weights).total))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(scored
        .into_iter()
        .take(top_n)
        .map(|(i, _)| (inventories[i].clone(), layouts[i].clone()))
        .collect())
}

pub type Example = (Inventory, Layout);

/// Splits curated layouts into few-shot examples (`per_party` two-person and
/// `per_party` four-person layouts, in curated order) and the remaining test set.
pub fn split_few_shot(curated: Vec<Example>, per_party: usize) -> (Vec<Example>, Vec<Example>) {
    let (mut twos, mut fours) = (0, 0);
    let mut examples = Vec::new();
    let mut test = Vec::new();
    for item in curated {
        let slot = match item.1.count_of(&ObjectClass::plate()) {
            2 if twos < per_party => Some(&mut twos),
            4 if fours < per_party => Some(&mut fours),
            _ => None,
        };
        match slot {
            Some(n) => {
                *n += 1;
                examples.push(item);
            }
            None => test.push(item),
        }
    }
    (examples, test)
}
