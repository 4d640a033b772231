use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eval::{AlignmentMetrics, Proportion};
use crate::selector::{OutOfRangePolicy, PromptVariant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub seeds: Vec<u64>,
    pub variant: PromptVariant,
    pub timeout_s: f64,
    pub out_of_range: OutOfRangePolicy,
    pub horizons: Vec<f64>,
    pub anomaly_speed: f64,
    pub tau_acc: f64,
    pub count_abstainer_best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene_id: String,
    pub label: String,
    pub k: usize,
    pub n_survivors: usize,
    pub has_consensus: bool,
    pub has_hazard: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Model,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOutcome {
    pub choice: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub votes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub majority_met: Option<bool>,
    pub in_accept: Option<bool>,
    pub in_best: Option<bool>,
    /// Risk relief per horizon, aligned with the configured horizons.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub risk_relief: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRisk {
    pub horizon_s: f64,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParseSummary {
    pub ok: u64,
    pub clipped: u64,
    pub defaulted: u64,
    pub over_word_limit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    /// Half-width of the normal-approximation 95% interval of the mean.
    pub ci95: f64,
}

impl MeanCi {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let ci95 = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            crate::eval::Z_95 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { n, mean, ci95 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwarenessSummary {
    pub hazard: f64,
    pub implication: f64,
    pub action: f64,
    pub awareness: MeanCi,
    /// Replies the judge produced but that failed validation.
    pub judge_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub kind: MethodKind,
    pub per_scene: BTreeMap<String, SceneOutcome>,
    pub alignment: AlignmentMetrics,
    pub alignment_by_label: BTreeMap<String, AlignmentMetrics>,
    pub risk_relief: Vec<HorizonRisk>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse: Option<ParseSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_s: Option<MeanCi>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub awareness: Option<AwarenessSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Gap {
    pub method: String,
    pub scene_id: String,
    pub seed: Option<u64>,
    pub stage: String,
    pub reason: String,
}

/// Aggregate offline results. Serialization is deterministic: maps are
/// ordered and nothing depends on wall-clock time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ReportConfig,
    pub scenes: Vec<SceneSummary>,
    /// Models first (in configured order), then baselines.
    pub method_order: Vec<String>,
    pub methods: BTreeMap<String, MethodReport>,
    pub gaps: Vec<Gap>,
}

fn fmt_prop(p: &Option<Proportion>) -> String {
    match p {
        Some(p) => format!("{:.2} [{:.2}, {:.2}]", p.value, p.ci_low, p.ci_high),
        None => "n/a".into(),
    }
}

impl Report {
    fn ordered(&self) -> impl Iterator<Item = (&String, &MethodReport)> {
        self.method_order.iter().filter_map(|n| self.methods.get(n).map(|m| (n, m)))
    }

    /// Markdown tables: alignment, alignment per label, risk relief, scene
    /// understanding, parse outcomes, and gaps.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let n_cons = self.scenes.iter().filter(|x| x.has_consensus).count();
        let n_haz = self.scenes.iter().filter(|x| x.has_hazard).count();
        let seeds: Vec<String> = self.config.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "# Offline evaluation report\n");
        let _ = writeln!(
            s,
            "Scenes: {} ({} with consensus, {} with hazard). Seeds: {}. Prompt: {}.\n",
            self.scenes.len(),
            n_cons,
            n_haz,
            seeds.join(", "),
            self.config.variant
        );

        let _ = writeln!(s, "## Action alignment\n");
        let _ = writeln!(s, "| Method | Accept@1 | Best@1 | Scenes | Latency (s) |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for (name, m) in self.ordered() {
            let label = match m.kind {
                MethodKind::Model => format!("{name} (FB-{})", self.config.seeds.len()),
                MethodKind::Baseline => name.clone(),
            };
            let lat = m.latency_s.map(|l| format!("{:.2} ± {:.2}", l.mean, l.ci95)).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "| {label} | {} | {} | {} | {lat} |",
                fmt_prop(&m.alignment.accept_at_1),
                fmt_prop(&m.alignment.best_at_1),
                m.alignment.n_scenes
            );
        }

        let labels: std::collections::BTreeSet<&String> =
            self.methods.values().flat_map(|m| m.alignment_by_label.keys()).collect();
        if !labels.is_empty() {
            let _ = writeln!(s, "\n## Action alignment by label\n");
            let _ = writeln!(s, "| Method | Label | Accept@1 | Best@1 | Scenes |");
            let _ = writeln!(s, "|---|---|---|---|---|");
            for (name, m) in self.ordered() {
                for (label, a) in &m.alignment_by_label {
                    let _ = writeln!(
                        s,
                        "| {name} | {label} | {} | {} | {} |",
                        fmt_prop(&a.accept_at_1),
                        fmt_prop(&a.best_at_1),
                        a.n_scenes
                    );
                }
            }
        }

        if n_haz > 0 {
            let _ = writeln!(s, "\n## Risk relief\n");
            let _ = writeln!(s, "Mean change in hazard separation (m), per-scene range in brackets.\n");
            let heads: Vec<String> = self.config.horizons.iter().map(|h| format!("Δd {h}s")).collect();
            let _ = writeln!(s, "| Method | {} |", heads.join(" | "));
            let _ = writeln!(s, "|---|{}", "---|".repeat(heads.len()));
            for (name, m) in self.ordered() {
                let cells: Vec<String> = m
                    .risk_relief
                    .iter()
                    .map(|r| if r.n == 0 { "n/a".into() } else { format!("{:.2} [{:.2}, {:.2}]", r.mean, r.min, r.max) })
                    .collect();
                let _ = writeln!(s, "| {name} | {} |", cells.join(" | "));
            }
        }

        if self.methods.values().any(|m| m.awareness.is_some()) {
            let _ = writeln!(s, "\n## Scene understanding\n");
            let _ = writeln!(s, "| Model | Hazard | Implication | Action | Awareness | Judged | Judge errors |");
            let _ = writeln!(s, "|---|---|---|---|---|---|---|");
            for (name, m) in self.ordered() {
                if let Some(a) = &m.awareness {
                    let _ = writeln!(
                        s,
                        "| {name} | {:.3} | {:.3} | {:.3} | {:.3} ± {:.3} | {} | {} |",
                        a.hazard, a.implication, a.action, a.awareness.mean, a.awareness.ci95, a.awareness.n, a.judge_errors
                    );
                }
            }
        }

        let _ = writeln!(s, "\n## Parse outcomes\n");
        let _ = writeln!(s, "| Model | ok | clipped | defaulted | over word limit |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for (name, m) in self.ordered() {
            if let Some(p) = &m.parse {
                let _ = writeln!(s, "| {name} | {} | {} | {} | {} |", p.ok, p.clipped, p.defaulted, p.over_word_limit);
            }
        }

        let _ = writeln!(s, "\n## Gaps\n");
        if self.gaps.is_empty() {
            let _ = writeln!(s, "None.");
        } else {
            for g in &self.gaps {
                let seed = g.seed.map(|x| format!(" seed {x}")).unwrap_or_default();
                let _ = writeln!(s, "- {} / {}{seed} ({}): {}", g.method, g.scene_id, g.stage, g.reason);
            }
        }
        s
    }
}
