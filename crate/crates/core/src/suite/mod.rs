//! Offline experiment runner: per scene it generates candidates and the
//! overlay, runs every configured model as an FB-n ensemble plus the geometric
//! baselines, and scores them against the human consensus and hazard
//! annotations.
//!
//! Runs are resumable: decision and judgment logs are append-only, and any
//! (model, scene, seed) already logged is not requested again. Requests a
//! backend cannot serve at all (quota, missing replay entry) are left out of
//! the logs and listed as gaps in the report.

mod config;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::candidates::{encode_png, render_overlay, CandidateSet, OverlayStyle};
use crate::error::{Error, Result};
use crate::eval::{
    alignment_metrics, awareness_from_components, build_consensus, judge_aggregate, risk_relief_for_choice, Consensus,
    ConsensusConfig, JudgeReport, JudgeScores,
};
use crate::scenario::{load_corpus, AnomalyLabel, Scenario};
use crate::selector::backend::ModelBackend;
use crate::selector::{
    aggregate_votes, baseline_select, build_prompt, read_decision_log, select_fb1, BaselinePolicy, CallContext,
    CallOutcome, DecisionLogWriter, DecisionRecord, LogSink, ParseStatus, PromptVariant,
};

pub use config::{BackendRole, BackendSpec, CountingBackend, JudgeSpec, ModelSpec, SuiteConfig};
pub use report::{
    AwarenessSummary, Gap, HorizonRisk, MeanCi, MethodKind, MethodReport, ParseSummary, Report, ReportConfig,
    SceneOutcome, SceneSummary,
};

/// Result of one suite run.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub report: Report,
    pub report_json: PathBuf,
    pub report_md: PathBuf,
    /// Selector requests that reached a backend during this run.
    pub selector_calls: u64,
    pub judge_calls: u64,
}

/// One line of a judgment log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub scene_id: String,
    pub seed: u64,
    pub variant: PromptVariant,
    #[serde(default)]
    pub scores: Option<JudgeScores>,
    #[serde(default)]
    pub error: Option<String>,
}

struct PreparedScene {
    scene: Scenario<f64>,
    set: CandidateSet<f64>,
    overlay_png: Arc<Vec<u8>>,
    consensus: Option<Consensus>,
}

fn label_name(label: &AnomalyLabel) -> String {
    match label {
        AnomalyLabel::Nominal => "nominal".into(),
        AnomalyLabel::Anomaly(kind) => kind.clone(),
    }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(format!("create {}", p.display()), e))
}

fn write_file(p: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(p, bytes).map_err(|e| Error::io(format!("write {}", p.display()), e))
}

fn prepare(scene: Scenario<f64>, out: &Path, cfg: &SuiteConfig) -> Result<PreparedScene> {
    let set = scene.candidates()?;
    let overlay = render_overlay(&scene.background()?, &set, &OverlayStyle::default())?;
    let png = encode_png(&overlay)?;
    write_file(&out.join("overlays").join(format!("{}.png", scene.scene_id)), &png)?;
    let json = serde_json::to_string_pretty(&set).map_err(|e| Error::json("candidate set", e))?;
    write_file(&out.join("candidates").join(format!("{}.json", scene.scene_id)), json.as_bytes())?;
    let cc = ConsensusConfig { tau_acc: cfg.tau_acc, count_abstainer_best: cfg.count_abstainer_best };
    let consensus = scene.ratings.as_ref().map(|r| build_consensus(r, &cc));
    Ok(PreparedScene { scene, set, overlay_png: Arc::new(png), consensus })
}

type LogKey = (String, u64);

/// Latest usable decision per (scene, seed) for this variant and K.
fn index_decisions(records: Vec<DecisionRecord>, variant: PromptVariant, k_of: &BTreeMap<String, usize>) -> BTreeMap<LogKey, DecisionRecord> {
    let mut out = BTreeMap::new();
    for r in records {
        if r.variant == variant && k_of.get(&r.scene_id) == Some(&r.k) {
            out.insert((r.scene_id.clone(), r.seed), r);
        }
    }
    out
}

fn read_judgments(path: &Path) -> Result<Vec<JudgmentRecord>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(format!("read {}", path.display()), e)),
    };
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => tracing::warn!(path = %path.display(), "skipping torn final log line"),
            Err(e) => return Err(Error::json(format!("{} line {}", path.display(), i + 1), e)),
        }
    }
    Ok(out)
}

fn append_jsonl<V: Serialize>(path: &Path, records: &[V]) -> Result<()> {
    use std::io::Write;
    if records.is_empty() {
        return Ok(());
    }
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::json("log record", e))?;
        writeln!(f, "{line}").map_err(|e| Error::io(format!("write {}", path.display()), e))?;
    }
    Ok(())
}

fn risk_row(set: &CandidateSet<f64>, choice: usize, scene: &Scenario<f64>, cfg: &SuiteConfig) -> Result<Vec<f64>> {
    match &scene.hazard {
        None => Ok(Vec::new()),
        Some(h) => cfg.horizons.iter().map(|&hz| risk_relief_for_choice(set, choice, &h.h, hz, cfg.anomaly_speed)).collect(),
    }
}

fn summarize_method(
    kind: MethodKind,
    per_scene: BTreeMap<String, SceneOutcome>,
    prepared: &[PreparedScene],
    cfg: &SuiteConfig,
) -> MethodReport {
    let consensus: BTreeMap<String, Consensus> = prepared
        .iter()
        .filter_map(|p| p.consensus.clone().map(|c| (p.scene.scene_id.clone(), c)))
        .collect();
    let choices: BTreeMap<String, usize> = per_scene.iter().map(|(s, o)| (s.clone(), o.choice)).collect();
    let scored: BTreeMap<String, usize> = choices.iter().filter(|(s, _)| consensus.contains_key(*s)).map(|(s, c)| (s.clone(), *c)).collect();
    let alignment = alignment_metrics(&scored, &consensus);
    let mut alignment_by_label = BTreeMap::new();
    let labels: BTreeSet<String> = prepared.iter().map(|p| label_name(&p.scene.label)).collect();
    for label in labels {
        let subset: BTreeMap<String, usize> = prepared
            .iter()
            .filter(|p| label_name(&p.scene.label) == label)
            .filter_map(|p| scored.get(&p.scene.scene_id).map(|c| (p.scene.scene_id.clone(), *c)))
            .collect();
        if !subset.is_empty() {
            alignment_by_label.insert(label, alignment_metrics(&subset, &consensus));
        }
    }
    let risk_relief = cfg
        .horizons
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let vals: Vec<f64> = per_scene.values().filter_map(|o| o.risk_relief.get(i).copied()).collect();
            let n = vals.len();
            let (mean, min, max) = if n == 0 {
                (0.0, 0.0, 0.0)
            } else {
                (vals.iter().sum::<f64>() / n as f64, vals.iter().copied().fold(f64::INFINITY, f64::min), vals.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            };
            HorizonRisk { horizon_s: h, n, mean, min, max }
        })
        .collect();
    MethodReport { kind, per_scene, alignment, alignment_by_label, risk_relief, parse: None, latency_s: None, awareness: None }
}

fn scene_outcome(choice: usize, consensus: Option<&Consensus>, risk: Vec<f64>) -> SceneOutcome {
    SceneOutcome {
        choice,
        votes: None,
        majority_met: None,
        in_accept: consensus.map(|c| c.accept.contains(&choice)),
        in_best: consensus.map(|c| c.best.contains(&choice)),
        risk_relief: risk,
    }
}

struct ModelRun {
    report: MethodReport,
    gaps: Vec<Gap>,
}

fn run_model(
    spec: &ModelSpec,
    prepared: &[PreparedScene],
    cfg: &SuiteConfig,
    judge: Option<&Arc<dyn ModelBackend>>,
    selector_calls: &Arc<AtomicU64>,
) -> Result<ModelRun> {
    let base = cfg.output.clone();
    let backend = CountingBackend::wrap(spec.backend.build(&spec.name, BackendRole::Selector, &base)?, Arc::clone(selector_calls));
    let log_path = cfg.output.join("decisions").join(format!("{}.jsonl", spec.name));
    let k_of: BTreeMap<String, usize> = prepared.iter().map(|p| (p.scene.scene_id.clone(), p.set.k())).collect();
    let mut decisions = index_decisions(read_decision_log(&log_path)?, cfg.variant, &k_of);
    let mut gaps = Vec::new();
    let timeout = Duration::from_secs_f64(cfg.timeout_s);
    let sink = LogSink;

    let mut writer = DecisionLogWriter::append(&log_path)?;
    for p in prepared {
        let scene_id = &p.scene.scene_id;
        let missing: Vec<u64> = cfg.seeds.iter().copied().filter(|s| !decisions.contains_key(&(scene_id.clone(), *s))).collect();
        if missing.is_empty() {
            continue;
        }
        let k = p.set.k();
        let prompt = build_prompt(cfg.variant, k);
        let outcomes: Vec<CallOutcome> = std::thread::scope(|scope| {
            let handles: Vec<_> = missing
                .iter()
                .map(|&seed| {
                    let ctx = CallContext { scene_id: scene_id.clone(), seed, timeout, out_of_range: cfg.out_of_range };
                    let (backend, png, prompt, sink) = (&backend, &p.overlay_png, &prompt, &sink);
                    scope.spawn(move || select_fb1(backend, png, k, prompt, &ctx, sink))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("selector worker panicked")).collect()
        });
        for out in outcomes {
            if out.exhausted {
                gaps.push(Gap {
                    method: spec.name.clone(),
                    scene_id: scene_id.clone(),
                    seed: Some(out.seed),
                    stage: "selector".into(),
                    reason: out.decision.failure.clone().unwrap_or_default(),
                });
                continue;
            }
            let rec = DecisionRecord::from_outcome(scene_id, &spec.name, cfg.variant, k, &out);
            writer.write(&rec)?;
            decisions.insert((scene_id.clone(), out.seed), rec);
        }
    }

    let mut per_scene = BTreeMap::new();
    let mut parse = ParseSummary::default();
    let mut latencies = Vec::new();
    for p in prepared {
        let scene_id = &p.scene.scene_id;
        let recs: Vec<&DecisionRecord> = cfg.seeds.iter().filter_map(|s| decisions.get(&(scene_id.clone(), *s))).collect();
        for r in &recs {
            match r.status {
                ParseStatus::Ok => parse.ok += 1,
                ParseStatus::Clipped => parse.clipped += 1,
                ParseStatus::Defaulted => parse.defaulted += 1,
            }
            parse.over_word_limit += u64::from(r.over_word_limit);
            latencies.push(r.latency_s);
        }
        if recs.len() != cfg.seeds.len() {
            continue;
        }
        let votes: Vec<usize> = recs.iter().map(|r| r.choice_id).collect();
        let vote = aggregate_votes(&votes, p.set.k());
        let mut o = scene_outcome(vote.winner, p.consensus.as_ref(), risk_row(&p.set, vote.winner, &p.scene, cfg)?);
        o.votes = Some(vote.votes);
        o.majority_met = Some(vote.majority_met);
        per_scene.insert(scene_id.clone(), o);
    }

    let mut report = summarize_method(MethodKind::Model, per_scene, prepared, cfg);
    report.parse = Some(parse);
    report.latency_s = MeanCi::of(&latencies);

    if let (Some(judge), Some(judge_spec)) = (judge, cfg.judge.as_ref()) {
        let jpath = cfg.output.join("judgments").join(format!("{}.jsonl", spec.name));
        let mut judged: BTreeMap<LogKey, JudgmentRecord> = read_judgments(&jpath)?
            .into_iter()
            .filter(|j| j.variant == cfg.variant)
            .map(|j| ((j.scene_id.clone(), j.seed), j))
            .collect();
        let jtimeout = Duration::from_secs_f64(judge_spec.timeout_s);
        let mut fresh = Vec::new();
        for p in prepared {
            let Some(policy) = &p.scene.policy else { continue };
            for &seed in &cfg.seeds {
                let key = (p.scene.scene_id.clone(), seed);
                let Some(d) = decisions.get(&key) else { continue };
                if judged.contains_key(&key) {
                    continue;
                }
                let report = JudgeReport { see: d.see.clone(), implications: d.implications.clone(), action: d.action.clone() };
                let req_key = format!("{}/{}#{}", spec.name, p.scene.scene_id, seed);
                let rec = match judge_aggregate(judge, policy, &report, &req_key, jtimeout) {
                    Ok(scores) => JudgmentRecord { scene_id: key.0.clone(), seed, variant: cfg.variant, scores: Some(scores), error: None },
                    Err(Error::Backend(e)) => {
                        gaps.push(Gap { method: spec.name.clone(), scene_id: key.0.clone(), seed: Some(seed), stage: "judge".into(), reason: e.to_string() });
                        continue;
                    }
                    Err(e) => JudgmentRecord { scene_id: key.0.clone(), seed, variant: cfg.variant, scores: None, error: Some(e.to_string()) },
                };
                fresh.push(rec.clone());
                judged.insert(key, rec);
            }
        }
        append_jsonl(&jpath, &fresh)?;
        let scores: Vec<&JudgeScores> = judged.values().filter_map(|j| j.scores.as_ref()).collect();
        let errors = judged.values().filter(|j| j.error.is_some()).count();
        if !scores.is_empty() || errors > 0 {
            let n = scores.len().max(1) as f64;
            let mean = |f: fn(&JudgeScores) -> f64| scores.iter().map(|s| f(s)).sum::<f64>() / n;
            let per: Vec<f64> = scores.iter().map(|s| awareness_from_components(s.hazard, s.implication, s.action)).collect();
            report.awareness = Some(AwarenessSummary {
                hazard: mean(|s| s.hazard),
                implication: mean(|s| s.implication),
                action: mean(|s| s.action),
                awareness: MeanCi::of(&per).unwrap_or(MeanCi { n: 0, mean: 0.0, ci95: 0.0 }),
                judge_errors: errors,
            });
        }
    }
    Ok(ModelRun { report, gaps })
}

/// Runs the configured experiments and writes `report.json` and `report.md`
/// into the output directory.
pub fn run_offline_suite(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let scenes = load_corpus::<f64>(&cfg.corpus)?;
    if scenes.is_empty() {
        return Err(Error::Config(format!("no *.scene.json files in {}", cfg.corpus.display())));
    }
    for sub in ["overlays", "candidates", "decisions", "judgments"] {
        create_dir(&cfg.output.join(sub))?;
    }
    let prepared: Vec<PreparedScene> = scenes.into_iter().map(|s| prepare(s, &cfg.output, cfg)).collect::<Result<_>>()?;

    let selector_calls = Arc::new(AtomicU64::new(0));
    let judge_calls = Arc::new(AtomicU64::new(0));
    let judge = match &cfg.judge {
        Some(j) => Some(CountingBackend::wrap(j.backend.build("judge", BackendRole::Judge, &cfg.output)?, Arc::clone(&judge_calls))),
        None => None,
    };

    let mut methods = BTreeMap::new();
    let mut method_order = Vec::new();
    let mut gaps = Vec::new();
    for spec in &cfg.models {
        let run = run_model(spec, &prepared, cfg, judge.as_ref(), &selector_calls)?;
        gaps.extend(run.gaps);
        method_order.push(spec.name.clone());
        methods.insert(spec.name.clone(), run.report);
    }
    for policy in BaselinePolicy::ALL {
        let mut per_scene = BTreeMap::new();
        for p in &prepared {
            let choice = baseline_select(policy, &p.set);
            per_scene.insert(p.scene.scene_id.clone(), scene_outcome(choice, p.consensus.as_ref(), risk_row(&p.set, choice, &p.scene, cfg)?));
        }
        let name = policy.label().to_string();
        if methods.contains_key(&name) {
            return Err(Error::Config(format!("model name {name} collides with a baseline")));
        }
        method_order.push(name.clone());
        methods.insert(name, summarize_method(MethodKind::Baseline, per_scene, &prepared, cfg));
    }
    gaps.sort();

    let report = Report {
        config: ReportConfig {
            seeds: cfg.seeds.clone(),
            variant: cfg.variant,
            timeout_s: cfg.timeout_s,
            out_of_range: cfg.out_of_range,
            horizons: cfg.horizons.clone(),
            anomaly_speed: cfg.anomaly_speed,
            tau_acc: cfg.tau_acc,
            count_abstainer_best: cfg.count_abstainer_best,
        },
        scenes: prepared
            .iter()
            .map(|p| SceneSummary {
                scene_id: p.scene.scene_id.clone(),
                label: label_name(&p.scene.label),
                k: p.set.k(),
                n_survivors: p.set.n_survivors,
                has_consensus: p.consensus.is_some(),
                has_hazard: p.scene.hazard.is_some(),
            })
            .collect(),
        method_order,
        methods,
        gaps,
    };
    let report_json = cfg.output.join("report.json");
    let report_md = cfg.output.join("report.md");
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::json("report", e))?;
    write_file(&report_json, (json + "\n").as_bytes())?;
    write_file(&report_md, report.to_markdown().as_bytes())?;
    Ok(SuiteOutcome {
        report,
        report_json,
        report_md,
        selector_calls: selector_calls.load(Ordering::SeqCst),
        judge_calls: judge_calls.load(Ordering::SeqCst),
    })
}
