//! Batch subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use asv_fallback::candidates::{encode_png, render_overlay, OverlayStyle};
use asv_fallback::monitor::{embed_scene, load_cache, save_cache, EmbeddingCache, Monitor, MonitorConfig, Verdict};
use asv_fallback::scenario::{load_corpus, load_scenario, AnomalyLabel, Scenario};
use asv_fallback::suite::{run_offline_suite, Report, SuiteConfig, SuiteOutcome};
use serde::Serialize;

use crate::embedding::Pipeline;

/// PNG bytes shown to the monitor for a scene: its image when present,
/// otherwise the mask rendering.
pub fn scene_png(scene: &Scenario<f64>) -> Result<Vec<u8>> {
    match &scene.image_path {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) => {
            std::fs::read(p).with_context(|| format!("read {}", p.display()))
        }
        _ => Ok(encode_png(&scene.background()?)?),
    }
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

/// Named PNG inputs from a directory of images or the nominal scenes of a
/// corpus.
pub fn calibration_inputs(images: Option<&Path>, corpus: Option<&Path>) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    if let Some(dir) = images {
        for p in png_files(dir)? {
            let id = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            out.push((id, std::fs::read(&p).with_context(|| format!("read {}", p.display()))?));
        }
    }
    if let Some(dir) = corpus {
        for s in load_corpus::<f64>(dir)? {
            if s.label == AnomalyLabel::Nominal {
                out.push((s.scene_id.clone(), scene_png(&s)?));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub tau: f64,
}

pub fn calibrate_monitor(inputs: &[(String, Vec<u8>)], pipeline: &Pipeline, alpha: f64, out: &Path) -> Result<CalibrationSummary> {
    if inputs.len() < 2 {
        bail!("calibration needs at least two nominal images, got {}", inputs.len());
    }
    let mut cache: Option<EmbeddingCache<f64>> = None;
    for (id, png) in inputs {
        let e: Vec<f64> = embed_scene(pipeline.describer.as_ref(), pipeline.embedder.as_ref(), png).with_context(|| format!("embed {id}"))?;
        let c = match &mut cache {
            Some(c) => c,
            None => cache.insert(EmbeddingCache::new(e.len())?),
        };
        c.insert(id.clone(), &e)?;
    }
    let cache = cache.expect("at least two inputs");
    let monitor = Monitor::calibrate(cache, alpha)?;
    save_cache(&monitor.cache, out, Some(alpha), Some(monitor.config.tau))?;
    Ok(CalibrationSummary { n: monitor.cache.len(), d: monitor.cache.dim(), alpha, tau: monitor.config.tau })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreLine {
    pub id: String,
    pub score: f64,
    pub tau: f64,
    pub verdict: Verdict,
}

/// Loads a calibrated cache; the threshold comes from the sidecar.
pub fn load_monitor(cache_path: &Path) -> Result<Monitor<f64>> {
    let (cache, sidecar) = load_cache::<f64>(cache_path)?;
    let (Some(alpha), Some(tau)) = (sidecar.alpha, sidecar.tau) else {
        bail!("{} has no calibrated threshold; run calibrate-monitor", cache_path.display());
    };
    Ok(Monitor { cache, config: MonitorConfig::new(alpha, tau)? })
}

pub fn score_monitor(monitor: &Monitor<f64>, inputs: &[(String, Vec<u8>)], pipeline: &Pipeline) -> Result<Vec<ScoreLine>> {
    inputs
        .iter()
        .map(|(id, png)| {
            let e: Vec<f64> = embed_scene(pipeline.describer.as_ref(), pipeline.embedder.as_ref(), png).with_context(|| format!("embed {id}"))?;
            let (score, verdict) = monitor.score(&e)?;
            Ok(ScoreLine { id: id.clone(), score, tau: monitor.config.tau, verdict })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedCandidates {
    pub scene_id: String,
    pub k: usize,
    pub n_survivors: usize,
    pub overlay: PathBuf,
    pub candidates: PathBuf,
}

/// Writes `<scene_id>.png` (overlay) and `<scene_id>.candidates.json`.
pub fn gen_candidates(scene_path: &Path, out: &Path) -> Result<GeneratedCandidates> {
    let scene: Scenario<f64> = load_scenario(scene_path)?;
    let set = scene.candidates()?;
    let img = render_overlay(&scene.background()?, &set, &OverlayStyle::default())?;
    std::fs::create_dir_all(out).with_context(|| format!("create {}", out.display()))?;
    let overlay = out.join(format!("{}.png", scene.scene_id));
    std::fs::write(&overlay, encode_png(&img)?)?;
    let candidates = out.join(format!("{}.candidates.json", scene.scene_id));
    std::fs::write(&candidates, serde_json::to_string_pretty(&set)?)?;
    Ok(GeneratedCandidates { scene_id: scene.scene_id, k: set.k(), n_survivors: set.n_survivors, overlay, candidates })
}

pub fn eval_offline(config: &Path) -> Result<SuiteOutcome> {
    let cfg = SuiteConfig::load(config)?;
    Ok(run_offline_suite(&cfg)?)
}

/// Re-renders the markdown tables from a suite's `report.json`.
pub fn render_report(report_json: &Path) -> Result<String> {
    let text = std::fs::read_to_string(report_json).with_context(|| format!("read {}", report_json.display()))?;
    let report: Report = serde_json::from_str(&text).with_context(|| format!("parse {}", report_json.display()))?;
    Ok(report.to_markdown())
}
