//! Rater data ingest.
//!
//! CSV: header `scene_id,rater_id,accepted,best`; `accepted` is a
//! semicolon-separated id list (empty = none acceptable). JSON: an array of
//! `{scene_id, ratings: [{rater_id, accepted: [..], best}]}`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use super::consensus::{RaterData, Rating};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct CsvRow {
    scene_id: String,
    rater_id: String,
    accepted: String,
    best: String,
}

fn parse_id(text: &str, row: usize, field: &str, max_id: Option<usize>) -> Result<usize> {
    let id: usize = text
        .trim()
        .parse()
        .map_err(|_| Error::Ratings { row, message: format!("{field} {text:?} is not a non-negative integer") })?;
    if let Some(k) = max_id {
        if id > k {
            return Err(Error::Ratings { row, message: format!("{field} {id} is outside 0..={k}") });
        }
    }
    Ok(id)
}

fn group(rows: Vec<(usize, String, Rating)>) -> Result<BTreeMap<String, RaterData>> {
    let mut by_scene: BTreeMap<String, Vec<Rating>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (row, scene, rating) in rows {
        if !seen.insert((scene.clone(), rating.rater_id.clone())) {
            return Err(Error::Ratings { row, message: format!("duplicate rater {} for scene {scene}", rating.rater_id) });
        }
        by_scene.entry(scene).or_default().push(rating);
    }
    by_scene.into_iter().map(|(s, r)| Ok((s.clone(), RaterData::new(s, r)?))).collect()
}

/// Parses CSV ratings. Ids above `max_id` are rejected with the offending row
/// (1-based file line, header included).
pub fn parse_ratings_csv(text: &str, max_id: Option<usize>) -> Result<BTreeMap<String, RaterData>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<CsvRow>().enumerate() {
        let fallback_row = i + 2;
        let rec = rec.map_err(|e| Error::Ratings {
            row: e.position().map(|p| p.line() as usize).unwrap_or(fallback_row),
            message: e.to_string(),
        })?;
        let row = fallback_row;
        if rec.scene_id.is_empty() || rec.rater_id.is_empty() {
            return Err(Error::Ratings { row, message: "empty scene_id or rater_id".into() });
        }
        let accepted = rec
            .accepted
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse_id(s, row, "accepted id", max_id))
            .collect::<Result<BTreeSet<usize>>>()?;
        let best = parse_id(&rec.best, row, "best id", max_id)?;
        if !accepted.is_empty() && best != 0 && !accepted.contains(&best) {
            tracing::warn!(row, scene = %rec.scene_id, "best pick {best} is not among the rater's accepted ids");
        }
        rows.push((row, rec.scene_id, Rating { rater_id: rec.rater_id, accepted, best }));
    }
    group(rows)
}

#[derive(Debug, Deserialize)]
struct JsonScene {
    scene_id: String,
    ratings: Vec<JsonRating>,
}

#[derive(Debug, Deserialize)]
struct JsonRating {
    rater_id: String,
    #[serde(default)]
    accepted: Vec<usize>,
    best: usize,
}

/// Parses the JSON form; `row` in errors counts ratings in file order from 1.
pub fn parse_ratings_json(text: &str, max_id: Option<usize>) -> Result<BTreeMap<String, RaterData>> {
    let scenes: Vec<JsonScene> = serde_json::from_str(text).map_err(|e| Error::json("ratings", e))?;
    let mut rows = Vec::new();
    let mut row = 0;
    for scene in scenes {
        for r in scene.ratings {
            row += 1;
            let check = |id: usize, field: &str| match max_id {
                Some(k) if id > k => Err(Error::Ratings { row, message: format!("{field} {id} is outside 0..={k}") }),
                _ => Ok(id),
            };
            let accepted = r.accepted.iter().map(|&a| check(a, "accepted id")).collect::<Result<BTreeSet<_>>>()?;
            let best = check(r.best, "best id")?;
            rows.push((row, scene.scene_id.clone(), Rating { rater_id: r.rater_id, accepted, best }));
        }
    }
    group(rows)
}

/// Loads ratings by extension (`.json` → JSON, otherwise CSV).
pub fn load_ratings(path: &Path, max_id: Option<usize>) -> Result<BTreeMap<String, RaterData>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingFile(path.to_path_buf())),
        Err(e) => return Err(Error::io(format!("read {}", path.display()), e)),
    };
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_ratings_json(&text, max_id)
    } else {
        parse_ratings_csv(&text, max_id)
    }
}
