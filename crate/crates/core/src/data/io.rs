use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::corpus::{Dataset, DatasetMeta, TransitionTuple};
use super::grammar::FoldScript;
use crate::cloth::{render, ClothConfig, ClothState, FoldAction};
use crate::util::write_atomic;
use crate::{Error, Result};

pub const DATASET_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    cloth: ClothConfig,
    delta_move_mm: f64,
    seed: u64,
    resolution: usize,
    n_variants: u64,
    perturbs_per_state: usize,
    perturb_scale_m: f64,
    tuples: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    state0: ClothState,
    state1: ClothState,
    a: u8,
    u: FoldAction,
    state_ids: Option<[usize; 2]>,
}

fn fmt_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format { line, message: message.into() }
}

/// Serialises `d` as JSON lines: a versioned header, then one tuple per
/// line. Observations are not stored; [`load_dataset`] re-renders them.
pub fn dataset_to_string(d: &Dataset) -> Result<String> {
    let header = Header {
        version: DATASET_VERSION,
        cloth: d.meta.cloth.clone(),
        delta_move_mm: d.delta_move_mm,
        seed: d.meta.seed,
        resolution: d.meta.resolution,
        n_variants: d.meta.n_variants,
        perturbs_per_state: d.meta.perturbs_per_state,
        perturb_scale_m: d.meta.perturb_scale_m,
        tuples: d.tuples.len(),
    };
    let mut out = serde_json::to_string(&header).map_err(|e| fmt_err(1, e.to_string()))?;
    out.push('\n');
    for t in &d.tuples {
        let rec = Record { state0: t.state0.clone(), state1: t.state1.clone(), a: t.a, u: t.u, state_ids: t.state_ids };
        out.push_str(&serde_json::to_string(&rec).map_err(|e| fmt_err(0, e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, dataset_to_string(d)?.as_bytes())
}

pub fn dataset_from_str(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| fmt_err(1, "missing header"))?;
    let raw: serde_json::Value = serde_json::from_str(first).map_err(|e| fmt_err(1, e.to_string()))?;
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == DATASET_VERSION as u64 => {}
        Some(v) => return Err(fmt_err(1, format!("unsupported dataset version {v}, expected {DATASET_VERSION}"))),
        None => return Err(fmt_err(1, "header has no version")),
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| fmt_err(1, e.to_string()))?;

    let mut tuples = Vec::with_capacity(header.tuples);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| fmt_err(line_no, e.to_string()))?;
        if rec.a > 1 {
            return Err(fmt_err(line_no, format!("action flag must be 0 or 1, got {}", rec.a)));
        }
        tuples.push(TransitionTuple {
            obs0: render(&rec.state0, header.resolution),
            obs1: render(&rec.state1, header.resolution),
            state0: rec.state0,
            state1: rec.state1,
            a: rec.a,
            u: rec.u,
            state_ids: rec.state_ids,
        });
    }
    if tuples.len() != header.tuples {
        return Err(fmt_err(
            tuples.len() + 2,
            format!("truncated: header announces {} tuples, found {}", header.tuples, tuples.len()),
        ));
    }
    let d = Dataset {
        tuples,
        delta_move_mm: header.delta_move_mm,
        meta: DatasetMeta {
            seed: header.seed,
            cloth: header.cloth,
            resolution: header.resolution,
            n_variants: header.n_variants,
            perturbs_per_state: header.perturbs_per_state,
            perturb_scale_m: header.perturb_scale_m,
        },
    };
    d.validate()?;
    Ok(d)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::ArtifactMissing(path.to_path_buf()));
    }
    dataset_from_str(&fs::read_to_string(path)?)
}

/// A goal-library entry on disk (`goals/tier<k>_<seed>.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalFile {
    pub version: u32,
    pub tier: u32,
    pub seed: u64,
    pub script: FoldScript,
    pub state: ClothState,
}

pub fn save_goal(goal: &GoalFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string(goal).map_err(|e| fmt_err(1, e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

pub fn load_goal(path: &Path) -> Result<GoalFile> {
    if !path.exists() {
        return Err(Error::ArtifactMissing(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let goal: GoalFile = serde_json::from_str(&text).map_err(|e| fmt_err(e.line(), e.to_string()))?;
    if goal.version != DATASET_VERSION {
        return Err(fmt_err(1, format!("unsupported goal version {}", goal.version)));
    }
    Ok(goal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_corpus_with, CorpusConfig};

    fn small() -> Dataset {
        build_corpus_with(&CorpusConfig { n_variants: 1, perturbs_per_state: 1, ..Default::default() }).unwrap()
    }

    #[test]
    fn round_trip() {
        let d = small();
        let text = dataset_to_string(&d).unwrap();
        let back = dataset_from_str(&text).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn truncated_file() {
        let text = dataset_to_string(&small()).unwrap();
        let cut = &text[..text.len() - 40];
        assert!(matches!(dataset_from_str(cut), Err(Error::Format { .. })));
        // cut on a line boundary: the count check catches it
        let lines: Vec<&str> = text.lines().collect();
        let cut = lines[..lines.len() - 1].join("\n");
        match dataset_from_str(&cut) {
            Err(Error::Format { message, .. }) => assert!(message.contains("truncated")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_version() {
        let text = dataset_to_string(&small()).unwrap().replacen("\"version\":1", "\"version\":7", 1);
        match dataset_from_str(&text) {
            Err(Error::Format { line: 1, message }) => assert!(message.contains('7')),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flipped_flag_is_rejected() {
        let text = dataset_to_string(&small()).unwrap();
        let bad = text.replacen("\"a\":1", "\"a\":0", 1);
        assert!(matches!(dataset_from_str(&bad), Err(Error::Format { .. })));
    }
}
