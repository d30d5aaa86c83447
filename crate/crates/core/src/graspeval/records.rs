//! Trial records: CSV and YAML forms, and balanced per-object selection.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::GraspLabel;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::textfmt::{from_yaml, sig9, to_yaml};

pub const TRIAL_RECORDS_VERSION: u32 = 1;

const CSV_HEADER: [&str; 8] =
    ["scene_id", "object_id", "grasp_id", "sim_label", "real_label", "fail_reason", "epsilon", "evaluator"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub scene_id: String,
    pub object_id: String,
    pub grasp_id: usize,
    pub sim_label: bool,
    #[serde(default)]
    pub real_label: Option<bool>,
    #[serde(default)]
    pub fail_reason: Option<GraspLabel>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub evaluator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecordsDocument {
    pub version: u32,
    #[serde(default)]
    pub records: Vec<TrialRecord>,
}

fn check(records: &[TrialRecord]) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        if !(r.epsilon.is_finite() && r.epsilon >= 0.0) {
            return Err(Error::schema(format!("records[{i}].epsilon"), "must be a non-negative number"));
        }
    }
    Ok(())
}

pub fn parse_records_yaml(text: &str) -> Result<Vec<TrialRecord>> {
    let doc: TrialRecordsDocument = from_yaml(text)?;
    if doc.version != TRIAL_RECORDS_VERSION {
        return Err(Error::schema(
            "version",
            format!("unsupported version {}, expected {TRIAL_RECORDS_VERSION}", doc.version),
        ));
    }
    check(&doc.records)?;
    Ok(doc.records)
}

pub fn records_to_yaml(records: &[TrialRecord]) -> String {
    let records = records.iter().map(|r| TrialRecord { epsilon: sig9(r.epsilon), ..r.clone() }).collect();
    to_yaml(&TrialRecordsDocument { version: TRIAL_RECORDS_VERSION, records })
}

fn label_text(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn parse_label(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Labels are written as 1 (success) and 0 (failure).
pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        let grasp_id = r.grasp_id.to_string();
        let epsilon = sig9(r.epsilon).to_string();
        w.write_record([
            r.scene_id.as_str(),
            r.object_id.as_str(),
            grasp_id.as_str(),
            label_text(r.sim_label),
            r.real_label.map_or("", label_text),
            r.fail_reason.map_or("", GraspLabel::as_str),
            epsilon.as_str(),
            r.evaluator.as_str(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Reads records by header name. `scene_id`, `object_id`, `grasp_id` and
/// `sim_label` are required; the other columns may be absent or empty.
pub fn parse_records_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &'static str| col(name).ok_or_else(|| Error::schema(name, "required column is missing"));
    let (c_scene, c_object, c_grasp, c_sim) = (need("scene_id")?, need("object_id")?, need("grasp_id")?, need("sim_label")?);
    let (c_real, c_reason, c_eps, c_eval) = (col("real_label"), col("fail_reason"), col("epsilon"), col("evaluator"));

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let at = |c: usize| row.get(c).unwrap_or("");
        let opt = |c: Option<usize>| c.map(at).filter(|s| !s.is_empty());
        let path = |name: &str| format!("row {}: {name}", i + 1);
        let grasp_id =
            at(c_grasp).parse::<usize>().map_err(|_| Error::schema(path("grasp_id"), "expected a non-negative integer"))?;
        let sim_label = parse_label(at(c_sim)).ok_or_else(|| Error::schema(path("sim_label"), "expected 0 or 1"))?;
        let real_label = match opt(c_real) {
            None => None,
            Some(s) => Some(parse_label(s).ok_or_else(|| Error::schema(path("real_label"), "expected 0, 1 or empty"))?),
        };
        let fail_reason = match opt(c_reason) {
            None => None,
            Some(s) => Some(s.parse::<GraspLabel>().map_err(|e| Error::schema(path("fail_reason"), e))?),
        };
        let epsilon = match opt(c_eps) {
            None => 0.0,
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Error::schema(path("epsilon"), "expected a non-negative number"))?,
        };
        out.push(TrialRecord {
            scene_id: at(c_scene).to_string(),
            object_id: at(c_object).to_string(),
            grasp_id,
            sim_label,
            real_label,
            fail_reason,
            epsilon,
            evaluator: opt(c_eval).unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes CSV for a `.csv` extension, YAML otherwise.
pub fn save_records(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = if is_csv(path) { records_to_csv(records) } else { records_to_yaml(records) };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if is_csv(path) {
        parse_records_csv(&text)
    } else {
        parse_records_yaml(&text)
    }
}

/// Per (scene, object): `ceil(c/2)` simulated successes and `floor(c/2)`
/// failures, topping up from the other class when one runs short. Picks
/// are random per `seed`; output keeps group order, then input order.
pub fn select_balanced(records: &[TrialRecord], per_object_count: usize, seed: u64) -> Result<Vec<TrialRecord>> {
    if per_object_count == 0 {
        return Err(Error::invalid("per_object_count", "must be at least 1"));
    }
    let mut groups: BTreeMap<(&str, &str), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let g = groups.entry((r.scene_id.as_str(), r.object_id.as_str())).or_default();
        if r.sim_label {
            g.0.push(i);
        } else {
            g.1.push(i);
        }
    }
    let c = per_object_count;
    let mut out = Vec::new();
    for (gi, (succ, fail)) in groups.values().enumerate() {
        let mut take_s = c.div_ceil(2).min(succ.len());
        let take_f = (c - take_s).min(fail.len());
        take_s = (c - take_f).min(succ.len());
        let mut rng = seeded(derive_seed(seed, gi as u64));
        let mut picked: Vec<usize> = sample(&mut rng, succ.len(), take_s).into_iter().map(|k| succ[k]).collect();
        picked.extend(sample(&mut rng, fail.len(), take_f).into_iter().map(|k| fail[k]));
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| records[i].clone()));
    }
    Ok(out)
}
