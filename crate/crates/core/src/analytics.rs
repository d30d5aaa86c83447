//! Simulation-versus-real statistics. The simulator is the classifier and the
//! real outcome the ground truth; label 1 is a successful grasp.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graspeval::TrialRecord;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    fn add(&mut self, sim: bool, real: bool) {
        match (sim, real) {
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (true, true) => self.tp += 1,
        }
    }

    fn tally<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> (ConfusionMatrix, u64) {
        let mut cm = ConfusionMatrix::default();
        let mut unpaired = 0;
        for r in records {
            match r.real_label {
                Some(real) => cm.add(r.sim_label, real),
                None => unpaired += 1,
            }
        }
        (cm, unpaired)
    }
}

/// Matrix over the records that carry a real label.
pub fn confusion_matrix(records: &[TrialRecord]) -> Result<ConfusionMatrix> {
    let (cm, _) = ConfusionMatrix::tally(records);
    if cm.total() == 0 {
        return Err(Error::NoPairedRecords);
    }
    Ok(cm)
}

/// Exact ratio shown as a percentage rounded half-up to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Percentage {
    pub num: u64,
    pub den: u64,
}

impl Percentage {
    pub fn value(&self) -> f64 {
        100.0 * self.num as f64 / self.den as f64
    }

    /// `round_half_up(10000 * num / den)` in integer arithmetic.
    pub fn hundredths(&self) -> u64 {
        let (n, d) = (self.num as u128 * 10_000, self.den as u128);
        ((2 * n + d) / (2 * d)) as u64
    }
}

impl fmt::Display for Percentage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        write!(f, "{}.{:02}%", h / 100, h % 100)
    }
}

impl Serialize for Percentage {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

pub fn precision(cm: &ConfusionMatrix) -> Result<Percentage> {
    match cm.tp + cm.fp {
        0 => Err(Error::UndefinedMetric("precision")),
        den => Ok(Percentage { num: cm.tp, den }),
    }
}

pub fn recall(cm: &ConfusionMatrix) -> Result<Percentage> {
    match cm.tp + cm.fn_ {
        0 => Err(Error::UndefinedMetric("recall")),
        den => Ok(Percentage { num: cm.tp, den }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub matrix: ConfusionMatrix,
    pub unpaired: u64,
    pub precision: Option<Percentage>,
    pub recall: Option<Percentage>,
    /// Simulated failure reasons, all records counted.
    pub fail_reasons: BTreeMap<String, u64>,
}

impl Section {
    fn of<'a>(records: impl IntoIterator<Item = &'a TrialRecord> + Clone) -> Section {
        let (matrix, unpaired) = ConfusionMatrix::tally(records.clone());
        let mut fail_reasons = BTreeMap::new();
        for r in records {
            if let Some(reason) = r.fail_reason {
                *fail_reasons.entry(reason.to_string()).or_insert(0) += 1;
            }
        }
        Section {
            matrix,
            unpaired,
            precision: precision(&matrix).ok(),
            recall: recall(&matrix).ok(),
            fail_reasons,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectReport {
    pub object_id: String,
    #[serde(flatten)]
    pub section: Section,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneReport {
    pub scene_id: String,
    #[serde(flatten)]
    pub section: Section,
    pub objects: Vec<ObjectReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenes: Vec<SceneReport>,
    pub overall: Section,
}

/// Per-scene and per-object breakdown, ordered by scene id then object id.
pub fn report(records: &[TrialRecord]) -> Report {
    let mut by_scene: BTreeMap<&str, BTreeMap<&str, Vec<&TrialRecord>>> = BTreeMap::new();
    for r in records {
        by_scene.entry(&r.scene_id).or_default().entry(&r.object_id).or_default().push(r);
    }
    let scenes = by_scene
        .into_iter()
        .map(|(scene_id, objects)| SceneReport {
            scene_id: scene_id.to_string(),
            section: Section::of(objects.values().flatten().copied()),
            objects: objects
                .iter()
                .map(|(object_id, rs)| ObjectReport {
                    object_id: object_id.to_string(),
                    section: Section::of(rs.iter().copied()),
                })
                .collect(),
        })
        .collect();
    Report { scenes, overall: Section::of(records.iter()) }
}

fn metric(p: &Option<Percentage>) -> String {
    p.map_or_else(|| "undefined".to_string(), |p| p.to_string())
}

fn text_section(out: &mut String, title: &str, s: &Section, indent: &str) {
    let m = &s.matrix;
    let _ = writeln!(out, "{indent}{title} ({} paired, {} unpaired)", m.total(), s.unpaired);
    let _ = writeln!(out, "{indent}            real 0  real 1");
    let _ = writeln!(out, "{indent}  sim 0   {:>7} {:>7}", m.tn, m.fn_);
    let _ = writeln!(out, "{indent}  sim 1   {:>7} {:>7}", m.fp, m.tp);
    let _ = writeln!(out, "{indent}  Precision: {} Recall: {}", metric(&s.precision), metric(&s.recall));
    if !s.fail_reasons.is_empty() {
        let hist: Vec<String> = s.fail_reasons.iter().map(|(k, v)| format!("{k} {v}")).collect();
        let _ = writeln!(out, "{indent}  Fail reasons: {}", hist.join(", "));
    }
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for scene in &self.scenes {
            text_section(&mut out, &format!("Scene {}", scene.scene_id), &scene.section, "");
            for obj in &scene.objects {
                text_section(&mut out, &format!("Object {}", obj.object_id), &obj.section, "    ");
            }
            out.push('\n');
        }
        text_section(&mut out, "Overall", &self.overall, "");
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    /// One row per scene, object and the overall total.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = ["scope", "scene_id", "object_id", "tn", "fp", "fn", "tp", "unpaired", "precision", "recall"];
        w.write_record(header).expect("in-memory write");
        let mut row = |scope: &str, scene: &str, object: &str, s: &Section| {
            let m = &s.matrix;
            let pct = |p: &Option<Percentage>| p.map_or(String::new(), |p| p.to_string().trim_end_matches('%').to_string());
            let fields = [
                scope.to_string(),
                scene.to_string(),
                object.to_string(),
                m.tn.to_string(),
                m.fp.to_string(),
                m.fn_.to_string(),
                m.tp.to_string(),
                s.unpaired.to_string(),
                pct(&s.precision),
                pct(&s.recall),
            ];
            w.write_record(&fields).expect("in-memory write");
        };
        for scene in &self.scenes {
            row("scene", &scene.scene_id, "", &scene.section);
            for obj in &scene.objects {
                row("object", &scene.scene_id, &obj.object_id, &obj.section);
            }
        }
        row("overall", "", "", &self.overall);
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graspeval::GraspLabel;
    use proptest::prelude::*;

    fn cell(scene: &str, sim: bool, real: bool, n: usize, start: usize) -> Vec<TrialRecord> {
        (0..n)
            .map(|i| TrialRecord {
                scene_id: scene.into(),
                object_id: format!("obj{}", (start + i) % 6),
                grasp_id: start + i,
                sim_label: sim,
                real_label: Some(real),
                fail_reason: (!sim).then_some(GraspLabel::FailCannotHold),
                epsilon: 0.0,
                evaluator: String::new(),
            })
            .collect()
    }

    /// Matrix counts in the order sim0/real0, sim0/real1, sim1/real0, sim1/real1.
    fn scene(id: &str, counts: [usize; 4]) -> Vec<TrialRecord> {
        let mut out = Vec::new();
        let mut start = 0;
        for (k, (sim, real)) in [(false, false), (false, true), (true, false), (true, true)].into_iter().enumerate() {
            out.extend(cell(id, sim, real, counts[k], start));
            start += counts[k];
        }
        out
    }

    #[test]
    fn figure_six_percentages() {
        let a = confusion_matrix(&scene("a", [20, 10, 9, 21])).unwrap();
        assert_eq!(a, ConfusionMatrix { tn: 20, fn_: 10, fp: 9, tp: 21 });
        assert_eq!(precision(&a).unwrap().to_string(), "70.00%");
        assert_eq!(recall(&a).unwrap().to_string(), "67.74%");
        let b = confusion_matrix(&scene("b", [25, 12, 13, 10])).unwrap();
        assert_eq!(b.total(), 60);
        assert_eq!(precision(&b).unwrap().to_string(), "43.48%");
        assert_eq!(recall(&b).unwrap().to_string(), "45.45%");
    }

    #[test]
    fn half_up_rounding() {
        // 1/8 = 12.5% exactly; 1/16 = 6.25%; 1/32 = 3.125% rounds up
        assert_eq!(Percentage { num: 1, den: 32 }.to_string(), "3.13%");
        assert_eq!(Percentage { num: 1, den: 16 }.to_string(), "6.25%");
        assert_eq!(Percentage { num: 1, den: 1 }.to_string(), "100.00%");
        assert_eq!(Percentage { num: 0, den: 7 }.to_string(), "0.00%");
        // 2/3 = 66.666.. -> 66.67
        assert_eq!(Percentage { num: 2, den: 3 }.to_string(), "66.67%");
    }

    #[test]
    fn undefined_and_empty() {
        let cm = ConfusionMatrix { tn: 3, fp: 0, fn_: 2, tp: 0 };
        assert!(matches!(precision(&cm), Err(Error::UndefinedMetric("precision"))));
        assert_eq!(recall(&cm).unwrap().to_string(), "0.00%");
        assert!(matches!(confusion_matrix(&[]), Err(Error::NoPairedRecords)));
        let mut unlabelled = cell("a", true, true, 3, 0);
        unlabelled.iter_mut().for_each(|r| r.real_label = None);
        assert!(matches!(confusion_matrix(&unlabelled), Err(Error::NoPairedRecords)));
    }

    #[test]
    fn report_structure_and_renderings() {
        let mut records = scene("b", [25, 12, 13, 10]);
        records.extend(scene("a", [20, 10, 9, 21]));
        let mut extra = cell("a", false, false, 2, 100);
        extra.iter_mut().for_each(|r| r.real_label = None);
        records.extend(extra);
        let rep = report(&records);
        assert_eq!(rep.scenes.len(), 2);
        assert_eq!(rep.scenes[0].scene_id, "a");
        assert_eq!(rep.scenes[0].section.unpaired, 2);
        assert_eq!(rep.scenes[0].section.matrix, confusion_matrix(&scene("a", [20, 10, 9, 21])).unwrap());
        assert_eq!(rep.scenes[1].objects.len(), 6);
        assert_eq!(rep.overall.matrix.total(), 120);
        let text = rep.to_text();
        for s in ["Precision: 70.00% Recall: 67.74%", "Precision: 43.48% Recall: 45.45%", "Overall (120 paired, 2 unpaired)"] {
            assert!(text.contains(s), "{text}");
        }
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(json["scenes"][0]["precision"], "70.00%");
        assert_eq!(json["scenes"][1]["matrix"]["fn"], 12);
        let csv = rep.to_csv();
        assert!(csv.lines().any(|l| l == "scene,a,,20,9,10,21,2,70.00,67.74"), "{csv}");
        assert_eq!(csv.lines().count(), 1 + 2 + 12 + 1);
    }

    proptest! {
        #[test]
        fn permutation_and_bounds(counts in prop::array::uniform4(0usize..30), seed in any::<u64>()) {
            let records = scene("s", counts);
            prop_assume!(!records.is_empty());
            let mut shuffled = records.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut crate::rng::seeded(seed));
            prop_assert_eq!(report(&records), report(&shuffled));
            let cm = confusion_matrix(&records).unwrap();
            for p in [precision(&cm), recall(&cm)].into_iter().flatten() {
                let h = p.hundredths();
                prop_assert!(h <= 10_000);
                // independent check: |h/100 - exact| <= 0.005 with ties upward
                let exact = 100.0 * p.num as f64 / p.den as f64;
                prop_assert!((h as f64 / 100.0 - exact).abs() <= 0.005 + 1e-9);
            }
        }
    }
}
