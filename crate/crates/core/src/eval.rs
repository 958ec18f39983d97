//! Binary change evaluation against a gold standard.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gold labels (`true` = changed) plus free-form metadata such as language
/// and era pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldStandard {
    pub entries: BTreeMap<String, bool>,
    pub metadata: BTreeMap<String, String>,
}

impl GoldStandard {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn changed(&self) -> usize {
        self.entries.values().filter(|&&c| c).count()
    }
}

fn parse_label(token: &str) -> Option<bool> {
    match token.trim().to_ascii_lowercase().as_str() {
        "1" | "changed" => Some(true),
        "0" | "unchanged" => Some(false),
        _ => None,
    }
}

/// Parse `lemma<TAB>label` lines. `#` lines carry `key: value` metadata and a
/// leading `lemma<TAB>...` header is skipped.
pub fn parse_gold(text: &str) -> Result<GoldStandard> {
    let mut gold = GoldStandard::default();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once(':').or_else(|| meta.split_once('=')) {
                gold.metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !seen_data && fields[0].trim().eq_ignore_ascii_case("lemma") {
            seen_data = true;
            continue;
        }
        seen_data = true;
        if fields.len() < 2 {
            return Err(Error::parse(line_no, "expected lemma<TAB>label"));
        }
        let lemma = fields[0].trim();
        if lemma.is_empty() {
            return Err(Error::parse(line_no, "empty lemma"));
        }
        let label = parse_label(fields[1])
            .ok_or_else(|| Error::parse(line_no, format!("unknown label `{}`", fields[1])))?;
        if gold.entries.insert(lemma.to_string(), label).is_some() {
            return Err(Error::parse(line_no, format!("duplicate lemma `{lemma}`")));
        }
    }
    if gold.entries.is_empty() {
        return Err(Error::Empty("gold standard has no entries".into()));
    }
    Ok(gold)
}

pub fn load_gold(path: &Path) -> Result<GoldStandard> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gold(&text)
}

/// Parse a decision TSV (the change-detection export or any file whose first
/// two columns are lemma and 0/1).
pub fn parse_predictions(text: &str) -> Result<BTreeMap<String, bool>> {
    let mut out = BTreeMap::new();
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if first && fields[0].trim().eq_ignore_ascii_case("lemma") {
            first = false;
            continue;
        }
        first = false;
        if fields.len() < 2 {
            return Err(Error::parse(line_no, "expected lemma<TAB>changed"));
        }
        let label = parse_label(fields[1])
            .ok_or_else(|| Error::parse(line_no, format!("unknown label `{}`", fields[1])))?;
        if out.insert(fields[0].trim().to_string(), label).is_some() {
            return Err(Error::parse(line_no, format!("duplicate lemma `{}`", fields[0])));
        }
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<BTreeMap<String, bool>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text)
}

/// Counts with `changed` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The same outcomes with `unchanged` as the positive class.
    pub fn swap_positive(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    /// Record one outcome.
    pub fn add(&mut self, gold: bool, predicted: bool) {
        match (gold, predicted) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaOutcome {
    pub lemma: String,
    pub gold: bool,
    pub predicted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub matrix: ConfusionMatrix,
    pub outcomes: Vec<LemmaOutcome>,
    /// Predicted lemmas that have no gold label; they are not scored.
    pub ignored: Vec<String>,
}

/// Pool every gold lemma's outcome into one confusion matrix.
pub fn confusion(predictions: &BTreeMap<String, bool>, gold: &GoldStandard) -> Result<Comparison> {
    let missing: Vec<String> = gold
        .entries
        .keys()
        .filter(|l| !predictions.contains_key(*l))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    let mut matrix = ConfusionMatrix::default();
    let mut outcomes = Vec::with_capacity(gold.len());
    for (lemma, &g) in &gold.entries {
        let p = predictions[lemma];
        matrix.add(g, p);
        outcomes.push(LemmaOutcome {
            lemma: lemma.clone(),
            gold: g,
            predicted: p,
        });
    }
    let ignored = predictions
        .keys()
        .filter(|l| !gold.entries.contains_key(*l))
        .cloned()
        .collect();
    Ok(Comparison {
        matrix,
        outcomes,
        ignored,
    })
}

/// Precision, recall and F1. Any 0/0 ratio is reported as 0 and sets
/// `degenerate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

pub fn prf(m: &ConfusionMatrix) -> Prf {
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| {
        if den == 0.0 {
            degenerate = true;
            0.0
        } else {
            num / den
        }
    };
    let precision = ratio(m.tp as f64, (m.tp + m.fp) as f64);
    let recall = ratio(m.tp as f64, (m.tp + m.fn_) as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    Prf {
        precision,
        recall,
        f1,
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    pub matrix: ConfusionMatrix,
    pub metrics: Prf,
    #[serde(default)]
    pub per_lemma: Vec<LemmaOutcome>,
    #[serde(default)]
    pub ignored: Vec<String>,
}

/// JSON schema of [`Report::to_json`].
pub const REPORT_SCHEMA: &str = r#"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "semchange evaluation report",
  "type": "object",
  "required": ["metadata", "matrix", "metrics", "per_lemma", "ignored"],
  "additionalProperties": false,
  "properties": {
    "metadata": {"type": "object", "additionalProperties": {"type": "string"}},
    "matrix": {
      "type": "object",
      "required": ["tp", "tn", "fp", "fn"],
      "additionalProperties": false,
      "properties": {
        "tp": {"type": "integer", "minimum": 0},
        "tn": {"type": "integer", "minimum": 0},
        "fp": {"type": "integer", "minimum": 0},
        "fn": {"type": "integer", "minimum": 0}
      }
    },
    "metrics": {
      "type": "object",
      "required": ["precision", "recall", "f1", "degenerate"],
      "additionalProperties": false,
      "properties": {
        "precision": {"type": "number", "minimum": 0, "maximum": 1},
        "recall": {"type": "number", "minimum": 0, "maximum": 1},
        "f1": {"type": "number", "minimum": 0, "maximum": 1},
        "degenerate": {"type": "boolean"}
      }
    },
    "per_lemma": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["lemma", "gold", "predicted"],
        "additionalProperties": false,
        "properties": {
          "lemma": {"type": "string"},
          "gold": {"type": "boolean"},
          "predicted": {"type": "boolean"}
        }
      }
    },
    "ignored": {"type": "array", "items": {"type": "string"}}
  }
}
"#;

impl Report {
    pub fn new(comparison: &Comparison, metadata: BTreeMap<String, String>) -> Self {
        Report {
            metadata,
            matrix: comparison.matrix,
            metrics: prf(&comparison.matrix),
            per_lemma: comparison.outcomes.clone(),
            ignored: comparison.ignored.clone(),
        }
    }

    pub fn from_matrix(matrix: ConfusionMatrix, metadata: BTreeMap<String, String>) -> Self {
        Report {
            metadata,
            matrix,
            metrics: prf(&matrix),
            per_lemma: Vec::new(),
            ignored: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "{k}: {v}");
        }
        let m = &self.matrix;
        let _ = writeln!(out, "lemmas {}", m.total());
        let _ = writeln!(out, "TP {}  TN {}  FP {}  FN {}", m.tp, m.tn, m.fp, m.fn_);
        let p = &self.metrics;
        let _ = writeln!(
            out,
            "precision {:.3}  recall {:.3}  F1 {:.3}",
            p.precision, p.recall, p.f1
        );
        if p.degenerate {
            out.push_str("warning: a metric had a zero denominator and is reported as 0\n");
        }
        if !self.per_lemma.is_empty() {
            out.push_str("lemma\tgold\tpredicted\n");
            for o in &self.per_lemma {
                let _ = writeln!(out, "{}\t{}\t{}", o.lemma, o.gold as u8, o.predicted as u8);
            }
        }
        if !self.ignored.is_empty() {
            let _ = writeln!(out, "ignored (no gold label): {}", self.ignored.join(", "));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gold_from(labels: &[(&str, bool)]) -> GoldStandard {
        GoldStandard {
            entries: labels.iter().map(|&(l, c)| (l.to_string(), c)).collect(),
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn parses_gold_with_metadata() {
        let text = "# language: latin\n# eras=BCE/CE\nlemma\tlabel\nacerbus\t0\nadsumo\t1\n\n";
        let gold = parse_gold(text).unwrap();
        assert_eq!(gold.len(), 2);
        assert_eq!(gold.changed(), 1);
        assert_eq!(gold.metadata["language"], "latin");
        assert_eq!(gold.metadata["eras"], "BCE/CE");
    }

    #[test]
    fn gold_errors() {
        assert!(matches!(parse_gold(""), Err(Error::Empty(_))));
        assert!(matches!(parse_gold("a\t1\na\t0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_gold("a\t1\nb\tyes\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn forty_lemma_gold_with_26_changed() {
        let text: String = (0..40)
            .map(|i| format!("lemma{i:02}\t{}\n", (i < 26) as u8))
            .collect();
        let gold = parse_gold(&text).unwrap();
        assert_eq!((gold.len(), gold.changed()), (40, 26));
    }

    #[test]
    fn predictions_from_decision_export() {
        let text = "lemma\tchanged\tsense\tgenre\tt1\tt2\tdirection\tmagnitude\n\
                    a\t1\t0\t0\t0\t2\trise\t0.4\nb\t0\t-\t-\t-\t-\t-\t-\n";
        let p = parse_predictions(text).unwrap();
        assert_eq!(p["a"], true);
        assert_eq!(p["b"], false);
    }

    /// 40 lemmas, 26 changed: SCAN flags everything except two unchanged.
    fn scan_like() -> (GoldStandard, BTreeMap<String, bool>) {
        let mut labels = Vec::new();
        let mut preds = BTreeMap::new();
        for i in 0..40 {
            let name = format!("w{i:02}");
            let changed = i < 26;
            labels.push((name.clone(), changed));
            preds.insert(name, changed || i >= 28);
        }
        let gold = GoldStandard {
            entries: labels.into_iter().collect(),
            metadata: BTreeMap::new(),
        };
        (gold, preds)
    }

    #[test]
    fn reproduces_pooled_table() {
        let (gold, preds) = scan_like();
        let cmp = confusion(&preds, &gold).unwrap();
        assert_eq!(cmp.matrix, ConfusionMatrix::new(26, 2, 12, 0));
        let m = prf(&cmp.matrix);
        assert!((m.precision - 0.684).abs() < 1e-3);
        assert!((m.recall - 1.0).abs() < 1e-3);
        assert!((m.f1 - 0.813).abs() < 1e-3);
        let tr = prf(&ConfusionMatrix::new(20, 8, 6, 6));
        for v in [tr.precision, tr.recall, tr.f1] {
            assert!((v - 0.769).abs() < 1e-3);
        }
        let report = Report::new(&cmp, BTreeMap::new());
        assert!(report.to_text().contains("F1 0.813"));
    }

    #[test]
    fn perfect_and_inverted_predictions() {
        let gold = gold_from(&[("a", true), ("b", true), ("c", false), ("d", false)]);
        let same = gold.entries.clone();
        let m = confusion(&same, &gold).unwrap().matrix;
        assert_eq!((m.fp, m.fn_), (0, 0));
        let inverted = gold.entries.iter().map(|(l, &c)| (l.clone(), !c)).collect();
        let m = confusion(&inverted, &gold).unwrap().matrix;
        assert_eq!(m, ConfusionMatrix::new(0, 0, 2, 2));
    }

    #[test]
    fn missing_and_extra_predictions() {
        let gold = gold_from(&[("a", true), ("b", false), ("c", true)]);
        let mut preds = BTreeMap::from([("a".to_string(), true), ("z".to_string(), false)]);
        match confusion(&preds, &gold) {
            Err(Error::MissingPredictions(m)) => assert_eq!(m, ["b", "c"]),
            other => panic!("{other:?}"),
        }
        preds.insert("b".into(), false);
        preds.insert("c".into(), false);
        let cmp = confusion(&preds, &gold).unwrap();
        assert_eq!(cmp.ignored, ["z"]);
        assert_eq!(cmp.matrix.total(), 3);
    }

    #[test]
    fn zero_denominators() {
        let m = prf(&ConfusionMatrix::new(0, 7, 0, 0));
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(m.degenerate);
        assert!(!prf(&ConfusionMatrix::new(1, 0, 0, 0)).degenerate);
    }

    #[test]
    fn json_round_trip() {
        let (gold, preds) = scan_like();
        let cmp = confusion(&preds, &gold).unwrap();
        let report = Report::new(&cmp, BTreeMap::from([("language".into(), "latin".into())]));
        assert_eq!(Report::from_json(&report.to_json()).unwrap(), report);
        let empty = Report::from_matrix(ConfusionMatrix::new(1, 1, 1, 1), BTreeMap::new());
        assert_eq!(Report::from_json(&empty.to_json()).unwrap(), empty);
        assert!(serde_json::from_str::<serde_json::Value>(REPORT_SCHEMA).is_ok());
    }

    fn matrix() -> impl Strategy<Value = ConfusionMatrix> {
        (0usize..50, 0usize..50, 0usize..50, 0usize..50)
            .prop_map(|(a, b, c, d)| ConfusionMatrix::new(a, b, c, d))
    }

    proptest! {
        #[test]
        fn swapped_class_precision(m in matrix()) {
            // Precision over unchanged: TN / (TN + FN), read off the swapped matrix.
            let swapped = prf(&m.swap_positive());
            let direct = if m.tn + m.fn_ == 0 { 0.0 } else { m.tn as f64 / (m.tn + m.fn_) as f64 };
            prop_assert_eq!(swapped.precision, direct);
            prop_assert_eq!(m.swap_positive().swap_positive(), m);
        }

        #[test]
        fn order_invariance(labels in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40), seed in any::<u64>()) {
            let names: Vec<String> = (0..labels.len()).map(|i| format!("l{i}")).collect();
            let mut gold = GoldStandard::default();
            let mut preds = BTreeMap::new();
            for (n, &(g, p)) in names.iter().zip(&labels) {
                gold.entries.insert(n.clone(), g);
                preds.insert(n.clone(), p);
            }
            let a = confusion(&preds, &gold).unwrap().matrix;
            // Rename lemmas in a seed-dependent order.
            let mut shuffled_gold = GoldStandard::default();
            let mut shuffled_preds = BTreeMap::new();
            for (i, &(g, p)) in labels.iter().enumerate() {
                let name = format!("m{}", (i as u64).wrapping_mul(seed | 1) % 1_000_003);
                prop_assume!(!shuffled_gold.entries.contains_key(&name));
                shuffled_gold.entries.insert(name.clone(), g);
                shuffled_preds.insert(name, p);
            }
            let b = confusion(&shuffled_preds, &shuffled_gold).unwrap().matrix;
            prop_assert_eq!(a, b);
            prop_assert_eq!(prf(&a), prf(&b));
        }
    }
}
