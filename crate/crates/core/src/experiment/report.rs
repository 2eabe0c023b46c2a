use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{QaKind, ReferenceKind};
use crate::metrics::{score_answers, CaptionScore};

use super::manifest::{ItemStatus, RunManifest};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report has no rows")]
    EmptyReport,
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Bleu1,
    Rouge,
    Cider,
    Cosine,
}

impl MetricName {
    pub const ALL: [MetricName; 4] = [MetricName::Bleu1, MetricName::Rouge, MetricName::Cider, MetricName::Cosine];

    pub fn label(self) -> &'static str {
        match self {
            MetricName::Bleu1 => "BLEU1",
            MetricName::Rouge => "ROUGE",
            MetricName::Cider => "CIDEr",
            MetricName::Cosine => "COSINE",
        }
    }

    fn pick(self, s: &CaptionScore) -> f64 {
        match self {
            MetricName::Bleu1 => s.bleu1,
            MetricName::Rouge => s.rouge_l,
            MetricName::Cider => s.cider,
            MetricName::Cosine => s.cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionReportRow {
    pub system: String,
    pub description_kind: ReferenceKind,
    pub metric: MetricName,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReportRow {
    pub system: String,
    pub visual_on: bool,
    pub contextual_on: bool,
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportRows {
    Captions(Vec<CaptionReportRow>),
    Qa(Vec<QaReportRow>),
}

impl ReportRows {
    pub fn len(&self) -> usize {
        match self {
            ReportRows::Captions(r) => r.len(),
            ReportRows::Qa(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "markdown",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}` (expected json, csv or markdown)")),
        }
    }
}

/// Aggregated rows plus the digest of the manifest they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: ReportRows,
    pub manifest_digest: String,
    pub mode: String,
    pub generation_backend: String,
    pub qa_backend: Option<String>,
    pub caption_aggregation: String,
    pub qa_aggregation: String,
}

impl Report {
    pub fn new(rows: ReportRows, manifest: &RunManifest) -> Self {
        Report {
            rows,
            manifest_digest: manifest.digest(),
            mode: manifest.mode.as_str().to_owned(),
            generation_backend: manifest.generation_backend.clone(),
            qa_backend: manifest.qa_backend.clone(),
            caption_aggregation: manifest.conventions.caption_aggregation.clone(),
            qa_aggregation: manifest.conventions.qa_aggregation.clone(),
        }
    }
}

fn system_name(manifest: &RunManifest) -> String {
    manifest.mode.label().to_owned()
}

/// Caption rows from a manifest: for every description kind and metric, the
/// mean over scored artworks. Kinds no artwork could be scored on are left
/// out.
pub fn caption_rows(manifest: &RunManifest) -> Vec<CaptionReportRow> {
    let system = system_name(manifest);
    let mut rows = Vec::new();
    for kind in ReferenceKind::ALL {
        let scores: Vec<&CaptionScore> = manifest
            .caption_items
            .iter()
            .filter(|item| item.status == ItemStatus::Ok)
            .filter_map(|item| item.scores.get(&kind))
            .collect();
        if scores.is_empty() {
            continue;
        }
        for metric in MetricName::ALL {
            let sum: f64 = scores.iter().map(|s| metric.pick(s)).sum();
            rows.push(CaptionReportRow {
                system: system.clone(),
                description_kind: kind,
                metric,
                value: sum / scores.len() as f64,
            });
        }
    }
    rows
}

/// The QA row from a manifest: accuracy and F1 over every question, with
/// failed questions counted as empty predictions.
pub fn qa_rows(manifest: &RunManifest) -> Vec<QaReportRow> {
    let predictions: Vec<&str> = manifest.qa_items.iter().map(|q| q.prediction()).collect();
    let golds: Vec<&str> = manifest.qa_items.iter().map(|q| q.gold.as_str()).collect();
    let Ok(score) = score_answers(&predictions, &golds) else {
        return Vec::new();
    };
    let kinds = manifest.kinds.clone().unwrap_or_default();
    vec![QaReportRow {
        system: system_name(manifest),
        visual_on: kinds.contains(&QaKind::Visual),
        contextual_on: kinds.contains(&QaKind::Contextual),
        accuracy: score.accuracy,
        f1: score.f1,
    }]
}

/// Renders `report` in one format.
///
/// CSV columns are `system,description_kind,metric,value` for caption
/// reports and `system,visual,contextual,accuracy,f1` for QA reports.
pub fn render(report: &Report, format: ReportFormat) -> Result<String, ReportError> {
    if report.rows.is_empty() {
        return Err(ReportError::EmptyReport);
    }
    match format {
        ReportFormat::Json => Ok(render_json(report)),
        ReportFormat::Csv => render_csv(&report.rows),
        ReportFormat::Markdown => Ok(render_markdown(report)),
    }
}

fn render_json(report: &Report) -> String {
    let (table, rows, aggregation) = match &report.rows {
        ReportRows::Captions(r) => ("captions", serde_json::to_value(r), &report.caption_aggregation),
        ReportRows::Qa(r) => ("qa", serde_json::to_value(r), &report.qa_aggregation),
    };
    let value = serde_json::json!({
        "table": table,
        "manifest_digest": report.manifest_digest,
        "mode": report.mode,
        "generation_backend": report.generation_backend,
        "qa_backend": report.qa_backend,
        "aggregation": aggregation,
        "rows": rows.expect("rows serialize"),
    });
    let mut out = serde_json::to_string_pretty(&value).expect("report serializes");
    out.push('\n');
    out
}

fn render_csv(rows: &ReportRows) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match rows {
        ReportRows::Captions(rows) => {
            w.write_record(["system", "description_kind", "metric", "value"])?;
            for r in rows {
                let value = r.value.to_string();
                w.write_record([r.system.as_str(), r.description_kind.as_str(), metric_key(r.metric), &value])?;
            }
        }
        ReportRows::Qa(rows) => {
            w.write_record(["system", "visual", "contextual", "accuracy", "f1"])?;
            for r in rows {
                w.write_record([
                    r.system.clone(),
                    r.visual_on.to_string(),
                    r.contextual_on.to_string(),
                    r.accuracy.to_string(),
                    r.f1.to_string(),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn metric_key(m: MetricName) -> &'static str {
    match m {
        MetricName::Bleu1 => "bleu1",
        MetricName::Rouge => "rouge",
        MetricName::Cider => "cider",
        MetricName::Cosine => "cosine",
    }
}

fn render_markdown(report: &Report) -> String {
    let mut out = String::new();
    match &report.rows {
        ReportRows::Captions(rows) => {
            out.push_str("| System | Description | BLEU1 | ROUGE | CIDEr | COSINE |\n");
            out.push_str("|---|---|---:|---:|---:|---:|\n");
            let mut systems: Vec<&str> = Vec::new();
            for r in rows {
                if !systems.contains(&r.system.as_str()) {
                    systems.push(&r.system);
                }
            }
            for system in systems {
                for kind in ReferenceKind::ALL {
                    let cells: Vec<Option<f64>> = MetricName::ALL
                        .iter()
                        .map(|m| {
                            rows.iter()
                                .find(|r| r.system == system && r.description_kind == kind && r.metric == *m)
                                .map(|r| r.value)
                        })
                        .collect();
                    if cells.iter().all(Option::is_none) {
                        continue;
                    }
                    out.push_str(&format!("| {system} | {} |", kind.label()));
                    for cell in cells {
                        match cell {
                            Some(v) => out.push_str(&format!(" {v:.3} |")),
                            None => out.push_str(" - |"),
                        }
                    }
                    out.push('\n');
                }
            }
        }
        ReportRows::Qa(rows) => {
            out.push_str("| System | Visual | Contextual | Accuracy | F1 score |\n");
            out.push_str("|---|:---:|:---:|---:|---:|\n");
            let mark = |on: bool| if on { "✓" } else { "" };
            for r in rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {:.3} | {:.3} |\n",
                    r.system,
                    mark(r.visual_on),
                    mark(r.contextual_on),
                    r.accuracy,
                    r.f1
                ));
            }
        }
    }
    out.push_str(&format!("\nManifest digest: `{}`\n", report.manifest_digest));
    out
}

/// Writes `report.{json,csv,md}` and `manifest.json` into
/// `<out_root>/runs/<run-id>/` and returns that directory.
pub fn write_run(out_root: impl AsRef<Path>, report: &Report, manifest: &RunManifest) -> Result<PathBuf, ReportError> {
    if report.rows.is_empty() {
        return Err(ReportError::EmptyReport);
    }
    let dir = out_root.as_ref().join("runs").join(manifest.run_id());
    std::fs::create_dir_all(&dir)?;
    for format in ReportFormat::ALL {
        write_atomic(&dir.join(format!("report.{}", format.extension())), &render(report, format)?)?;
    }
    let mut manifest_json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    manifest_json.push('\n');
    write_atomic(&dir.join("manifest.json"), &manifest_json)?;
    Ok(dir)
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    use std::io::Write;
    let dir = path.parent().expect("report path has a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::manifest::{CaptionItem, RunKind};
    use crate::textgen::{DecodingParams, PromptTemplateKind};
    use std::collections::BTreeMap;

    fn manifest() -> RunManifest {
        let mode = PromptTemplateKind::General;
        let mut m = RunManifest::new(RunKind::Captions, "d".into(), mode, "fixture", DecodingParams::for_mode(mode));
        for (id, v) in [("a", 0.25), ("b", 0.75)] {
            let score = CaptionScore { bleu1: v, rouge_l: v / 2.0, cider: 0.0, cosine: 1.0 };
            let mut scores = BTreeMap::new();
            for kind in ReferenceKind::ALL {
                scores.insert(kind, score);
            }
            m.caption_items.push(CaptionItem {
                artwork_id: id.into(),
                status: ItemStatus::Ok,
                error: None,
                candidate: Some("x".into()),
                scores,
            });
        }
        m
    }

    #[test]
    fn caption_rows_are_macro_averages() {
        let rows = caption_rows(&manifest());
        assert_eq!(rows.len(), 12);
        let bleu_all =
            rows.iter().find(|r| r.description_kind == ReferenceKind::All && r.metric == MetricName::Bleu1).unwrap();
        assert_eq!(bleu_all.value, 0.5);
        assert_eq!(bleu_all.system, "General");
    }

    #[test]
    fn markdown_has_metric_labels_and_kinds() {
        let m = manifest();
        let report = Report::new(ReportRows::Captions(caption_rows(&m)), &m);
        let md = render(&report, ReportFormat::Markdown).unwrap();
        assert!(md.contains("BLEU1 | ROUGE | CIDEr | COSINE"));
        for label in ["Visual", "Contextual", "All"] {
            assert!(md.contains(&format!("| General | {label} |")));
        }
    }

    #[test]
    fn csv_parses_back() {
        let m = manifest();
        let rows = caption_rows(&m);
        let report = Report::new(ReportRows::Captions(rows.clone()), &m);
        let text = render(&report, ReportFormat::Csv).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let back: Vec<CaptionReportRow> = reader.deserialize().collect::<Result<_, _>>().unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn empty_rows_are_rejected() {
        let m = manifest();
        let report = Report::new(ReportRows::Qa(Vec::new()), &m);
        for format in ReportFormat::ALL {
            assert!(matches!(render(&report, format), Err(ReportError::EmptyReport)));
        }
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(write_run(dir.path(), &report, &m), Err(ReportError::EmptyReport)));
    }

    #[test]
    fn json_embeds_digest_and_no_timestamp() {
        let m = manifest();
        let report = Report::new(ReportRows::Captions(caption_rows(&m)), &m);
        let json: serde_json::Value = serde_json::from_str(&render(&report, ReportFormat::Json).unwrap()).unwrap();
        assert_eq!(json["manifest_digest"], m.digest());
        assert!(json.get("timestamp").is_none());
        assert_eq!(json["rows"].as_array().unwrap().len(), 12);
    }

    #[test]
    fn write_run_layout() {
        let m = manifest();
        let report = Report::new(ReportRows::Captions(caption_rows(&m)), &m);
        let dir = tempfile::tempdir().unwrap();
        let run_dir = write_run(dir.path(), &report, &m).unwrap();
        assert!(run_dir.starts_with(dir.path().join("runs")));
        for f in ["report.json", "report.csv", "report.md", "manifest.json"] {
            assert!(run_dir.join(f).is_file(), "{f}");
        }
        let back: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(caption_rows(&back), caption_rows(&m));
    }
}
