//! Report document and its JSON / CSV renderings.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use kaonbell::inequalities::{EfficiencyScanResult, InequalityReport};
use kaonbell::lhv::{EnsembleStatistics, FlavorEstimates, OutcomeCounts};
use serde::Serialize;

use crate::config::{Format, RunConfig};

#[derive(Debug, Clone, Serialize)]
pub struct ProbabilityRow {
    pub t: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbabilitySeries {
    pub pair: String,
    pub rows: Vec<ProbabilityRow>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entry {
    Inequality(InequalityReport),
    Contradiction {
        statement: String,
        contradicted: bool,
    },
    EfficiencyScan(EfficiencyScanResult),
    Probabilities(ProbabilitySeries),
    EnsembleStatistics(EnsembleStatistics),
    SampleCounts(OutcomeCounts),
    FlavorEstimates(FlavorEstimates),
    ModelBuild(ModelBuild),
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelBuild {
    pub construction: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
    pub values: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub tool: &'static str,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub command: String,
    pub config: RunConfig,
    pub entries: Vec<Entry>,
    pub assumption_notes: Vec<String>,
}

impl ReportDocument {
    pub fn new(command: &str, config: &RunConfig, reproducible: bool) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            generated_at: (!reproducible).then(|| chrono::Utc::now().to_rfc3339()),
            command: command.to_owned(),
            config: config.clone(),
            entries: Vec::new(),
            assumption_notes: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: Entry) {
        let notes: &[String] = match &entry {
            Entry::Inequality(r) => &r.assumption_notes,
            Entry::ModelBuild(b) => &b.notes,
            _ => &[],
        };
        for note in notes {
            if !self.assumption_notes.contains(note) {
                self.assumption_notes.push(note.clone());
            }
        }
        self.entries.push(entry);
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }

    /// Homogeneous documents get a dedicated table; mixed ones fall back to
    /// a long format with one row per scalar.
    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let all = |f: fn(&Entry) -> bool| !self.entries.is_empty() && self.entries.iter().all(f);
        if all(|e| matches!(e, Entry::Probabilities(_))) {
            w.write_record(["pair", "t", "probability"])?;
            for e in &self.entries {
                if let Entry::Probabilities(s) = e {
                    for r in &s.rows {
                        w.write_record([s.pair.clone(), real(r.t), real(r.probability)])?;
                    }
                }
            }
        } else if all(|e| matches!(e, Entry::EfficiencyScan(_))) {
            w.write_record([
                "theta",
                "threshold_eta",
                "a",
                "b",
                "a_prime",
                "b_prime",
                "ch_value_at_eta",
            ])?;
            for e in &self.entries {
                if let Entry::EfficiencyScan(s) = e {
                    let mut record = vec![real(s.state_angle), real(s.threshold_eta)];
                    record.extend(s.optimal_settings.iter().map(|v| real(*v)));
                    record.push(real(s.ch_value_at_eta));
                    w.write_record(record)?;
                }
            }
        } else {
            w.write_record(["entry", "kind", "name", "field", "value"])?;
            for (k, entry) in self.entries.iter().enumerate() {
                for row in entry_rows(entry) {
                    w.write_record([k.to_string(), row.0, row.1, row.2, row.3])?;
                }
            }
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        match format {
            Format::Json => Ok(self.to_json()),
            Format::Csv => self.to_csv(),
        }
    }
}

/// 17 significant digits.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

type Row = (String, String, String, String);

fn row(kind: &str, name: &str, field: &str, value: String) -> Row {
    (kind.to_owned(), name.to_owned(), field.to_owned(), value)
}

fn entry_rows(entry: &Entry) -> Vec<Row> {
    let mut out = Vec::new();
    match entry {
        Entry::Inequality(r) => {
            let k = "inequality";
            out.push(row(k, &r.name, "lhs", real(r.lhs)));
            out.push(row(k, &r.name, "rhs", real(r.rhs)));
            out.push(row(k, &r.name, "margin", real(r.margin)));
            out.push(row(k, &r.name, "violated", r.violated.to_string()));
            for (key, v) in r.details.iter() {
                out.push(row(k, &r.name, key, real(*v)));
            }
        }
        Entry::Contradiction {
            statement,
            contradicted,
        } => out.push(row(
            "contradiction",
            statement,
            "contradicted",
            contradicted.to_string(),
        )),
        Entry::EfficiencyScan(s) => {
            let name = real(s.state_angle);
            let k = "efficiency_scan";
            out.push(row(k, &name, "theta", real(s.state_angle)));
            out.push(row(k, &name, "threshold_eta", real(s.threshold_eta)));
            for (field, v) in ["a", "b", "a_prime", "b_prime"]
                .iter()
                .zip(s.optimal_settings)
            {
                out.push(row(k, &name, field, real(v)));
            }
        }
        Entry::Probabilities(series) => {
            for r in &series.rows {
                out.push(row(
                    "probability",
                    &series.pair,
                    &real(r.t),
                    real(r.probability),
                ));
            }
        }
        Entry::EnsembleStatistics(st) => {
            let name = format!("{}|{}", st.settings.side1, st.settings.side2);
            let k = "ensemble_statistics";
            out.push(row(
                k,
                &name,
                "detected_fraction",
                real(st.detected_fraction),
            ));
            for c in &st.full_joint {
                let field = format!(
                    "full:{}|{}",
                    outcome_label(&c.side1),
                    outcome_label(&c.side2)
                );
                out.push(row(k, &name, &field, real(c.probability)));
            }
            for c in &st.detected_joint {
                let field = format!(
                    "detected:{}|{}",
                    outcome_label(&c.side1),
                    outcome_label(&c.side2)
                );
                out.push(row(k, &name, &field, real(c.probability)));
            }
        }
        Entry::SampleCounts(counts) => {
            let name = format!("{}|{}", counts.settings.side1, counts.settings.side2);
            for c in &counts.cells {
                let field = format!("{}|{}", outcome_label(&c.side1), outcome_label(&c.side2));
                out.push(row("sample_counts", &name, &field, c.count.to_string()));
            }
        }
        Entry::FlavorEstimates(e) => {
            let k = "flavor_estimates";
            out.push(row(k, "asymmetry", "semileptonic", real(e.semileptonic)));
            out.push(row(k, "asymmetry", "full_ensemble", real(e.full_ensemble)));
            out.push(row(k, "asymmetry", "bias", real(e.bias)));
        }
        Entry::ModelBuild(b) => {
            out.push(row(
                "model_build",
                &b.construction,
                "status",
                b.status.clone(),
            ));
            if let Some(p) = &b.model_path {
                out.push(row("model_build", &b.construction, "model_path", p.clone()));
            }
            for (key, v) in &b.values {
                out.push(row("model_build", &b.construction, key, real(*v)));
            }
        }
    }
    out
}

fn outcome_label(o: &kaonbell::lhv::Outcome) -> String {
    use kaonbell::lhv::Outcome;
    match o {
        Outcome::NoDetect => "no_detect".into(),
        Outcome::Plus => "+".into(),
        Outcome::Minus => "-".into(),
        Outcome::Decay { channel, bucket } => format!("{}@{bucket}", channel.label()),
    }
}

pub fn write_output(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn notes_are_aggregated_once() {
        let mut doc = ReportDocument::new("test", &RunConfig::default(), true);
        let r = InequalityReport::new("a", 1.0, 2.0).note("n1").note("n2");
        doc.push(Entry::Inequality(r.clone()));
        doc.push(Entry::Inequality(r));
        assert_eq!(
            doc.assumption_notes,
            vec!["n1".to_string(), "n2".to_string()]
        );
        assert!(doc.generated_at.is_none());
    }

    #[test]
    fn csv_dialect() {
        let mut doc = ReportDocument::new("test", &RunConfig::default(), true);
        doc.push(Entry::Inequality(InequalityReport::new("a, b", 0.1, 0.2)));
        let csv = doc.to_csv().unwrap();
        assert!(!csv.contains('\r'));
        assert!(csv.starts_with("entry,kind,name,field,value\n"));
        assert!(csv.contains("\"a, b\""));
        assert!(csv.contains("1.0000000000000001e-1"));
        let parsed: f64 = real(0.1).parse().unwrap();
        assert_eq!(parsed, 0.1);
    }
}
