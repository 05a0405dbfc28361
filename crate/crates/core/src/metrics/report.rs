use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{accuracy, f1, precision_recall, ConfusionMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub recall_undefined: bool,
    pub precision_undefined: bool,
}

/// One model's row of the report. This is also the JSON element schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl ModelReport {
    pub fn from_matrix(model: &str, cm: &ConfusionMatrix) -> Result<Self> {
        let per_class = (0..cm.num_classes())
            .map(|c| {
                let pr = precision_recall(cm, c)?;
                Ok(ClassMetrics {
                    class: cm.class_names()[c].clone(),
                    recall: pr.recall,
                    precision: pr.precision,
                    f1: f1(pr.precision, pr.recall),
                    recall_undefined: pr.recall_undefined,
                    precision_undefined: pr.precision_undefined,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            model: model.to_string(),
            per_class,
            accuracy: accuracy(cm)?,
            confusion: cm.clone(),
        })
    }
}

/// Render named confusion matrices as a Recall / Precision / F1 table with
/// one row per model.
pub fn report(cms: &[(String, ConfusionMatrix)], format: ReportFormat) -> Result<String> {
    if cms.is_empty() {
        return Err(Error::invalid("report needs at least one confusion matrix"));
    }
    let rows = cms
        .iter()
        .map(|(name, cm)| ModelReport::from_matrix(name, cm))
        .collect::<Result<Vec<_>>>()?;
    match format {
        ReportFormat::Text => Ok(render_text(&rows)),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(&rows)? + "\n"),
        ReportFormat::Csv => render_csv(&rows),
    }
}

pub fn parse_json_report(json: &str) -> Result<Vec<ModelReport>> {
    Ok(serde_json::from_str(json)?)
}

fn percent(x: f64, undefined: bool) -> String {
    format!("{:.1}%{}", 100.0 * x, if undefined { "*" } else { "" })
}

pub fn render_text(rows: &[ModelReport]) -> String {
    let classes: Vec<&str> = rows
        .first()
        .map(|r| r.per_class.iter().map(|c| c.class.as_str()).collect())
        .unwrap_or_default();
    let name_w = rows.iter().map(|r| r.model.len()).chain([5]).max().unwrap_or(5);
    let cell_w = classes.iter().map(|c| c.len()).chain([7]).max().unwrap_or(7);
    let group_w = classes.len() * (cell_w + 1) - 1;

    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Model");
    for group in ["Recall", "Precision", "F1 Score"] {
        let _ = write!(out, " | {group:<group_w$}");
    }
    let _ = writeln!(out, " | Accuracy");
    let _ = write!(out, "{:<name_w$}", "");
    for _ in 0..3 {
        let sub: Vec<String> = classes.iter().map(|c| format!("{c:>cell_w$}")).collect();
        let _ = write!(out, " | {}", sub.join(" "));
    }
    let _ = writeln!(out, " |");

    let mut flagged = false;
    for r in rows {
        let _ = write!(out, "{:<name_w$}", r.model);
        let cells: [Vec<String>; 3] = [
            r.per_class.iter().map(|c| percent(c.recall, c.recall_undefined)).collect(),
            r.per_class.iter().map(|c| percent(c.precision, c.precision_undefined)).collect(),
            r.per_class.iter().map(|c| format!("{:.3}", c.f1)).collect(),
        ];
        for group in cells {
            let sub: Vec<String> = group.iter().map(|v| format!("{v:>cell_w$}")).collect();
            let _ = write!(out, " | {}", sub.join(" "));
        }
        let _ = writeln!(out, " | {:.2}%", 100.0 * r.accuracy);
        flagged |= r.per_class.iter().any(|c| c.recall_undefined || c.precision_undefined);
    }
    if flagged {
        let _ = writeln!(out, "* zero denominator, reported as 0");
    }

    for r in rows {
        let names = r.confusion.class_names();
        let w = names
            .iter()
            .map(|n| n.len())
            .chain(r.confusion.counts().iter().flatten().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1);
        let _ = writeln!(out, "\nConfusion matrix: {} (rows true, columns predicted)", r.model);
        let _ = write!(out, "{:<w$}", "");
        for n in names {
            let _ = write!(out, "  {n:>w$}");
        }
        out.push('\n');
        for (n, row) in names.iter().zip(r.confusion.counts()) {
            let _ = write!(out, "{n:<w$}");
            for c in row {
                let _ = write!(out, "  {c:>w$}");
            }
            out.push('\n');
        }
    }
    out
}

fn render_csv(rows: &[ModelReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "class", "recall", "precision", "f1", "accuracy"])
        .map_err(std::io::Error::from)?;
    for r in rows {
        for c in &r.per_class {
            w.write_record([
                r.model.clone(),
                c.class.clone(),
                c.recall.to_string(),
                c.precision.to_string(),
                c.f1.to_string(),
                r.accuracy.to_string(),
            ])
            .map_err(std::io::Error::from)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(counts: [[u64; 2]; 2]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(
            vec!["Alert".into(), "Drowsy".into()],
            counts.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    fn four() -> Vec<(String, ConfusionMatrix)> {
        [
            ("Net1", [[992, 8], [125, 875]]),
            ("Net2", [[982, 18], [117, 883]]),
            ("Net3", [[982, 18], [142, 858]]),
            ("Ensemble", [[995, 5], [97, 903]]),
        ]
        .into_iter()
        .map(|(n, c)| (n.to_string(), cm(c)))
        .collect()
    }

    #[test]
    fn diagonal_is_all_ones_everywhere() {
        let cms = vec![("m".to_string(), cm([[3, 0], [0, 4]]))];
        let text = report(&cms, ReportFormat::Text).unwrap();
        assert_eq!(text.matches("100.0%").count(), 4);
        assert_eq!(text.matches("1.000").count(), 2);
        assert!(text.contains("100.00%"));

        let parsed = parse_json_report(&report(&cms, ReportFormat::Json).unwrap()).unwrap();
        let m = &parsed[0];
        assert_eq!(m.accuracy, 1.0);
        assert!(m.per_class.iter().all(|c| c.recall == 1.0 && c.precision == 1.0 && c.f1 == 1.0));

        let csv = report(&cms, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "model,class,recall,precision,f1,accuracy");
        assert_eq!(lines[1], "m,Alert,1,1,1,1");
        assert_eq!(lines[2], "m,Drowsy,1,1,1,1");
    }

    #[test]
    fn four_model_table_layout() {
        let text = report(&four(), ReportFormat::Text).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("Model") && lines[0].contains("Recall"));
        assert!(lines[0].contains("Precision") && lines[0].contains("F1 Score"));
        for (i, name) in ["Net1", "Net2", "Net3", "Ensemble"].iter().enumerate() {
            assert!(lines[2 + i].starts_with(name), "{}", lines[2 + i]);
        }
        assert!(lines[2].contains("99.2%") && lines[2].contains("87.5%"));
        let widths: Vec<usize> = lines[..6].iter().map(|l| l.find(" | ").unwrap()).collect();
        assert!(widths.iter().all(|&w| w == widths[0]));
    }

    #[test]
    fn json_round_trip_rerenders_identically() {
        let cms = four();
        let json = report(&cms, ReportFormat::Json).unwrap();
        let parsed = parse_json_report(&json).unwrap();
        assert_eq!(render_text(&parsed), report(&cms, ReportFormat::Text).unwrap());
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["model", "per_class", "accuracy", "confusion"] {
            assert!(v[0].get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn degenerate_cells_are_marked() {
        let text = report(&[("m".into(), cm([[4, 0], [2, 0]]))], ReportFormat::Text).unwrap();
        assert!(text.contains("0.0%*"));
        assert!(text.contains("zero denominator"));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("JSON".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
        assert!(matches!("xml".parse::<ReportFormat>(), Err(Error::UnknownFormat(_))));
        assert!(report(&[], ReportFormat::Text).is_err());
    }
}
