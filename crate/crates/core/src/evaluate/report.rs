use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::mcnemar::McNemarResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAccuracySummary {
    pub t60: f64,
    pub t80: f64,
    pub vote: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub image_accuracy: f64,
    pub video_accuracy: VideoAccuracySummary,
    pub keyframe_count: usize,
    #[serde(default)]
    pub video_count: usize,
    #[serde(default)]
    pub image_accuracy_per_label: BTreeMap<String, f64>,
    #[serde(default)]
    pub vote_accuracy_per_label: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarEntry {
    pub a: String,
    pub b: String,
    pub p: f64,
    pub alpha_adj: f64,
    pub significant: bool,
    pub n_ab: u64,
    pub n_ba: u64,
}

impl From<&McNemarResult> for McNemarEntry {
    fn from(r: &McNemarResult) -> Self {
        McNemarEntry {
            a: r.method_a.clone(),
            b: r.method_b.clone(),
            p: r.p_value,
            alpha_adj: r.alpha_adjusted,
            significant: r.significant,
            n_ab: r.n_discordant_ab,
            n_ba: r.n_discordant_ba,
        }
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset_id: String,
    pub per_method: BTreeMap<String, MethodReport>,
    pub mcnemar: Vec<McNemarEntry>,
}

type MetricRow = (&'static str, fn(&MethodReport) -> String);

/// Flattened report: one row per metric, one column per method.
pub fn write_report_csv<W: Write>(writer: W, report: &Report) -> Result<()> {
    let to_err = |e: csv::Error| Error::InvalidParameter(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let methods: Vec<&String> = report.per_method.keys().collect();
    let mut header = vec!["metric".to_string()];
    header.extend(methods.iter().map(|m| m.to_string()));
    w.write_record(&header).map_err(to_err)?;

    let rows: [MetricRow; 6] = [
        ("image_accuracy", |m| format!("{:.4}", m.image_accuracy)),
        ("video_accuracy_t60", |m| {
            format!("{:.4}", m.video_accuracy.t60)
        }),
        ("video_accuracy_t80", |m| {
            format!("{:.4}", m.video_accuracy.t80)
        }),
        ("video_accuracy_vote", |m| {
            format!("{:.4}", m.video_accuracy.vote)
        }),
        ("keyframe_count", |m| m.keyframe_count.to_string()),
        ("video_count", |m| m.video_count.to_string()),
    ];
    for (name, f) in rows {
        let mut rec = vec![name.to_string()];
        rec.extend(methods.iter().map(|m| f(&report.per_method[*m])));
        w.write_record(&rec).map_err(to_err)?;
    }
    let labels: std::collections::BTreeSet<&String> = report
        .per_method
        .values()
        .flat_map(|m| m.image_accuracy_per_label.keys())
        .collect();
    for label in labels {
        let mut rec = vec![format!("image_accuracy[{label}]")];
        rec.extend(methods.iter().map(|m| {
            report.per_method[*m]
                .image_accuracy_per_label
                .get(label)
                .map_or_else(String::new, |v| format!("{v:.4}"))
        }));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io("report.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn method(acc: f64, kf: usize) -> MethodReport {
        MethodReport {
            image_accuracy: acc,
            video_accuracy: VideoAccuracySummary {
                t60: acc,
                t80: acc / 2.0,
                vote: 1.0,
            },
            keyframe_count: kf,
            video_count: 4,
            image_accuracy_per_label: [("A".to_string(), acc)].into(),
            vote_accuracy_per_label: BTreeMap::new(),
        }
    }

    #[test]
    fn json_shape() {
        let r = Report {
            dataset_id: "synthetic".into(),
            per_method: [("kmeans".to_string(), method(0.5, 816))].into(),
            mcnemar: vec![],
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["per_method"]["kmeans"]["video_accuracy"]["t80"], 0.25);
        assert_eq!(v["per_method"]["kmeans"]["keyframe_count"], 816);
        assert!(v["mcnemar"].as_array().unwrap().is_empty());
    }

    #[test]
    fn csv_has_metric_rows() {
        let r = Report {
            dataset_id: "d".into(),
            per_method: [
                ("a".to_string(), method(0.5, 10)),
                ("b".to_string(), method(1.0, 20)),
            ]
            .into(),
            mcnemar: vec![],
        };
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "metric,a,b");
        assert_eq!(lines[1], "image_accuracy,0.5000,1.0000");
        assert_eq!(lines[5], "keyframe_count,10,20");
        assert_eq!(lines[7], "image_accuracy[A],0.5000,1.0000");
    }
}
