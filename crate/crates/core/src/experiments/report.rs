use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{PcaProjection, SweepResult, Top3Report};
use crate::data::FeatureSchema;
use crate::error::{Error, Result};
use crate::explainers::{save_attributions_csv, AttributionRecord};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Experiment(format!("writing {}: {e}", path.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Writes `top3.csv`. Cells that failed contribute no rows.
pub fn emit_top3(report: &Top3Report, out_dir: &Path) -> Result<()> {
    let path = out_dir.join("top3.csv");
    let mut w = writer(&path)?;
    let e = csv_err(&path);
    w.write_record(["classifier_tag", "explainer_tag", "feature_name", "top3_fraction"])
        .map_err(&e)?;
    for c in &report.cells {
        for (name, frac) in &c.fractions {
            w.write_record([c.classifier_tag.as_str(), c.explainer.as_str(), name, &num(*frac)])
                .map_err(&e)?;
        }
    }
    w.flush().map_err(|err| Error::io(&path, err))
}

/// Writes `sweep.csv`; failed cells have empty `f1_achieved` and/or
/// `detection_rate`.
pub fn emit_sweep(result: &SweepResult, out_dir: &Path) -> Result<()> {
    let path = out_dir.join("sweep.csv");
    let mut w = writer(&path)?;
    let e = csv_err(&path);
    w.write_record(["f1_target", "f1_achieved", "explainer_tag", "detection_rate", "n_instances"])
        .map_err(&e)?;
    for c in &result.cells {
        w.write_record([
            num(c.f1_target),
            c.f1_achieved.map(num).unwrap_or_default(),
            c.explainer.to_string(),
            c.detection_rate.map(num).unwrap_or_default(),
            c.n_instances.to_string(),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(|err| Error::io(&path, err))
}

/// Writes `pca.csv` and `pca_meta.csv`.
pub fn emit_pca(proj: &PcaProjection, out_dir: &Path) -> Result<()> {
    let path = out_dir.join("pca.csv");
    let mut w = writer(&path)?;
    let e = csv_err(&path);
    w.write_record(["point_id", "pc1", "pc2", "label"]).map_err(&e)?;
    for (i, (c, &l)) in proj.coords.iter().zip(&proj.labels).enumerate() {
        let label = if l == 0 { "real" } else { "perturbed" };
        w.write_record([i.to_string(), num(c[0]), num(c[1]), label.to_string()])
            .map_err(&e)?;
    }
    w.flush().map_err(|err| Error::io(&path, err))?;

    let meta = out_dir.join("pca_meta.csv");
    let mut w = writer(&meta)?;
    let e = csv_err(&meta);
    w.write_record(["ev1", "ev2"]).map_err(&e)?;
    w.write_record([num(proj.explained_variance[0]), num(proj.explained_variance[1])])
        .map_err(&e)?;
    w.flush().map_err(|err| Error::io(&meta, err))
}

/// Per-instance attributions behind a top-3 report, ids `<classifier>:<row>`.
pub(crate) fn emit_top3_attributions(report: &Top3Report, schema: &FeatureSchema, out_dir: &Path) -> Result<()> {
    let records: Vec<AttributionRecord> = report
        .cells
        .iter()
        .flat_map(|c| {
            c.records.iter().map(move |r| AttributionRecord {
                instance_id: format!("{}:{}", c.classifier_tag, r.instance_id),
                ..r.clone()
            })
        })
        .collect();
    save_attributions_csv(out_dir.join("attributions_top3.csv"), schema, &records)
}

/// Per-instance attributions behind a sweep, ids `f1=<target>:<row>`.
pub(crate) fn emit_sweep_attributions(result: &SweepResult, schema: &FeatureSchema, out_dir: &Path) -> Result<()> {
    let records: Vec<AttributionRecord> = result
        .cells
        .iter()
        .flat_map(|c| {
            c.records.iter().map(move |r| AttributionRecord {
                instance_id: format!("f1={}:{}", c.f1_target, r.instance_id),
                ..r.clone()
            })
        })
        .collect();
    save_attributions_csv(out_dir.join("attributions_sweep.csv"), schema, &records)
}

const W: f64 = 560.0;
const H: f64 = 400.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn svg_frame(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{y}" x2="{x}" y2="{y}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y}" stroke="black"/>"#,
        x = W - PAD / 2.0,
        y = H - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(
        s,
        r#"<text transform="translate(18,{}) rotate(-90)" text-anchor="middle">{y_label}</text>"#,
        H / 2.0
    );
    s
}

/// Detection rate against achieved detector F1, one line per explainer.
pub fn write_svg_sweep(result: &SweepResult, path: &Path) -> Result<()> {
    let (x0, x1) = result
        .f1_targets
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| PAD + (x - x0) / span * (W - 1.5 * PAD);
    let py = |y: f64| H - PAD - y * (H - 2.0 * PAD);
    let mut s = svg_frame(
        "Sensitivity to OOD detector F1",
        "F1 score of OOD classifier",
        "% of data points where sensitive feature is top",
    );
    for (k, &tag) in result.explainers.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = result
            .f1_targets
            .iter()
            .filter_map(|&t| {
                let c = result.cell(t, tag)?;
                Some(format!("{:.2},{:.2}", px(c.f1_achieved.unwrap_or(t)), py(c.detection_rate?)))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{tag}</text>"#,
            W - PAD * 1.4,
            PAD + 16.0 * k as f64
        );
    }
    s.push_str("</svg>\n");
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Scatter of the projected points, real and perturbed in two colors.
pub(crate) fn write_svg_pca(proj: &PcaProjection, path: &Path) -> Result<()> {
    let bounds = |k: usize| {
        proj.coords
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c[k]), b.max(c[k])))
    };
    let ((ax, bx), (ay, by)) = (bounds(0), bounds(1));
    let px = |x: f64| PAD + (x - ax) / (bx - ax).max(1e-12) * (W - 1.5 * PAD);
    let py = |y: f64| H - PAD - (y - ay) / (by - ay).max(1e-12) * (H - 2.0 * PAD);
    let mut s = svg_frame("PCA of real rows and perturbations", "PC1", "PC2");
    for (c, &l) in proj.coords.iter().zip(&proj.labels) {
        let color = if l == 0 { COLORS[0] } else { COLORS[1] };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{color}" fill-opacity="0.5"/>"#,
            px(c[0]),
            py(c[1])
        );
    }
    s.push_str("</svg>\n");
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
