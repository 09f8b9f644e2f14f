//! CSV and plain-text report writers.

use std::fmt::Write as _;
use std::io::Write;

use gmmc_core::analytics::{self, ClassifierFamily, CountReport, SweepPoint, TABLE_COLUMNS};
use gmmc_core::training::{Evaluation, TrainReport};

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// `epoch,loss,lr,val_accuracy`, one row per epoch (1-based). A missing
/// validation split leaves the last column empty.
pub fn write_train_report<W: Write>(out: W, report: &TrainReport) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss", "lr", "val_accuracy"]).map_err(csv_err)?;
    for e in 0..report.epoch_loss.len() {
        let acc = report.epoch_val_accuracy[e].map(|a| a.to_string()).unwrap_or_default();
        w.write_record([
            (e + 1).to_string(),
            report.epoch_loss[e].to_string(),
            report.epoch_lr[e].to_string(),
            acc,
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

/// Confusion counts: `true_class,pred_0,…,pred_{C-1}`.
pub fn write_confusion<W: Write>(out: W, eval: &Evaluation, classes: usize) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["true_class".to_string()];
    header.extend((0..classes).map(|c| format!("pred_{c}")));
    w.write_record(&header).map_err(csv_err)?;
    for t in 0..classes {
        let mut row = vec![t.to_string()];
        row.extend(eval.confusion[t * classes..(t + 1) * classes].iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub const SWEEP_HEADER: [&str; 5] = ["classifier", "family", "threshold_percent", "selected_d", "accuracy"];

/// Sweep points as CSV, one row per point; an empty slice gives the header only.
pub fn write_sweep<W: Write>(out: W, points: &[SweepPoint]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.classifier.clone(),
            p.family.clone(),
            p.threshold_percent.to_string(),
            p.selected_d.to_string(),
            p.accuracy.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

/// One line per classifier with its best point.
pub fn sweep_summary_text(points: &[SweepPoint]) -> String {
    let mut s = String::new();
    for p in analytics::sweep_summary(points) {
        let _ = writeln!(
            s,
            "{:<16} best {:5.1}% at {:>5.1}% variance (d={})",
            p.classifier,
            100.0 * p.accuracy,
            p.threshold_percent,
            p.selected_d
        );
    }
    s
}

pub fn write_counts_csv<W: Write>(out: W, reports: &[CountReport]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "classes", "components", "dim", "parameter_count", "ratio_vs_dgmmc_s", "ratio_printed"])
        .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.family.name().to_string(),
            r.classes.to_string(),
            r.components.to_string(),
            r.dim.to_string(),
            r.parameter_count.to_string(),
            r.ratio.map(|v| v.to_string()).unwrap_or_default(),
            r.ratio_text().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

/// Aligned table of individual counts.
pub fn counts_table(reports: &[CountReport]) -> String {
    let mut rows = vec![[
        "family".to_string(),
        "C".into(),
        "G".into(),
        "d".into(),
        "parameters".into(),
        "x DGMMC-S".into(),
    ]];
    for r in reports {
        rows.push([
            r.family.name().to_string(),
            r.classes.to_string(),
            r.components.to_string(),
            r.dim.to_string(),
            r.parameter_count.to_string(),
            r.ratio_text().map(|t| format!("{t}x")).unwrap_or_else(|| "-".into()),
        ]);
    }
    align(&rows)
}

/// The comparison table laid out as in print: SDGM-F and SDGM-D ratio rows
/// followed by DGMMC-S count rows, one column per `(C, d)`.
pub fn paper_table(reports: &[CountReport]) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut head = vec!["".to_string(), "".to_string()];
    head.extend(TABLE_COLUMNS.iter().map(|(c, _)| format!("C={c}")));
    rows.push(head);
    let mut head = vec!["".to_string(), "".to_string()];
    head.extend(TABLE_COLUMNS.iter().map(|(_, d)| format!("d={d}")));
    rows.push(head);
    for (family, label) in [
        (ClassifierFamily::SdgmF, "xSDGM-F"),
        (ClassifierFamily::SdgmD, "xSDGM-D"),
        (ClassifierFamily::DgmmcS, "# DGMMC-S"),
    ] {
        for g in [1u64, 2] {
            let mut row = vec![label.to_string(), format!("G={g}")];
            for &(c, d) in &TABLE_COLUMNS {
                let r = reports
                    .iter()
                    .find(|r| r.family == family && r.components == g && r.classes == c && r.dim == d)
                    .expect("table cell present");
                row.push(match r.ratio_text() {
                    Some(t) => format!("{t}x"),
                    None => format!("#{}", r.parameter_count),
                });
            }
            rows.push(row);
        }
    }
    align(&rows)
}

fn align<R: AsRef<[String]>>(rows: &[R]) -> String {
    let cols = rows.iter().map(|r| r.as_ref().len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.as_ref().get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .as_ref()
            .iter()
            .enumerate()
            .map(|(i, s)| if i < 2 { format!("{s:<w$}", w = widths[i]) } else { format!("{s:>w$}", w = widths[i]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
