//! Metrics from confusion matrices, including a degenerate one.

use botflow::classifiers::ModelKind;
use botflow::evaluation::{compute_metrics, confusion, render_report, ConfusionMatrix, ReportFormat};

fn main() -> botflow::Result<()> {
    let y_true = [1, 1, 1, 1, 0, 0, 0, 0, 1, 0];
    let y_pred = [1, 1, 0, 1, 0, 0, 1, 0, 1, 0];
    let cm = confusion(&y_true, &y_pred)?;
    let good = compute_metrics("toy", ModelKind::KNN, cm)?;

    // never predicts the attack class
    let silent = ConfusionMatrix { tp: 0, tn: 90, fp: 0, fn_: 10 };
    let bad = compute_metrics("toy", ModelKind::NB, silent)?;
    println!("precision degenerate: {}", bad.precision_degenerate);

    let reports = [bad, good];
    print!("{}", render_report(&reports, ReportFormat::Text));
    print!("{}", render_report(&reports, ReportFormat::Csv));
    Ok(())
}
