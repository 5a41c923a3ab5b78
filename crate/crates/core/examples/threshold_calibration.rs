//! Picks a confidence threshold from a scored calibration list.

use kbc::scoring::{calibrate_curve, recall_at_precision, ThresholdCurve, DEFAULT_PRECISION_RANGE};

fn main() {
    // (first-token probability, answer correct)
    let items = vec![
        (0.98, true),
        (0.97, true),
        (0.95, true),
        (0.93, false),
        (0.90, true),
        (0.90, true),
        (0.85, true),
        (0.80, false),
        (0.72, true),
        (0.60, false),
        (0.55, false),
        (0.41, true),
    ];
    for target in [0.95, 0.90, 0.75] {
        let (coverage, tau) = recall_at_precision(&items, target).unwrap();
        println!("coverage@P{:.0} = {coverage:.3}  tau = {tau}", target * 100.0);
    }

    let curve = ThresholdCurve::from_pairs(items).unwrap();
    println!("\n  m  precision  coverage  admissible");
    for m in 1..=curve.len() {
        println!(
            "{m:>3}  {:>9.3}  {:>8.3}  {}",
            curve.precision(m),
            curve.coverage(m),
            curve.is_admissible(m)
        );
    }
    let c = calibrate_curve("example", &curve, DEFAULT_PRECISION_RANGE).unwrap();
    println!(
        "\ncalibrated tau = {}, keeps {} of {}, precision {:?}, low confidence: {}",
        c.threshold, c.retained, c.total, c.precision, c.low_confidence
    );
}
