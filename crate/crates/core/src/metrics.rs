//! One-pass evaluation: center-error precision and IoU success curves.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::geometry::BoundingBox;

/// Largest center-error threshold in pixels; the precision curve has one
/// value per integer threshold from 0 up to this.
pub const PRECISION_MAX_PX: usize = 50;
/// Threshold the precision score is reported at.
pub const PRECISION_REPORT_PX: usize = 20;
/// Number of IoU thresholds, evenly spaced over `[0, 1]`.
pub const SUCCESS_POINTS: usize = 21;

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionCurve {
    /// `values[t]` is the fraction of frames with center error `<= t` px.
    pub values: Vec<f64>,
    pub p20: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessCurve {
    pub thresholds: Vec<f64>,
    /// `values[i]` is the fraction of frames with IoU `> thresholds[i]`.
    pub values: Vec<f64>,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurves {
    pub precision: PrecisionCurve,
    pub success: SuccessCurve,
}

impl EvalCurves {
    pub fn p20(&self) -> f64 {
        self.precision.p20
    }

    pub fn auc(&self) -> f64 {
        self.success.auc
    }
}

fn check_lengths(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<()> {
    if pred.len() != gt.len() {
        return invalid(format!(
            "{} predictions but {} ground-truth boxes",
            pred.len(),
            gt.len()
        ));
    }
    if pred.is_empty() {
        return invalid("cannot evaluate an empty track");
    }
    Ok(())
}

pub fn success_thresholds() -> Vec<f64> {
    (0..SUCCESS_POINTS)
        .map(|i| i as f64 / (SUCCESS_POINTS - 1) as f64)
        .collect()
}

pub fn center_errors(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<Vec<f64>> {
    check_lengths(pred, gt)?;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, g)| p.center_distance(g))
        .collect())
}

pub fn overlaps(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<Vec<f64>> {
    check_lengths(pred, gt)?;
    Ok(pred.iter().zip(gt).map(|(p, g)| p.iou(g)).collect())
}

pub fn precision_curve(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<PrecisionCurve> {
    let errors = center_errors(pred, gt)?;
    let n = errors.len() as f64;
    let values: Vec<f64> = (0..=PRECISION_MAX_PX)
        .map(|t| errors.iter().filter(|&&e| e <= t as f64).count() as f64 / n)
        .collect();
    let p20 = values[PRECISION_REPORT_PX];
    Ok(PrecisionCurve { values, p20 })
}

pub fn success_auc(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<SuccessCurve> {
    let ious = overlaps(pred, gt)?;
    let n = ious.len() as f64;
    let thresholds = success_thresholds();
    let values: Vec<f64> = thresholds
        .iter()
        .map(|&th| ious.iter().filter(|&&o| o > th).count() as f64 / n)
        .collect();
    let auc = values.iter().sum::<f64>() / values.len() as f64;
    Ok(SuccessCurve {
        thresholds,
        values,
        auc,
    })
}

pub fn evaluate(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<EvalCurves> {
    Ok(EvalCurves {
        precision: precision_curve(pred, gt)?,
        success: success_auc(pred, gt)?,
    })
}

/// Metrics CSV: `curve,threshold,value` rows for both curves, then summary
/// rows `summary,p20,<v>` and `summary,auc,<v>`. Values print in shortest
/// round-trip form.
pub fn metrics_csv(curves: &EvalCurves) -> String {
    let mut out = String::from("curve,threshold,value\n");
    for (t, v) in curves.precision.values.iter().enumerate() {
        let _ = writeln!(out, "precision,{t},{v}");
    }
    for (t, v) in curves.success.thresholds.iter().zip(&curves.success.values) {
        let _ = writeln!(out, "success,{t},{v}");
    }
    let _ = writeln!(out, "summary,p20,{}", curves.precision.p20);
    let _ = writeln!(out, "summary,auc,{}", curves.success.auc);
    out
}

/// Reads the `(p20, auc)` summary back from [`metrics_csv`] output.
pub fn parse_metrics_summary(text: &str) -> Option<(f64, f64)> {
    let mut p20 = None;
    let mut auc = None;
    for line in text.lines() {
        let mut parts = line.split(',');
        if parts.next() != Some("summary") {
            continue;
        }
        match (
            parts.next(),
            parts.next().and_then(|v| v.parse::<f64>().ok()),
        ) {
            (Some("p20"), Some(v)) => p20 = Some(v),
            (Some("auc"), Some(v)) => auc = Some(v),
            _ => {}
        }
    }
    Some((p20?, auc?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(cx: f64, cy: f64) -> BoundingBox {
        BoundingBox::new(cx, cy, 10.0, 10.0).unwrap()
    }

    #[test]
    fn identical_tracks_are_perfect() {
        let gt: Vec<_> = (0..7).map(|i| b(20.0 + i as f64, 30.0)).collect();
        let c = evaluate(&gt, &gt).unwrap();
        assert!(c.precision.values.iter().all(|&v| v == 1.0));
        assert_eq!(c.p20(), 1.0);
        assert!(c.success.values[..20].iter().all(|&v| v == 1.0));
        assert_eq!(c.success.values[20], 0.0);
        assert!((c.auc() - 1.0).abs() <= 1.0 / 21.0 + 1e-12);
    }

    #[test]
    fn threshold_is_inclusive() {
        let gt = vec![b(50.0, 50.0); 4];
        let pred = vec![b(70.0, 50.0); 4];
        let p = precision_curve(&pred, &gt).unwrap();
        assert_eq!(p.values[20], 1.0);
        assert_eq!(p.values[19], 0.0);
        assert_eq!(p.p20, p.values[20]);
    }

    #[test]
    fn disjoint_boxes_have_no_success_above_zero() {
        let gt = vec![b(0.0, 0.0); 3];
        let pred = vec![b(100.0, 100.0); 3];
        let s = success_auc(&pred, &gt).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert_eq!(s.auc, 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let gt = vec![b(0.0, 0.0); 3];
        assert!(precision_curve(&gt[..2], &gt).is_err());
        assert!(success_auc(&gt[..2], &gt).is_err());
        assert!(precision_curve(&[], &[]).is_err());
    }

    #[test]
    fn csv_summary_round_trips() {
        let gt: Vec<_> = (0..9).map(|i| b(i as f64 * 3.0, 5.0)).collect();
        let pred: Vec<_> = (0..9).map(|i| b(i as f64 * 3.7, 6.0)).collect();
        let c = evaluate(&pred, &gt).unwrap();
        let text = metrics_csv(&c);
        assert_eq!(parse_metrics_summary(&text), Some((c.p20(), c.auc())));
        assert_eq!(text.lines().count(), 1 + 51 + 21 + 2);
    }
}
