//! Detection strategies: how TP/FP/FN are counted before TPR/PPV are
//! derived.
//!
//! Three strategies are provided. The line strategy scores whole slices
//! and requires both insertion points (the septum axis exists only when
//! both are present). The point strategy scores each landmark on its own.
//! The thresholded point strategy additionally requires the prediction to
//! fall within a radius (default 15 mm) of the ground truth.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geom::{distance_mm, CaseLandmarks, LandmarkLabel, LandmarkPoint};

/// Default acceptance radius for [`match_point_threshold`], in mm.
pub const DEFAULT_RADIUS_MM: f64 = 15.0;

/// Strategy identity without parameters; keys records and aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Line,
    Point,
    PointThreshold,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::Line,
        StrategyKind::Point,
        StrategyKind::PointThreshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Line => "line",
            StrategyKind::Point => "point",
            StrategyKind::PointThreshold => "point-threshold",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(StrategyKind::Line),
            "point" => Ok(StrategyKind::Point),
            "point-threshold" => Ok(StrategyKind::PointThreshold),
            other => Err(Error::Input(format!("unknown detection strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A detection strategy with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionStrategy {
    Line,
    Point,
    PointThreshold { radius_mm: f64 },
}

impl DetectionStrategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            DetectionStrategy::Line => StrategyKind::Line,
            DetectionStrategy::Point => StrategyKind::Point,
            DetectionStrategy::PointThreshold { .. } => StrategyKind::PointThreshold,
        }
    }
}

/// What to do when a same-slice prediction lies outside the acceptance
/// radius of the threshold strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FarMissPolicy {
    /// The far prediction is an FP and the ground-truth point additionally
    /// counts as FN: it was not detected within tolerance, so TPR stays
    /// meaningful. Default.
    #[default]
    FnAndFp,
    /// Count only the FP, leaving the ground-truth point unscored.
    FpOnly,
}

/// One ground-truth/prediction pairing produced by a TP decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub gt: LandmarkPoint,
    pub pred: LandmarkPoint,
}

/// Events that the strategy definitions neither score nor forbid; counted
/// so nothing disappears silently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchDiagnostics {
    /// Line strategy: GT-empty slices carrying exactly one predicted point
    /// (counted as neither FP nor FN).
    pub single_pred_on_empty_slice: u32,
    /// Slices where the ground truth carries exactly one point; well-formed
    /// labels never do this.
    pub malformed_gt_slices: u32,
}

impl MatchDiagnostics {
    pub fn merge(&mut self, other: &MatchDiagnostics) {
        self.single_pred_on_empty_slice += other.single_pred_on_empty_slice;
        self.malformed_gt_slices += other.malformed_gt_slices;
    }

    pub fn is_clean(&self) -> bool {
        self.single_pred_on_empty_slice == 0 && self.malformed_gt_slices == 0
    }
}

/// TP/FP/FN tallies under one strategy, plus the matched pairs that feed
/// localisation and the missed ground-truth points that feed the bounded
/// penalty.
///
/// For the line strategy the counts are slice-level and the pair/point
/// lists may hold both labels; the per-label views below slice them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfusionCounts {
    pub true_positives: u32,
    pub false_positives: u32,
    pub false_negatives: u32,
    pub matched_pairs: Vec<MatchedPair>,
    pub unmatched_gt: Vec<LandmarkPoint>,
    pub diagnostics: MatchDiagnostics,
}

impl ConfusionCounts {
    pub fn matched_pairs_for(&self, label: LandmarkLabel) -> impl Iterator<Item = &MatchedPair> {
        self.matched_pairs.iter().filter(move |p| p.gt.label == label)
    }

    pub fn unmatched_gt_for(&self, label: LandmarkLabel) -> impl Iterator<Item = &LandmarkPoint> {
        self.unmatched_gt.iter().filter(move |p| p.label == label)
    }
}

/// True positive rate TP/(TP+FN); NA when the denominator is zero.
pub fn tpr(c: &ConfusionCounts) -> Option<f64> {
    rate(c.true_positives, c.false_negatives)
}

/// Positive predictive value TP/(TP+FP); NA when the denominator is zero.
pub fn ppv(c: &ConfusionCounts) -> Option<f64> {
    rate(c.true_positives, c.false_positives)
}

fn rate(tp: u32, other: u32) -> Option<f64> {
    let denom = tp + other;
    if denom == 0 {
        None
    } else {
        Some(tp as f64 / denom as f64)
    }
}

fn check_compatible(gt: &CaseLandmarks, pred: &CaseLandmarks) -> Result<()> {
    if gt.case_id() != pred.case_id() {
        return Err(Error::Input(format!(
            "case_id mismatch: gt {:?} vs pred {:?}",
            gt.case_id(),
            pred.case_id()
        )));
    }
    // Slice counts may legitimately differ (e.g. synthetic predictions with
    // spurious extra slices); the in-plane grid must match for distances to
    // be comparable.
    if !gt.geometry().same_plane(pred.geometry()) {
        return Err(Error::Input(format!(
            "geometry mismatch for case {:?}: gt {}x{} @ {:?} vs pred {}x{} @ {:?}",
            gt.case_id(),
            gt.geometry().width(),
            gt.geometry().height(),
            gt.geometry().spacing(),
            pred.geometry().width(),
            pred.geometry().height(),
            pred.geometry().spacing(),
        )));
    }
    Ok(())
}

fn slice_union(gt: &CaseLandmarks, pred: &CaseLandmarks) -> BTreeSet<usize> {
    gt.slices()
        .iter()
        .chain(pred.slices().iter())
        .map(|s| s.slice_index)
        .collect()
}

/// Line strategy: a slice scores only as a whole.
///
/// Per slice: GT has both points and PRED has both -> TP (one per slice,
/// pairs recorded per label); GT has both and PRED has fewer -> FN; GT has
/// none and PRED has both -> FP. A GT-empty slice with a single predicted
/// point is counted in the diagnostics only. A GT slice with exactly one
/// point is malformed input; it is scored like a GT-both slice (with only
/// the existing label pairable) and flagged.
pub fn match_line(gt: &CaseLandmarks, pred: &CaseLandmarks) -> Result<ConfusionCounts> {
    check_compatible(gt, pred)?;
    let mut counts = ConfusionCounts::default();
    for index in slice_union(gt, pred) {
        let gt_slice = gt.slice(index);
        let pred_slice = pred.slice(index);
        let gt_n = gt_slice.map_or(0, |s| s.point_count());
        let pred_n = pred_slice.map_or(0, |s| s.point_count());
        if gt_n == 1 {
            counts.diagnostics.malformed_gt_slices += 1;
        }
        match (gt_n, pred_n) {
            (0, 2) => counts.false_positives += 1,
            (0, 1) => counts.diagnostics.single_pred_on_empty_slice += 1,
            (0, 0) => {}
            (_, 2) => {
                counts.true_positives += 1;
                let (gs, ps) = (gt_slice.unwrap(), pred_slice.unwrap());
                for label in LandmarkLabel::ALL {
                    if let (Some(g), Some(p)) = (gs.point(label), ps.point(label)) {
                        counts.matched_pairs.push(MatchedPair { gt: *g, pred: *p });
                    }
                }
            }
            (_, _) => {
                counts.false_negatives += 1;
                let gs = gt_slice.unwrap();
                for label in LandmarkLabel::ALL {
                    if let Some(g) = gs.point(label) {
                        counts.unmatched_gt.push(*g);
                    }
                }
            }
        }
    }
    Ok(counts)
}

/// Point strategy: each landmark is scored independently per slice.
///
/// GT present and PRED present -> TP; GT present, PRED absent -> FN;
/// GT absent, PRED present -> FP; both absent -> ignored.
pub fn match_point(
    gt: &CaseLandmarks,
    pred: &CaseLandmarks,
    label: LandmarkLabel,
) -> Result<ConfusionCounts> {
    check_compatible(gt, pred)?;
    let mut counts = ConfusionCounts::default();
    for index in slice_union(gt, pred) {
        let g = gt.point_at(index, label);
        let p = pred.point_at(index, label);
        match (g, p) {
            (Some(g), Some(p)) => {
                counts.true_positives += 1;
                counts.matched_pairs.push(MatchedPair { gt: *g, pred: *p });
            }
            (Some(g), None) => {
                counts.false_negatives += 1;
                counts.unmatched_gt.push(*g);
            }
            (None, Some(_)) => counts.false_positives += 1,
            (None, None) => {}
        }
    }
    Ok(counts)
}

/// Thresholded point strategy: a same-slice prediction within `radius_mm`
/// of the ground truth is TP (inclusive comparison); farther predictions
/// are FP, with the ground-truth point scored per `far_policy`.
pub fn match_point_threshold(
    gt: &CaseLandmarks,
    pred: &CaseLandmarks,
    label: LandmarkLabel,
    radius_mm: f64,
    far_policy: FarMissPolicy,
) -> Result<ConfusionCounts> {
    if !(radius_mm > 0.0) || !radius_mm.is_finite() {
        return Err(Error::Input(format!(
            "threshold radius must be positive and finite, got {radius_mm}"
        )));
    }
    check_compatible(gt, pred)?;
    let geometry = gt.geometry();
    let mut counts = ConfusionCounts::default();
    for index in slice_union(gt, pred) {
        let g = gt.point_at(index, label);
        let p = pred.point_at(index, label);
        match (g, p) {
            (Some(g), Some(p)) => {
                if distance_mm(g, p, geometry) <= radius_mm {
                    counts.true_positives += 1;
                    counts.matched_pairs.push(MatchedPair { gt: *g, pred: *p });
                } else {
                    counts.false_positives += 1;
                    if far_policy == FarMissPolicy::FnAndFp {
                        counts.false_negatives += 1;
                        counts.unmatched_gt.push(*g);
                    }
                }
            }
            (Some(g), None) => {
                counts.false_negatives += 1;
                counts.unmatched_gt.push(*g);
            }
            (None, Some(_)) => counts.false_positives += 1,
            (None, None) => {}
        }
    }
    Ok(counts)
}

/// Run a strategy against a case pair. Point-based strategies need a
/// label; the line strategy ignores it.
pub fn match_strategy(
    strategy: &DetectionStrategy,
    gt: &CaseLandmarks,
    pred: &CaseLandmarks,
    label: LandmarkLabel,
    far_policy: FarMissPolicy,
) -> Result<ConfusionCounts> {
    match strategy {
        DetectionStrategy::Line => match_line(gt, pred),
        DetectionStrategy::Point => match_point(gt, pred, label),
        DetectionStrategy::PointThreshold { radius_mm } => {
            match_point_threshold(gt, pred, label, *radius_mm, far_policy)
        }
    }
}
