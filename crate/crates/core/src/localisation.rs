//! Localisation metrics: the three distance schemes over matched pairs and
//! the septum-angle error.
//!
//! Distances are per-label. The volume-based scheme compares mean points
//! (robust to outliers), the slice-based scheme averages per-slice
//! distances, and the bounded scheme additionally charges every missed
//! ground-truth point its farthest-corner distance so that detection
//! failures cannot silently improve the score. Angle errors need both
//! points of a slice and therefore always derive from line-strategy
//! matching, with 180 degrees as the bound for missed slices.

use std::collections::BTreeMap;

use crate::detection::{ConfusionCounts, MatchedPair};
use crate::error::{Error, Result};
use crate::geom::{
    angle_difference, distance_mm, max_corner_distance_mm, septum_angle, CaseLandmarks,
    ImageGeometry, LandmarkLabel, LandmarkPoint,
};

/// Angle penalty for a line-strategy FN slice under the bounded scheme,
/// in degrees.
pub const ANGLE_BOUND_DEG: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalisationMethod {
    VolumeBased,
    SliceBased,
    SliceBasedBounded,
}

impl LocalisationMethod {
    pub const ALL: [LocalisationMethod; 3] = [
        LocalisationMethod::VolumeBased,
        LocalisationMethod::SliceBased,
        LocalisationMethod::SliceBasedBounded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LocalisationMethod::VolumeBased => "volume",
            LocalisationMethod::SliceBased => "slice",
            LocalisationMethod::SliceBasedBounded => "slice-bounded",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "volume" => Ok(LocalisationMethod::VolumeBased),
            "slice" => Ok(LocalisationMethod::SliceBased),
            "slice-bounded" => Ok(LocalisationMethod::SliceBasedBounded),
            other => Err(Error::Input(format!(
                "unknown localisation method {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for LocalisationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which penalty a missed ground-truth point receives under the bounded
/// scheme.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BoundMode {
    /// Distance from the point to the farthest in-plane image corner.
    #[default]
    FarthestCorner,
    /// A fixed, image-size independent constant in mm.
    Global(f64),
}

impl BoundMode {
    fn penalty_mm(&self, gt: &LandmarkPoint, geometry: &ImageGeometry) -> f64 {
        match self {
            BoundMode::FarthestCorner => max_corner_distance_mm(gt, geometry),
            BoundMode::Global(mm) => *mm,
        }
    }
}

/// Distance between the mean ground-truth point and the mean predicted
/// point across all matched pairs. NA when there are no pairs.
pub fn volume_distance(pairs: &[MatchedPair], geometry: &ImageGeometry) -> Option<f64> {
    let first = pairs.first()?;
    let n = pairs.len() as f64;
    let mut gt = (0.0, 0.0);
    let mut pred = (0.0, 0.0);
    for pair in pairs {
        gt.0 += pair.gt.x;
        gt.1 += pair.gt.y;
        pred.0 += pair.pred.x;
        pred.1 += pair.pred.y;
    }
    let mean_gt = LandmarkPoint::new(first.gt.label, first.gt.slice_index, gt.0 / n, gt.1 / n);
    let mean_pred =
        LandmarkPoint::new(first.gt.label, first.gt.slice_index, pred.0 / n, pred.1 / n);
    Some(distance_mm(&mean_gt, &mean_pred, geometry))
}

/// Arithmetic mean of the per-pair distances. NA when there are no pairs.
pub fn slice_distance(pairs: &[MatchedPair], geometry: &ImageGeometry) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let sum: f64 = pairs
        .iter()
        .map(|p| distance_mm(&p.gt, &p.pred, geometry))
        .sum();
    Some(sum / pairs.len() as f64)
}

/// Slice-based distance with an upper-bound penalty for every missed
/// ground-truth point. NA only when there are neither pairs nor misses.
pub fn bounded_slice_distance(
    pairs: &[MatchedPair],
    fn_gt_points: &[LandmarkPoint],
    geometry: &ImageGeometry,
    bound: BoundMode,
) -> Option<f64> {
    let n = pairs.len() + fn_gt_points.len();
    if n == 0 {
        return None;
    }
    let matched: f64 = pairs
        .iter()
        .map(|p| distance_mm(&p.gt, &p.pred, geometry))
        .sum();
    let penalties: f64 = fn_gt_points
        .iter()
        .map(|gt| bound.penalty_mm(gt, geometry))
        .sum();
    Some((matched + penalties) / n as f64)
}

/// Septum-angle error of one case under one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleError {
    /// Mean angle difference in degrees, in `[0, 180]`; NA when no slice
    /// contributed.
    pub delta_deg: Option<f64>,
    /// Slices that should have contributed but had a degenerate or
    /// incomplete septum axis.
    pub excluded_slices: u32,
}

/// Per-slice (gt, pred) pairs for both labels, from line-strategy matches.
fn pairs_by_slice(
    counts: &ConfusionCounts,
) -> BTreeMap<usize, (Option<&MatchedPair>, Option<&MatchedPair>)> {
    let mut map: BTreeMap<usize, (Option<&MatchedPair>, Option<&MatchedPair>)> = BTreeMap::new();
    for pair in &counts.matched_pairs {
        let entry = map.entry(pair.gt.slice_index).or_default();
        match pair.gt.label {
            LandmarkLabel::Anterior => entry.0 = Some(pair),
            LandmarkLabel::Inferior => entry.1 = Some(pair),
        }
    }
    map
}

fn mean_point(points: &[&LandmarkPoint]) -> Option<LandmarkPoint> {
    let first = points.first()?;
    let n = points.len() as f64;
    let x = points.iter().map(|p| p.x).sum::<f64>() / n;
    let y = points.iter().map(|p| p.y).sum::<f64>() / n;
    Some(LandmarkPoint::new(first.label, first.slice_index, x, y))
}

/// Septum-angle error between ground truth and prediction.
///
/// Volume-based: the angle between the septum line of the mean GT points
/// and of the mean PRED points, over line-strategy TP slices. Slice-based:
/// the mean of per-slice angle differences. Bounded: slice-based with each
/// line-strategy FN slice contributing the 180-degree bound. Slices whose
/// septum axis is degenerate (or incomplete on malformed input) are
/// excluded and counted.
pub fn angle_error(
    geometry: &ImageGeometry,
    line_counts: &ConfusionCounts,
    method: LocalisationMethod,
) -> AngleError {
    match method {
        LocalisationMethod::VolumeBased => volume_angle_error(geometry, line_counts),
        LocalisationMethod::SliceBased => slice_angle_error(geometry, line_counts, false),
        LocalisationMethod::SliceBasedBounded => slice_angle_error(geometry, line_counts, true),
    }
}

fn volume_angle_error(geometry: &ImageGeometry, line_counts: &ConfusionCounts) -> AngleError {
    let gt_ant: Vec<&LandmarkPoint> = line_counts
        .matched_pairs_for(LandmarkLabel::Anterior)
        .map(|p| &p.gt)
        .collect();
    let gt_inf: Vec<&LandmarkPoint> = line_counts
        .matched_pairs_for(LandmarkLabel::Inferior)
        .map(|p| &p.gt)
        .collect();
    let pred_ant: Vec<&LandmarkPoint> = line_counts
        .matched_pairs_for(LandmarkLabel::Anterior)
        .map(|p| &p.pred)
        .collect();
    let pred_inf: Vec<&LandmarkPoint> = line_counts
        .matched_pairs_for(LandmarkLabel::Inferior)
        .map(|p| &p.pred)
        .collect();
    let means = (
        mean_point(&gt_ant),
        mean_point(&gt_inf),
        mean_point(&pred_ant),
        mean_point(&pred_inf),
    );
    let (Some(ga), Some(gi), Some(pa), Some(pi)) = means else {
        return AngleError {
            delta_deg: None,
            excluded_slices: 0,
        };
    };
    match (
        septum_angle(&ga, &gi, geometry),
        septum_angle(&pa, &pi, geometry),
    ) {
        (Ok(g), Ok(p)) => AngleError {
            delta_deg: Some(angle_difference(g, p)),
            excluded_slices: 0,
        },
        _ => AngleError {
            delta_deg: None,
            excluded_slices: 1,
        },
    }
}

fn slice_angle_error(
    geometry: &ImageGeometry,
    line_counts: &ConfusionCounts,
    bounded: bool,
) -> AngleError {
    let mut diffs: Vec<f64> = Vec::new();
    let mut excluded = 0u32;
    for (_, (ant, inf)) in pairs_by_slice(line_counts) {
        let (Some(ant), Some(inf)) = (ant, inf) else {
            // TP slice without both labels (malformed ground truth): no
            // septum axis to compare.
            excluded += 1;
            continue;
        };
        let gt_angle = septum_angle(&ant.gt, &inf.gt, geometry);
        let pred_angle = septum_angle(&ant.pred, &inf.pred, geometry);
        match (gt_angle, pred_angle) {
            (Ok(g), Ok(p)) => diffs.push(angle_difference(g, p)),
            _ => excluded += 1,
        }
    }
    if bounded {
        diffs.extend(std::iter::repeat_n(
            ANGLE_BOUND_DEG,
            line_counts.false_negatives as usize,
        ));
    }
    let delta_deg = if diffs.is_empty() {
        None
    } else {
        Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
    };
    AngleError {
        delta_deg,
        excluded_slices: excluded,
    }
}

/// One case's localisation outcome under a (strategy, method) pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalisationResult {
    pub strategy: crate::detection::StrategyKind,
    pub method: LocalisationMethod,
    pub d_ant: Option<f64>,
    pub d_inf: Option<f64>,
    /// Only line-strategy results carry an angle error.
    pub delta_alpha: Option<f64>,
}

/// Distances for one label under one method, given that strategy's counts.
pub fn label_distance(
    counts: &ConfusionCounts,
    label: LandmarkLabel,
    geometry: &ImageGeometry,
    method: LocalisationMethod,
    bound: BoundMode,
) -> Option<f64> {
    let pairs: Vec<MatchedPair> = counts.matched_pairs_for(label).copied().collect();
    match method {
        LocalisationMethod::VolumeBased => volume_distance(&pairs, geometry),
        LocalisationMethod::SliceBased => slice_distance(&pairs, geometry),
        LocalisationMethod::SliceBasedBounded => {
            let misses: Vec<LandmarkPoint> = counts.unmatched_gt_for(label).copied().collect();
            bounded_slice_distance(&pairs, &misses, geometry, bound)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{match_line, StrategyKind};
    use crate::geom::{CaseLandmarks, CaseLandmarksBuilder, ImageGeometry};
    use approx::assert_abs_diff_eq;

    use LandmarkLabel::{Anterior, Inferior};

    fn unit_geometry() -> ImageGeometry {
        ImageGeometry::new(400, 400, 8, (1.0, 1.0, 8.0)).unwrap()
    }

    fn pair(gx: f64, gy: f64, px: f64, py: f64, slice: usize) -> MatchedPair {
        MatchedPair {
            gt: LandmarkPoint::new(Anterior, slice, gx, gy),
            pred: LandmarkPoint::new(Anterior, slice, px, py),
        }
    }

    #[test]
    fn volume_distance_cancels_symmetric_outliers() {
        let g = unit_geometry();
        let pairs = [pair(10.0, 10.0, 13.0, 14.0, 0), pair(10.0, 10.0, 7.0, 6.0, 1)];
        assert_abs_diff_eq!(volume_distance(&pairs, &g).unwrap(), 0.0, epsilon = 1e-12);
        // Same pairs, slice-based: both are 3-4-5 triangles, mean 5.
        assert_abs_diff_eq!(slice_distance(&pairs, &g).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn single_pair_reduces_to_plain_distance() {
        let g = unit_geometry();
        let pairs = [pair(0.0, 0.0, 3.0, 4.0, 0)];
        assert_abs_diff_eq!(volume_distance(&pairs, &g).unwrap(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(slice_distance(&pairs, &g).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_pairs_are_na() {
        let g = unit_geometry();
        assert_eq!(volume_distance(&[], &g), None);
        assert_eq!(slice_distance(&[], &g), None);
        assert_eq!(
            bounded_slice_distance(&[], &[], &g, BoundMode::FarthestCorner),
            None
        );
    }

    #[test]
    fn slice_distance_is_plain_mean() {
        let g = unit_geometry();
        let pairs = [
            pair(0.0, 0.0, 1.0, 0.0, 0),
            pair(0.0, 0.0, 2.0, 0.0, 1),
            pair(0.0, 0.0, 3.0, 0.0, 2),
        ];
        assert_abs_diff_eq!(slice_distance(&pairs, &g).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn bounded_distance_mixes_pairs_and_penalties() {
        // Geometry chosen so the corner bound of (0, 0) is exactly 300 mm.
        let g = ImageGeometry::new(301, 1, 2, (1.0, 1.0, 1.0)).unwrap();
        let pairs = [pair(0.0, 0.0, 5.0, 0.0, 0)];
        let misses = [LandmarkPoint::new(Anterior, 1, 0.0, 0.0)];
        let got = bounded_slice_distance(&pairs, &misses, &g, BoundMode::FarthestCorner).unwrap();
        // Oracle: (5 + 300) / 2.
        assert_abs_diff_eq!(got, 152.5, epsilon = 1e-12);
    }

    #[test]
    fn bounded_without_misses_equals_slice_distance() {
        let g = unit_geometry();
        let pairs = [pair(0.0, 0.0, 3.0, 4.0, 0), pair(5.0, 5.0, 5.0, 6.0, 1)];
        assert_eq!(
            bounded_slice_distance(&pairs, &[], &g, BoundMode::FarthestCorner),
            slice_distance(&pairs, &g)
        );
    }

    #[test]
    fn bounded_with_only_misses_is_mean_of_bounds() {
        let g = ImageGeometry::new(101, 1, 2, (1.0, 1.0, 1.0)).unwrap();
        let misses = [
            LandmarkPoint::new(Anterior, 0, 0.0, 0.0),   // bound 100
            LandmarkPoint::new(Anterior, 1, 50.0, 0.0),  // bound 50
        ];
        let got = bounded_slice_distance(&[], &misses, &g, BoundMode::FarthestCorner).unwrap();
        assert_abs_diff_eq!(got, 75.0, epsilon = 1e-12);
    }

    #[test]
    fn global_bound_replaces_corner_distances() {
        let g = unit_geometry();
        let misses = [
            LandmarkPoint::new(Anterior, 0, 0.0, 0.0),
            LandmarkPoint::new(Anterior, 1, 399.0, 399.0),
        ];
        let got = bounded_slice_distance(&[], &misses, &g, BoundMode::Global(250.0)).unwrap();
        assert_abs_diff_eq!(got, 250.0, epsilon = 1e-12);
    }

    /// Build a case with both points on each listed slice, at the given
    /// anterior position and a fixed offset to the inferior point.
    fn septum_case(id: &str, slices: &[usize], ant: (f64, f64), inf: (f64, f64)) -> CaseLandmarks {
        let mut b = CaseLandmarksBuilder::new(id, unit_geometry());
        for &s in slices {
            b.add_point(LandmarkPoint::new(Anterior, s, ant.0, ant.1)).unwrap();
            b.add_point(LandmarkPoint::new(Inferior, s, inf.0, inf.1)).unwrap();
        }
        b.finish()
    }

    fn rotate_about(p: (f64, f64), center: (f64, f64), deg: f64) -> (f64, f64) {
        let (s, c) = deg.to_radians().sin_cos();
        let (dx, dy) = (p.0 - center.0, p.1 - center.1);
        (center.0 + c * dx - s * dy, center.1 + s * dx + c * dy)
    }

    #[test]
    fn identity_prediction_has_zero_angle_error() {
        let gt = septum_case("c", &[0, 1, 2], (100.0, 100.0), (100.0, 140.0));
        let counts = match_line(&gt, &gt.clone()).unwrap();
        for method in LocalisationMethod::ALL {
            let e = angle_error(gt.geometry(), &counts, method);
            assert_eq!(e.delta_deg, Some(0.0), "{method}");
            assert_eq!(e.excluded_slices, 0);
        }
    }

    #[test]
    fn rotated_prediction_reports_the_rotation() {
        let ant = (100.0, 100.0);
        let inf = (100.0, 140.0);
        let mid = (100.0, 120.0);
        let gt = septum_case("c", &[0, 1, 2], ant, inf);
        let rot_ant = rotate_about(ant, mid, 10.0);
        let rot_inf = rotate_about(inf, mid, 10.0);
        let pred = septum_case("c", &[0, 1, 2], rot_ant, rot_inf);
        let counts = match_line(&gt, &pred).unwrap();
        let e = angle_error(gt.geometry(), &counts, LocalisationMethod::SliceBased);
        assert_abs_diff_eq!(e.delta_deg.unwrap(), 10.0, epsilon = 1e-9);
        let v = angle_error(gt.geometry(), &counts, LocalisationMethod::VolumeBased);
        assert_abs_diff_eq!(v.delta_deg.unwrap(), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn bounded_angle_charges_180_per_missed_slice() {
        let ant = (100.0, 100.0);
        let inf = (100.0, 140.0);
        let mid = (100.0, 120.0);
        let gt = septum_case("c", &[0, 1], ant, inf);
        // Slice 0 predicted with a 20-degree rotation, slice 1 missed.
        let rot_ant = rotate_about(ant, mid, 20.0);
        let rot_inf = rotate_about(inf, mid, 20.0);
        let pred = septum_case("c", &[0], rot_ant, rot_inf);
        let counts = match_line(&gt, &pred).unwrap();
        let bounded = angle_error(gt.geometry(), &counts, LocalisationMethod::SliceBasedBounded);
        assert_abs_diff_eq!(bounded.delta_deg.unwrap(), 100.0, epsilon = 1e-9);
        // Unbounded slice-based sees only the matched slice.
        let unbounded = angle_error(gt.geometry(), &counts, LocalisationMethod::SliceBased);
        assert_abs_diff_eq!(unbounded.delta_deg.unwrap(), 20.0, epsilon = 1e-9);
    }

    #[test]
    fn no_contributing_slices_is_na() {
        let gt = septum_case("c", &[0], (100.0, 100.0), (100.0, 140.0));
        let empty = CaseLandmarks::empty("c".into(), *gt.geometry());
        let counts = match_line(&gt, &empty).unwrap();
        let unbounded = angle_error(gt.geometry(), &counts, LocalisationMethod::SliceBased);
        assert_eq!(unbounded.delta_deg, None);
        // Bounded: the missed slice still contributes its 180-degree bound.
        let bounded = angle_error(gt.geometry(), &counts, LocalisationMethod::SliceBasedBounded);
        assert_eq!(bounded.delta_deg, Some(180.0));
    }

    #[test]
    fn degenerate_septum_axis_is_excluded_and_counted() {
        // Predicted anterior and inferior coincide on slice 0.
        let gt = septum_case("c", &[0, 1], (100.0, 100.0), (100.0, 140.0));
        let mut b = CaseLandmarksBuilder::new("c", unit_geometry());
        b.add_point(LandmarkPoint::new(Anterior, 0, 100.0, 120.0)).unwrap();
        b.add_point(LandmarkPoint::new(Inferior, 0, 100.0, 120.0)).unwrap();
        b.add_point(LandmarkPoint::new(Anterior, 1, 100.0, 100.0)).unwrap();
        b.add_point(LandmarkPoint::new(Inferior, 1, 100.0, 140.0)).unwrap();
        let pred = b.finish();
        let counts = match_line(&gt, &pred).unwrap();
        let e = angle_error(gt.geometry(), &counts, LocalisationMethod::SliceBased);
        assert_eq!(e.excluded_slices, 1);
        assert_abs_diff_eq!(e.delta_deg.unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn label_distance_uses_per_label_views() {
        let gt = septum_case("c", &[0, 1], (100.0, 100.0), (100.0, 140.0));
        let pred = septum_case("c", &[0, 1], (103.0, 104.0), (100.0, 140.0));
        let counts = match_line(&gt, &pred).unwrap();
        let d_ant = label_distance(
            &counts,
            Anterior,
            gt.geometry(),
            LocalisationMethod::SliceBased,
            BoundMode::FarthestCorner,
        );
        let d_inf = label_distance(
            &counts,
            Inferior,
            gt.geometry(),
            LocalisationMethod::SliceBased,
            BoundMode::FarthestCorner,
        );
        assert_abs_diff_eq!(d_ant.unwrap(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d_inf.unwrap(), 0.0, epsilon = 1e-12);
        let r = LocalisationResult {
            strategy: StrategyKind::Line,
            method: LocalisationMethod::SliceBased,
            d_ant,
            d_inf,
            delta_alpha: None,
        };
        assert_eq!(r.strategy, StrategyKind::Line);
    }
}
