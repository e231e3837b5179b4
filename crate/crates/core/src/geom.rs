//! Domain types and geometric primitives: in-plane mm distances, septum
//! angles, angle wrapping, circular means, and the farthest-corner
//! distance bound.
//!
//! All distances are 2D in-plane (per slice). Matching and localisation
//! operate on slice-matched pairs, so no metric ever crosses slices.
//! Angles follow the image convention: y grows downward, so the clockwise
//! angle from the +x axis equals `atan2(dy, dx)` on raw coordinates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Which of the two right-ventricular insertion points a landmark refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LandmarkLabel {
    Anterior,
    Inferior,
}

impl LandmarkLabel {
    pub const ALL: [LandmarkLabel; 2] = [LandmarkLabel::Anterior, LandmarkLabel::Inferior];

    pub fn short_name(self) -> &'static str {
        match self {
            LandmarkLabel::Anterior => "ant",
            LandmarkLabel::Inferior => "inf",
        }
    }
}

impl std::fmt::Display for LandmarkLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Voxel grid extent and physical spacing of one multi-slice image.
///
/// Width/height/slices are voxel counts (all >= 1); spacing is mm per voxel
/// along (x, y, z), all components > 0. Enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGeometry {
    width: usize,
    height: usize,
    slices: usize,
    spacing: (f64, f64, f64),
}

impl ImageGeometry {
    pub fn new(width: usize, height: usize, slices: usize, spacing: (f64, f64, f64)) -> Result<Self> {
        if width < 1 || height < 1 || slices < 1 {
            return Err(Error::InvalidGeometry(format!(
                "extent must be at least 1 voxel per axis, got {width}x{height}x{slices}"
            )));
        }
        let (sx, sy, sz) = spacing;
        if !(sx > 0.0 && sy > 0.0 && sz > 0.0) || !(sx.is_finite() && sy.is_finite() && sz.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "spacing components must be positive and finite, got ({sx}, {sy}, {sz})"
            )));
        }
        Ok(Self {
            width,
            height,
            slices,
            spacing,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    /// Mm per voxel along (x, y, z).
    pub fn spacing(&self) -> (f64, f64, f64) {
        self.spacing
    }

    /// In-plane voxel count of a single slice.
    pub fn slice_len(&self) -> usize {
        self.width * self.height
    }

    /// Total voxel count of one channel.
    pub fn volume_len(&self) -> usize {
        self.width * self.height * self.slices
    }

    /// True when `other` describes the same in-plane grid (width, height,
    /// spacing). Slice counts may differ; see [`Self::same_grid`].
    pub fn same_plane(&self, other: &ImageGeometry) -> bool {
        self.width == other.width && self.height == other.height && self.spacing == other.spacing
    }

    /// True when all extents and the spacing match exactly.
    pub fn same_grid(&self, other: &ImageGeometry) -> bool {
        self.same_plane(other) && self.slices == other.slices
    }

    /// Returns a copy with the slice count replaced.
    pub fn with_slices(&self, slices: usize) -> Result<Self> {
        Self::new(self.width, self.height, slices, self.spacing)
    }

    fn contains(&self, x: f64, y: f64, slice: usize) -> bool {
        x >= 0.0 && x < self.width as f64 && y >= 0.0 && y < self.height as f64 && slice < self.slices
    }
}

/// A labeled continuous in-plane position on one slice, in voxel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkPoint {
    pub label: LandmarkLabel,
    pub slice_index: usize,
    pub x: f64,
    pub y: f64,
}

impl LandmarkPoint {
    pub fn new(label: LandmarkLabel, slice_index: usize, x: f64, y: f64) -> Self {
        Self {
            label,
            slice_index,
            x,
            y,
        }
    }

    /// Position in physical mm under the given spacing.
    pub fn to_mm(&self, geometry: &ImageGeometry) -> (f64, f64) {
        let (sx, sy, _) = geometry.spacing();
        (self.x * sx, self.y * sy)
    }
}

/// The optional anterior/inferior points of one slice. At most one point
/// per label, by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SliceLandmarks {
    pub slice_index: usize,
    pub anterior: Option<LandmarkPoint>,
    pub inferior: Option<LandmarkPoint>,
}

impl SliceLandmarks {
    pub fn point(&self, label: LandmarkLabel) -> Option<&LandmarkPoint> {
        match label {
            LandmarkLabel::Anterior => self.anterior.as_ref(),
            LandmarkLabel::Inferior => self.inferior.as_ref(),
        }
    }

    pub fn has_both(&self) -> bool {
        self.anterior.is_some() && self.inferior.is_some()
    }

    pub fn point_count(&self) -> usize {
        self.anterior.is_some() as usize + self.inferior.is_some() as usize
    }
}

/// Per-case collection of slice landmarks plus the image geometry they
/// live in. Slice indices are strictly increasing and every point lies
/// inside the geometry; both enforced at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseLandmarks {
    case_id: String,
    geometry: ImageGeometry,
    slices: Vec<SliceLandmarks>,
}

impl CaseLandmarks {
    pub fn new(case_id: String, geometry: ImageGeometry, slices: Vec<SliceLandmarks>) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for slice in &slices {
            if let Some(p) = prev {
                if slice.slice_index <= p {
                    return Err(Error::InvalidLandmark(format!(
                        "case {case_id}: slice indices must be strictly increasing, {p} followed by {}",
                        slice.slice_index
                    )));
                }
            }
            prev = Some(slice.slice_index);
            for label in LandmarkLabel::ALL {
                if let Some(point) = slice.point(label) {
                    if point.slice_index != slice.slice_index {
                        return Err(Error::InvalidLandmark(format!(
                            "case {case_id}: {label} point stored on slice {} carries slice_index {}",
                            slice.slice_index, point.slice_index
                        )));
                    }
                    if point.label != label {
                        return Err(Error::InvalidLandmark(format!(
                            "case {case_id}: slice {} stores a {} point in the {label} slot",
                            slice.slice_index, point.label
                        )));
                    }
                    if !geometry.contains(point.x, point.y, point.slice_index) {
                        return Err(Error::OutOfBounds {
                            x: point.x,
                            y: point.y,
                            slice: point.slice_index,
                            width: geometry.width(),
                            height: geometry.height(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            case_id,
            geometry,
            slices,
        })
    }

    /// An empty case (no landmarks on any slice).
    pub fn empty(case_id: String, geometry: ImageGeometry) -> Self {
        Self {
            case_id,
            geometry,
            slices: Vec::new(),
        }
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn geometry(&self) -> &ImageGeometry {
        &self.geometry
    }

    /// Slices that carry at least one point, in increasing slice order.
    pub fn slices(&self) -> &[SliceLandmarks] {
        &self.slices
    }

    pub fn slice(&self, slice_index: usize) -> Option<&SliceLandmarks> {
        self.slices
            .binary_search_by_key(&slice_index, |s| s.slice_index)
            .ok()
            .map(|i| &self.slices[i])
    }

    pub fn point_at(&self, slice_index: usize, label: LandmarkLabel) -> Option<&LandmarkPoint> {
        self.slice(slice_index).and_then(|s| s.point(label))
    }

    pub fn points(&self, label: LandmarkLabel) -> impl Iterator<Item = &LandmarkPoint> {
        self.slices.iter().filter_map(move |s| s.point(label))
    }

    pub fn point_count(&self) -> usize {
        self.slices.iter().map(|s| s.point_count()).sum()
    }
}

/// Incremental builder for [`CaseLandmarks`], used when points arrive one
/// at a time (heatmap decoding, file parsing, synthesis).
#[derive(Debug)]
pub struct CaseLandmarksBuilder {
    case_id: String,
    geometry: ImageGeometry,
    slices: BTreeMap<usize, SliceLandmarks>,
}

impl CaseLandmarksBuilder {
    pub fn new(case_id: impl Into<String>, geometry: ImageGeometry) -> Self {
        Self {
            case_id: case_id.into(),
            geometry,
            slices: BTreeMap::new(),
        }
    }

    pub fn add_point(&mut self, point: LandmarkPoint) -> Result<()> {
        if !self.geometry.contains(point.x, point.y, point.slice_index) {
            return Err(Error::OutOfBounds {
                x: point.x,
                y: point.y,
                slice: point.slice_index,
                width: self.geometry.width(),
                height: self.geometry.height(),
            });
        }
        let slice = self
            .slices
            .entry(point.slice_index)
            .or_insert_with(|| SliceLandmarks {
                slice_index: point.slice_index,
                ..SliceLandmarks::default()
            });
        let slot = match point.label {
            LandmarkLabel::Anterior => &mut slice.anterior,
            LandmarkLabel::Inferior => &mut slice.inferior,
        };
        if slot.is_some() {
            return Err(Error::InvalidLandmark(format!(
                "case {}: duplicate {} point on slice {}",
                self.case_id, point.label, point.slice_index
            )));
        }
        *slot = Some(point);
        Ok(())
    }

    pub fn finish(self) -> CaseLandmarks {
        CaseLandmarks {
            case_id: self.case_id,
            geometry: self.geometry,
            slices: self.slices.into_values().collect(),
        }
    }
}

/// An angle in degrees, normalized to `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub fn from_degrees(degrees: f64) -> Self {
        let mut d = degrees.rem_euclid(360.0);
        // rem_euclid can return exactly 360.0 for tiny negative inputs.
        if d >= 360.0 {
            d = 0.0;
        }
        Self(d)
    }

    pub fn degrees(self) -> f64 {
        self.0
    }
}

/// In-plane Euclidean distance between two points in mm.
///
/// Per-slice metric: only the x/y offsets enter, scaled by the in-plane
/// spacing. Symmetric and translation-invariant.
pub fn distance_mm(a: &LandmarkPoint, b: &LandmarkPoint, geometry: &ImageGeometry) -> f64 {
    let (sx, sy, _) = geometry.spacing();
    let dx = (a.x - b.x) * sx;
    let dy = (a.y - b.y) * sy;
    (dx * dx + dy * dy).sqrt()
}

/// Clockwise angle between the +x axis and the anterior->inferior vector,
/// in image coordinates (y grows downward, so clockwise equals increasing
/// screen-y). Spacing is applied before the angle, so anisotropic in-plane
/// spacing is handled.
pub fn septum_angle(ant: &LandmarkPoint, inf: &LandmarkPoint, geometry: &ImageGeometry) -> Result<Angle> {
    let (ax, ay) = ant.to_mm(geometry);
    let (ix, iy) = inf.to_mm(geometry);
    let dx = ix - ax;
    let dy = iy - ay;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateAngle { x: ax, y: ay });
    }
    Ok(Angle::from_degrees(dy.atan2(dx).to_degrees()))
}

/// Smallest absolute difference between two angles, in `[0, 180]` degrees.
pub fn angle_difference(a: Angle, b: Angle) -> f64 {
    let d = (a.degrees() - b.degrees()).abs() % 360.0;
    d.min(360.0 - d)
}

/// Distance in mm from `gt` to the farthest of the four in-plane corner
/// voxels `(0,0)`, `(W-1,0)`, `(0,H-1)`, `(W-1,H-1)`.
///
/// This is the penalty assigned to a missed ground-truth point: no
/// prediction anywhere in the image could have been farther away.
pub fn upper_bound_distance(gt: &LandmarkPoint, geometry: &ImageGeometry) -> Result<f64> {
    if !geometry.contains(gt.x, gt.y, gt.slice_index) {
        return Err(Error::OutOfBounds {
            x: gt.x,
            y: gt.y,
            slice: gt.slice_index,
            width: geometry.width(),
            height: geometry.height(),
        });
    }
    Ok(max_corner_distance_mm(gt, geometry))
}

/// Farthest-corner distance without the bounds check. Well-defined for any
/// point; callers that hold validated cases use this directly.
pub(crate) fn max_corner_distance_mm(point: &LandmarkPoint, geometry: &ImageGeometry) -> f64 {
    let xs = [0.0, (geometry.width() - 1) as f64];
    let ys = [0.0, (geometry.height() - 1) as f64];
    let mut best = 0.0f64;
    for &cx in &xs {
        for &cy in &ys {
            let corner = LandmarkPoint::new(point.label, point.slice_index, cx, cy);
            best = best.max(distance_mm(point, &corner, geometry));
        }
    }
    best
}

/// Resultant length below which a circular mean is rejected as degenerate
/// (e.g. the antipodal pair {0, 180}).
const CIRCULAR_MEAN_MIN_RESULTANT: f64 = 1e-9;

/// Circular mean of a set of angles: `atan2` of the mean sine and cosine.
///
/// Equals the arithmetic mean whenever all angles lie within a common 180
/// degree arc. Fails on an empty set and when the resultant vector is too
/// short to define a direction.
pub fn circular_mean(angles: &[Angle]) -> Result<Angle> {
    if angles.is_empty() {
        return Err(Error::EmptyAngleSet);
    }
    let n = angles.len() as f64;
    let (mut sin_sum, mut cos_sum) = (0.0f64, 0.0f64);
    for a in angles {
        let rad = a.degrees().to_radians();
        sin_sum += rad.sin();
        cos_sum += rad.cos();
    }
    let (mean_sin, mean_cos) = (sin_sum / n, cos_sum / n);
    if (mean_sin * mean_sin + mean_cos * mean_cos).sqrt() < CIRCULAR_MEAN_MIN_RESULTANT {
        return Err(Error::DegenerateMean);
    }
    Ok(Angle::from_degrees(mean_sin.atan2(mean_cos).to_degrees()))
}
