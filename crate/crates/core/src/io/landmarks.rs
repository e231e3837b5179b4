//! The landmark interchange file: a human-diffable JSON document holding
//! per-case, per-slice anterior/inferior points plus image geometry.
//!
//! Schema (version 1):
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "cases": [
//!     {
//!       "case_id": "case_0001",
//!       "geometry": { "width": 224, "height": 224, "slices": 10,
//!                     "spacing_mm": [1.2, 1.2, 8.0] },
//!       "slices": [ { "index": 0, "ant": [101.5, 88.25], "inf": null } ]
//!     }
//!   ]
//! }
//! ```
//!
//! Unknown fields are ignored on read and never emitted on write.
//! Coordinates round-trip losslessly (shortest-decimal f64 encoding).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    CaseLandmarks, ImageGeometry, LandmarkLabel, LandmarkPoint, SliceLandmarks,
};

pub const SCHEMA_VERSION: u32 = 1;

/// A parsed landmark file: schema version plus validated cases with unique
/// case ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFile {
    pub schema_version: u32,
    pub cases: Vec<CaseLandmarks>,
}

impl LandmarkFile {
    pub fn new(cases: Vec<CaseLandmarks>) -> Result<Self> {
        check_unique_ids(&cases).map_err(Error::InvalidLandmark)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            cases,
        })
    }
}

fn check_unique_ids(cases: &[CaseLandmarks]) -> std::result::Result<(), String> {
    let mut seen = std::collections::HashSet::new();
    for case in cases {
        if !seen.insert(case.case_id()) {
            return Err(format!("duplicate case_id {:?}", case.case_id()));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct FileDto {
    schema_version: u32,
    cases: Vec<CaseDto>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CaseDto {
    case_id: String,
    geometry: GeometryDto,
    slices: Vec<SliceDto>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeometryDto {
    width: usize,
    height: usize,
    slices: usize,
    spacing_mm: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct SliceDto {
    index: usize,
    ant: Option<[f64; 2]>,
    inf: Option<[f64; 2]>,
}

fn to_dto(file: &LandmarkFile) -> FileDto {
    FileDto {
        schema_version: file.schema_version,
        cases: file
            .cases
            .iter()
            .map(|case| {
                let g = case.geometry();
                let (sx, sy, sz) = g.spacing();
                CaseDto {
                    case_id: case.case_id().to_string(),
                    geometry: GeometryDto {
                        width: g.width(),
                        height: g.height(),
                        slices: g.slices(),
                        spacing_mm: [sx, sy, sz],
                    },
                    slices: case
                        .slices()
                        .iter()
                        .map(|s| SliceDto {
                            index: s.slice_index,
                            ant: s.anterior.map(|p| [p.x, p.y]),
                            inf: s.inferior.map(|p| [p.x, p.y]),
                        })
                        .collect(),
                }
            })
            .collect(),
    }
}

fn from_dto(dto: FileDto) -> std::result::Result<LandmarkFile, String> {
    if dto.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            dto.schema_version
        ));
    }
    let mut cases = Vec::with_capacity(dto.cases.len());
    for case in dto.cases {
        let ctx = |msg: String| format!("case {:?}: {msg}", case.case_id);
        let [sx, sy, sz] = case.geometry.spacing_mm;
        let geometry = ImageGeometry::new(
            case.geometry.width,
            case.geometry.height,
            case.geometry.slices,
            (sx, sy, sz),
        )
        .map_err(|e| ctx(e.to_string()))?;
        let slices: Vec<SliceLandmarks> = case
            .slices
            .iter()
            .map(|s| SliceLandmarks {
                slice_index: s.index,
                anterior: s.ant.map(|[x, y]| {
                    LandmarkPoint::new(LandmarkLabel::Anterior, s.index, x, y)
                }),
                inferior: s.inf.map(|[x, y]| {
                    LandmarkPoint::new(LandmarkLabel::Inferior, s.index, x, y)
                }),
            })
            .collect();
        cases.push(
            CaseLandmarks::new(case.case_id.clone(), geometry, slices)
                .map_err(|e| ctx(e.to_string()))?,
        );
    }
    check_unique_ids(&cases)?;
    Ok(LandmarkFile {
        schema_version: dto.schema_version,
        cases,
    })
}

/// Parse landmark JSON text. Schema violations name the offending case and
/// slice.
pub fn parse_landmarks(text: &str) -> std::result::Result<LandmarkFile, String> {
    let dto: FileDto = serde_json::from_str(text).map_err(|e| e.to_string())?;
    from_dto(dto)
}

/// Serialize a landmark file as pretty-printed JSON.
pub fn encode_landmarks(file: &LandmarkFile) -> String {
    let mut text =
        serde_json::to_string_pretty(&to_dto(file)).expect("landmark DTO serialization");
    text.push('\n');
    text
}

pub fn read_landmarks(path: &Path) -> Result<LandmarkFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_landmarks(&text).map_err(|message| Error::LandmarkFile {
        path: path.to_path_buf(),
        message,
    })
}

pub fn write_landmarks(file: &LandmarkFile, path: &Path) -> Result<()> {
    std::fs::write(path, encode_landmarks(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::CaseLandmarksBuilder;

    fn sample_file() -> LandmarkFile {
        let g = ImageGeometry::new(224, 224, 4, (1.2, 1.2, 8.0)).unwrap();
        let mut b = CaseLandmarksBuilder::new("case_0001", g);
        b.add_point(LandmarkPoint::new(LandmarkLabel::Anterior, 0, 101.5, 88.25))
            .unwrap();
        b.add_point(LandmarkPoint::new(LandmarkLabel::Inferior, 0, 97.0, 120.125))
            .unwrap();
        b.add_point(LandmarkPoint::new(LandmarkLabel::Anterior, 2, 100.0, 90.0))
            .unwrap();
        let c1 = b.finish();
        let c2 = CaseLandmarks::empty(
            "case_0002".into(),
            ImageGeometry::new(128, 128, 2, (1.0, 1.0, 5.0)).unwrap(),
        );
        LandmarkFile::new(vec![c1, c2]).unwrap()
    }

    #[test]
    fn roundtrip_preserves_everything() {
        let file = sample_file();
        let back = parse_landmarks(&encode_landmarks(&file)).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn write_read_is_byte_stable_modulo_whitespace() {
        let file = sample_file();
        let first = encode_landmarks(&file);
        let second = encode_landmarks(&parse_landmarks(&first).unwrap());
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        assert_eq!(strip(&first), strip(&second));
        assert_eq!(first, second);
    }

    #[test]
    fn empty_slice_entry_is_preserved() {
        let text = r#"{
            "schema_version": 1,
            "cases": [{
                "case_id": "c",
                "geometry": {"width": 8, "height": 8, "slices": 2, "spacing_mm": [1.0, 1.0, 1.0]},
                "slices": [{"index": 1, "ant": null, "inf": null}]
            }]
        }"#;
        let file = parse_landmarks(text).unwrap();
        assert_eq!(file.cases[0].slices().len(), 1);
        assert_eq!(file.cases[0].slices()[0].point_count(), 0);
        let back = parse_landmarks(&encode_landmarks(&file)).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn duplicate_case_id_rejected() {
        let g = ImageGeometry::new(8, 8, 1, (1.0, 1.0, 1.0)).unwrap();
        let err = LandmarkFile::new(vec![
            CaseLandmarks::empty("same".into(), g),
            CaseLandmarks::empty("same".into(), g),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("duplicate case_id"));
    }

    #[test]
    fn unknown_fields_ignored_on_read() {
        let text = r#"{
            "schema_version": 1,
            "made_by": "some other tool",
            "cases": [{
                "case_id": "c",
                "notes": ["extra"],
                "geometry": {"width": 8, "height": 8, "slices": 1, "spacing_mm": [1.0, 1.0, 1.0], "origin": [0, 0, 0]},
                "slices": [{"index": 0, "ant": [1.0, 2.0], "inf": null, "confidence": 0.5}]
            }]
        }"#;
        let file = parse_landmarks(text).unwrap();
        assert_eq!(file.cases[0].point_count(), 1);
        let encoded = encode_landmarks(&file);
        assert!(!encoded.contains("confidence"));
        assert!(!encoded.contains("origin"));
    }

    #[test]
    fn errors_name_case_and_slice() {
        let text = r#"{
            "schema_version": 1,
            "cases": [{
                "case_id": "bad_case",
                "geometry": {"width": 8, "height": 8, "slices": 1, "spacing_mm": [1.0, 1.0, 1.0]},
                "slices": [{"index": 0, "ant": [99.0, 2.0], "inf": null}]
            }]
        }"#;
        let err = parse_landmarks(text).unwrap_err();
        assert!(err.contains("bad_case"), "{err}");
        assert!(err.contains("slice 0"), "{err}");
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = r#"{"schema_version": 2, "cases": []}"#;
        assert!(parse_landmarks(text).unwrap_err().contains("schema_version"));
    }

    #[test]
    fn duplicate_slice_index_rejected() {
        let text = r#"{
            "schema_version": 1,
            "cases": [{
                "case_id": "c",
                "geometry": {"width": 8, "height": 8, "slices": 2, "spacing_mm": [1.0, 1.0, 1.0]},
                "slices": [{"index": 1, "ant": null, "inf": null},
                           {"index": 1, "ant": null, "inf": null}]
            }]
        }"#;
        assert!(parse_landmarks(text).is_err());
    }

    #[test]
    fn coordinates_roundtrip_losslessly() {
        let g = ImageGeometry::new(64, 64, 1, (1.2, 1.2, 8.0)).unwrap();
        let mut b = CaseLandmarksBuilder::new("c", g);
        let x = 13.123456789012345;
        let y = 7.000000123;
        b.add_point(LandmarkPoint::new(LandmarkLabel::Anterior, 0, x, y))
            .unwrap();
        let file = LandmarkFile::new(vec![b.finish()]).unwrap();
        let back = parse_landmarks(&encode_landmarks(&file)).unwrap();
        let p = back.cases[0].point_at(0, LandmarkLabel::Anterior).unwrap();
        assert_eq!(p.x, x);
        assert_eq!(p.y, y);
    }
}
