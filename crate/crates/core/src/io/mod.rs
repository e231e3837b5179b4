//! File formats: NIfTI-1 volumes, the landmark interchange JSON, and the
//! long-format report CSV.

pub mod landmarks;
pub mod nifti;
// report_csv added with the report module.

pub use landmarks::{
    encode_landmarks, parse_landmarks, read_landmarks, write_landmarks, LandmarkFile,
};
pub use nifti::{encode_nifti, parse_nifti, read_nifti, write_nifti, HeatmapVolume};

