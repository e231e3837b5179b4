//! Error types shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid landmark data: {0}")]
    InvalidLandmark(String),

    #[error("point ({x}, {y}) on slice {slice} lies outside the {width}x{height} image")]
    OutOfBounds {
        x: f64,
        y: f64,
        slice: usize,
        width: usize,
        height: usize,
    },

    #[error("degenerate septum axis: anterior and inferior coincide at ({x}, {y}) mm")]
    DegenerateAngle { x: f64, y: f64 },

    #[error("circular mean of an empty angle set is undefined")]
    EmptyAngleSet,

    #[error("circular mean is degenerate: resultant vector has near-zero length")]
    DegenerateMean,

    #[error("{path}: {source}")]
    Nifti {
        path: PathBuf,
        #[source]
        source: NiftiError,
    },

    #[error("landmark file {path}: {message}")]
    LandmarkFile { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Parse errors for the NIfTI-1 subset reader. Every variant names the byte
/// offset at which the problem was detected.
#[derive(Debug, thiserror::Error)]
pub enum NiftiError {
    #[error("truncated file: need {needed} bytes at offset {offset}, file has {available}")]
    Truncated {
        offset: u64,
        needed: u64,
        available: u64,
    },

    #[error("bad magic {found:?} at offset {offset}: expected \"n+1\\0\"")]
    BadMagic { offset: u64, found: [u8; 4] },

    #[error("detached-header file (magic \"ni1\\0\" at offset {offset}) is not supported")]
    DetachedHeader { offset: u64 },

    #[error("cannot determine byte order: dim[0] at offset {offset} decodes to {le} (LE) / {be} (BE), neither in 1..=7")]
    UndecodableByteOrder { offset: u64, le: i16, be: i16 },

    #[error("unsupported datatype code {code} at offset {offset}: expected one of 2 (uint8), 4 (int16), 16 (float32), 64 (float64)")]
    UnsupportedDatatype { offset: u64, code: i16 },

    #[error("bitpix {bitpix} at offset {offset} does not match datatype {datatype}")]
    BitpixMismatch {
        offset: u64,
        bitpix: i16,
        datatype: i16,
    },

    #[error("unsupported dim[0] = {ndim} at offset {offset}: expected 3 or 4")]
    UnsupportedDimCount { offset: u64, ndim: i16 },

    #[error("non-positive dimension dim[{index}] = {value} at offset {offset}")]
    BadDimension { offset: u64, index: usize, value: i16 },

    #[error("non-positive voxel spacing pixdim[{index}] = {value} at offset {offset}")]
    BadSpacing { offset: u64, index: usize, value: f32 },

    #[error("invalid vox_offset {vox_offset} at offset {offset}: must be >= 348")]
    BadVoxOffset { offset: u64, vox_offset: f64 },

    #[error("non-finite voxel value at offset {offset}")]
    NonFinite { offset: u64 },
}
