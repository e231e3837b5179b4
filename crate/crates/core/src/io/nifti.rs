//! Reader/writer for the NIfTI-1 single-file subset used to carry heatmap
//! and mask volumes.
//!
//! Supported: magic `n+1\0`, datatypes uint8/int16/float32/float64, 3D or
//! 4D (4th axis = landmark channel), both byte orders on read. Integer
//! inputs are treated as masks and map to {0.0, 1.0}; float inputs have
//! `scl_slope`/`scl_inter` applied when the slope is nonzero. Orientation
//! matrices are ignored. The writer always emits little-endian float32.

use std::path::Path;

use crate::error::{Error, NiftiError, Result};
use crate::geom::ImageGeometry;

const HEADER_LEN: u64 = 348;
const MAGIC_OFFSET: u64 = 344;
const DIM_OFFSET: u64 = 40;
const DATATYPE_OFFSET: u64 = 70;
const BITPIX_OFFSET: u64 = 72;
const PIXDIM_OFFSET: u64 = 76;
const VOX_OFFSET_OFFSET: u64 = 108;
const SCL_SLOPE_OFFSET: u64 = 112;
const SCL_INTER_OFFSET: u64 = 116;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;

/// Multi-channel scalar volume. Channel order is fixed as
/// (anterior, inferior) when the volume carries landmark heatmaps.
///
/// Storage is channel-major with x fastest, matching the NIfTI layout:
/// `index = ((channel * slices + z) * height + y) * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapVolume {
    channels: usize,
    geometry: ImageGeometry,
    data: Vec<f64>,
}

impl HeatmapVolume {
    pub fn new(channels: usize, geometry: ImageGeometry, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Input("volume must have at least one channel".into()));
        }
        let expected = channels * geometry.volume_len();
        if data.len() != expected {
            return Err(Error::Input(format!(
                "volume data length {} does not match {} channels x {} voxels",
                data.len(),
                channels,
                geometry.volume_len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite value at linear index {i}")));
        }
        Ok(Self {
            channels,
            geometry,
            data,
        })
    }

    /// All-zero volume.
    pub fn zeros(channels: usize, geometry: ImageGeometry) -> Self {
        Self {
            channels,
            geometry,
            data: vec![0.0; channels * geometry.volume_len()],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn geometry(&self) -> &ImageGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn index(&self, channel: usize, x: usize, y: usize, z: usize) -> usize {
        ((channel * self.geometry.slices() + z) * self.geometry.height() + y) * self.geometry.width()
            + x
    }

    pub fn value(&self, channel: usize, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(channel, x, y, z)]
    }

    pub fn set_value(&mut self, channel: usize, x: usize, y: usize, z: usize, v: f64) {
        let i = self.index(channel, x, y, z);
        self.data[i] = v;
    }

    /// The contiguous data of one channel.
    pub fn channel_data(&self, channel: usize) -> &[f64] {
        let n = self.geometry.volume_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    /// Merge single-channel volumes that share a geometry into one
    /// multi-channel volume, in argument order.
    pub fn stack(volumes: &[HeatmapVolume]) -> Result<Self> {
        let first = volumes
            .first()
            .ok_or_else(|| Error::Input("cannot stack zero volumes".into()))?;
        let mut data = Vec::with_capacity(volumes.len() * first.geometry.volume_len());
        for v in volumes {
            if v.channels != 1 {
                return Err(Error::Input(format!(
                    "stack expects single-channel volumes, got {} channels",
                    v.channels
                )));
            }
            if !v.geometry.same_grid(&first.geometry) {
                return Err(Error::Input(
                    "stacked volumes must share extent and spacing".into(),
                ));
            }
            data.extend_from_slice(&v.data);
        }
        Self::new(volumes.len(), first.geometry, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ByteOrder {
    Little,
    Big,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    order: ByteOrder,
}

impl<'a> Cursor<'a> {
    fn i16_at(&self, offset: u64) -> i16 {
        let o = offset as usize;
        let raw = [self.bytes[o], self.bytes[o + 1]];
        match self.order {
            ByteOrder::Little => i16::from_le_bytes(raw),
            ByteOrder::Big => i16::from_be_bytes(raw),
        }
    }

    fn f32_at(&self, offset: u64) -> f32 {
        let o = offset as usize;
        let raw = [
            self.bytes[o],
            self.bytes[o + 1],
            self.bytes[o + 2],
            self.bytes[o + 3],
        ];
        match self.order {
            ByteOrder::Little => f32::from_le_bytes(raw),
            ByteOrder::Big => f32::from_be_bytes(raw),
        }
    }

    fn f64_at(&self, offset: u64) -> f64 {
        let o = offset as usize;
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&self.bytes[o..o + 8]);
        match self.order {
            ByteOrder::Little => f64::from_le_bytes(raw),
            ByteOrder::Big => f64::from_be_bytes(raw),
        }
    }
}

fn nifti_err(path: &Path, source: NiftiError) -> Error {
    Error::Nifti {
        path: path.to_path_buf(),
        source,
    }
}

fn bytes_per_value(datatype: i16) -> u64 {
    match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        _ => unreachable!("datatype validated before use"),
    }
}

fn expected_bitpix(datatype: i16) -> i16 {
    (bytes_per_value(datatype) * 8) as i16
}

/// Parse a NIfTI-1 single file into a [`HeatmapVolume`].
///
/// Byte order is auto-detected by requiring `dim[0]` to land in 1..=7.
/// The parser never reads past the declared payload and reports the byte
/// offset of everything it rejects.
pub fn read_nifti(path: &Path) -> Result<HeatmapVolume> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_nifti(&bytes).map_err(|e| nifti_err(path, e))
}

/// Parse NIfTI-1 bytes already in memory. See [`read_nifti`].
pub fn parse_nifti(bytes: &[u8]) -> std::result::Result<HeatmapVolume, NiftiError> {
    if (bytes.len() as u64) < HEADER_LEN {
        return Err(NiftiError::Truncated {
            offset: bytes.len() as u64,
            needed: HEADER_LEN,
            available: bytes.len() as u64,
        });
    }

    let magic: [u8; 4] = bytes[MAGIC_OFFSET as usize..MAGIC_OFFSET as usize + 4]
        .try_into()
        .unwrap();
    if &magic == b"ni1\0" {
        return Err(NiftiError::DetachedHeader {
            offset: MAGIC_OFFSET,
        });
    }
    if &magic != b"n+1\0" {
        return Err(NiftiError::BadMagic {
            offset: MAGIC_OFFSET,
            found: magic,
        });
    }

    // Byte-order heuristic: dim[0] must decode into 1..=7 in exactly one
    // of the two orders (the i16 byte-swap of 1..=7 is always >= 256).
    let le = Cursor {
        bytes,
        order: ByteOrder::Little,
    };
    let be = Cursor {
        bytes,
        order: ByteOrder::Big,
    };
    let dim0_le = le.i16_at(DIM_OFFSET);
    let dim0_be = be.i16_at(DIM_OFFSET);
    let cursor = if (1..=7).contains(&dim0_le) {
        le
    } else if (1..=7).contains(&dim0_be) {
        be
    } else {
        return Err(NiftiError::UndecodableByteOrder {
            offset: DIM_OFFSET,
            le: dim0_le,
            be: dim0_be,
        });
    };

    let ndim = cursor.i16_at(DIM_OFFSET);
    if ndim != 3 && ndim != 4 {
        return Err(NiftiError::UnsupportedDimCount {
            offset: DIM_OFFSET,
            ndim,
        });
    }
    let mut dims = [1usize; 4]; // width, height, slices, channels
    for (i, d) in dims.iter_mut().enumerate().take(ndim as usize) {
        let offset = DIM_OFFSET + 2 * (i as u64 + 1);
        let value = cursor.i16_at(offset);
        if value < 1 {
            return Err(NiftiError::BadDimension {
                offset,
                index: i + 1,
                value,
            });
        }
        *d = value as usize;
    }
    let [width, height, slices, channels] = dims;

    let datatype = cursor.i16_at(DATATYPE_OFFSET);
    if !matches!(datatype, DT_UINT8 | DT_INT16 | DT_FLOAT32 | DT_FLOAT64) {
        return Err(NiftiError::UnsupportedDatatype {
            offset: DATATYPE_OFFSET,
            code: datatype,
        });
    }
    let bitpix = cursor.i16_at(BITPIX_OFFSET);
    if bitpix != expected_bitpix(datatype) {
        return Err(NiftiError::BitpixMismatch {
            offset: BITPIX_OFFSET,
            bitpix,
            datatype,
        });
    }

    let mut spacing = [0.0f64; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        let offset = PIXDIM_OFFSET + 4 * (i as u64 + 1);
        let value = cursor.f32_at(offset);
        if !(value > 0.0) || !value.is_finite() {
            return Err(NiftiError::BadSpacing {
                offset,
                index: i + 1,
                value,
            });
        }
        *s = value as f64;
    }

    let vox_offset_raw = cursor.f32_at(VOX_OFFSET_OFFSET);
    if !vox_offset_raw.is_finite()
        || vox_offset_raw < HEADER_LEN as f32
        || vox_offset_raw.fract() != 0.0
    {
        return Err(NiftiError::BadVoxOffset {
            offset: VOX_OFFSET_OFFSET,
            vox_offset: vox_offset_raw as f64,
        });
    }
    let vox_offset = vox_offset_raw as u64;

    let scl_slope = cursor.f32_at(SCL_SLOPE_OFFSET);
    let scl_inter = cursor.f32_at(SCL_INTER_OFFSET);
    if !scl_slope.is_finite() {
        return Err(NiftiError::NonFinite {
            offset: SCL_SLOPE_OFFSET,
        });
    }
    if scl_slope != 0.0 && !scl_inter.is_finite() {
        return Err(NiftiError::NonFinite {
            offset: SCL_INTER_OFFSET,
        });
    }

    let n_values = width as u64 * height as u64 * slices as u64 * channels as u64;
    let bpv = bytes_per_value(datatype);
    let payload_end = vox_offset + n_values * bpv;
    if (bytes.len() as u64) < payload_end {
        return Err(NiftiError::Truncated {
            offset: bytes.len() as u64,
            needed: payload_end,
            available: bytes.len() as u64,
        });
    }

    let apply_scl = scl_slope != 0.0;
    let mut data = Vec::with_capacity(n_values as usize);
    for i in 0..n_values {
        let offset = vox_offset + i * bpv;
        let value = match datatype {
            // Integer inputs are label masks: collapse to {0, 1}.
            DT_UINT8 => {
                if bytes[offset as usize] == 0 {
                    0.0
                } else {
                    1.0
                }
            }
            DT_INT16 => {
                if cursor.i16_at(offset) == 0 {
                    0.0
                } else {
                    1.0
                }
            }
            DT_FLOAT32 => {
                let raw = cursor.f32_at(offset) as f64;
                if apply_scl {
                    raw * scl_slope as f64 + scl_inter as f64
                } else {
                    raw
                }
            }
            DT_FLOAT64 => {
                let raw = cursor.f64_at(offset);
                if apply_scl {
                    raw * scl_slope as f64 + scl_inter as f64
                } else {
                    raw
                }
            }
            _ => unreachable!(),
        };
        if !value.is_finite() {
            return Err(NiftiError::NonFinite { offset });
        }
        data.push(value);
    }

    let geometry = ImageGeometry::new(width, height, slices, (spacing[0], spacing[1], spacing[2]))
        .expect("dimensions and spacing validated above");
    Ok(HeatmapVolume {
        channels,
        geometry,
        data,
    })
}

/// Serialize a volume as a little-endian float32 NIfTI-1 single file.
///
/// Single-channel volumes are written 3D; multi-channel ones 4D with the
/// channel on the 4th axis. `read_nifti(write_nifti(v))` reproduces `v`
/// bit-exactly whenever all values and spacings are f32-representable
/// (the format stores both in 32 bits).
pub fn write_nifti(volume: &HeatmapVolume, path: &Path) -> Result<()> {
    let bytes = encode_nifti(volume);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// In-memory form of [`write_nifti`].
pub fn encode_nifti(volume: &HeatmapVolume) -> Vec<u8> {
    let g = volume.geometry();
    let mut header = [0u8; 352]; // 348-byte header + 4-byte extension flag
    header[0..4].copy_from_slice(&348i32.to_le_bytes());

    let ndim: i16 = if volume.channels() == 1 { 3 } else { 4 };
    let dim: [i16; 8] = [
        ndim,
        g.width() as i16,
        g.height() as i16,
        g.slices() as i16,
        if ndim == 4 { volume.channels() as i16 } else { 1 },
        1,
        1,
        1,
    ];
    for (i, d) in dim.iter().enumerate() {
        let o = DIM_OFFSET as usize + 2 * i;
        header[o..o + 2].copy_from_slice(&d.to_le_bytes());
    }

    header[DATATYPE_OFFSET as usize..DATATYPE_OFFSET as usize + 2]
        .copy_from_slice(&DT_FLOAT32.to_le_bytes());
    header[BITPIX_OFFSET as usize..BITPIX_OFFSET as usize + 2]
        .copy_from_slice(&32i16.to_le_bytes());

    let (sx, sy, sz) = g.spacing();
    let pixdim: [f32; 8] = [1.0, sx as f32, sy as f32, sz as f32, 1.0, 1.0, 1.0, 1.0];
    for (i, p) in pixdim.iter().enumerate() {
        let o = PIXDIM_OFFSET as usize + 4 * i;
        header[o..o + 4].copy_from_slice(&p.to_le_bytes());
    }

    header[VOX_OFFSET_OFFSET as usize..VOX_OFFSET_OFFSET as usize + 4]
        .copy_from_slice(&352.0f32.to_le_bytes());
    header[SCL_SLOPE_OFFSET as usize..SCL_SLOPE_OFFSET as usize + 4]
        .copy_from_slice(&1.0f32.to_le_bytes());
    header[SCL_INTER_OFFSET as usize..SCL_INTER_OFFSET as usize + 4]
        .copy_from_slice(&0.0f32.to_le_bytes());
    header[MAGIC_OFFSET as usize..MAGIC_OFFSET as usize + 4].copy_from_slice(b"n+1\0");

    let mut out = Vec::with_capacity(352 + volume.data().len() * 4);
    out.extend_from_slice(&header);
    for &v in volume.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}
