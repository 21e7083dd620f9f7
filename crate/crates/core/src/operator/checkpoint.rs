//! Binary model checkpoints.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! b"HNOM"  u32 version (= 1)
//! u32 ndim  u32 in_channels  u32 out_channels  u32 width  u32 proj_width  u32 layers
//! u32 x ndim modes   u32 x ndim training grid (0 = unknown)
//! u8 activation  u8 layer_kind  u32 hilbert_axis  u8 coord_features
//! f64 arrays in `ModelParams::arrays` order
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{Reader, Writer};
use crate::operator::{Activation, LayerKind, ModelConfig, ModelParams};

pub const MAGIC: &[u8; 4] = b"HNOM";
pub const VERSION: u32 = 1;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let cfg = &params.config;
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    for v in [
        cfg.ndim(),
        cfg.in_channels,
        cfg.out_channels,
        cfg.width,
        cfg.proj_width,
        cfg.layers,
    ] {
        w.u32(v as u32);
    }
    for &m in &cfg.modes {
        w.u32(m as u32);
    }
    for i in 0..cfg.ndim() {
        w.u32(cfg.grid.get(i).copied().unwrap_or(0) as u32);
    }
    w.u8(cfg.activation.tag());
    w.u8(cfg.layer_kind.tag());
    w.u32(cfg.hilbert_axis as u32);
    w.u8(cfg.coord_features as u8);
    for arr in params.arrays() {
        for &v in arr {
            w.f64(v);
        }
    }
    w.into_inner()
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let ndim = r.u32()? as usize;
    let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|v| v as usize);
    let [in_channels, out_channels, width, proj_width, layers] = dims;
    let modes = (0..ndim)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let grid_at = r.offset();
    let grid = (0..ndim)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let grid = if grid.iter().all(|&g| g == 0) {
        vec![]
    } else if grid.iter().any(|&g| g == 0) {
        return Err(r.error_at(grid_at, "partially specified training grid"));
    } else {
        grid
    };
    let tag_at = r.offset();
    let activation = Activation::from_tag(r.u8()?)
        .ok_or_else(|| r.error_at(tag_at, "unknown activation tag"))?;
    let layer_kind = LayerKind::from_tag(r.u8()?)
        .ok_or_else(|| r.error_at(tag_at + 1, "unknown layer kind tag"))?;
    let hilbert_axis = r.u32()? as usize;
    let flag_at = r.offset();
    let coord_features = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(r.error_at(flag_at, "coordinate flag must be 0 or 1")),
    };
    let config = ModelConfig {
        in_channels,
        out_channels,
        width,
        proj_width,
        layers,
        modes,
        activation,
        layer_kind,
        hilbert_axis,
        coord_features,
        grid,
    };
    let config_end = r.offset();
    let mut params = ModelParams::zeros(config).map_err(|e| Error::Format {
        offset: config_end,
        reason: format!("invalid model configuration: {e}"),
    })?;
    let needed = params.num_scalars() as u64 * 8;
    if r.remaining() != needed {
        return Err(r.error_at(
            config_end,
            &format!(
                "expected {needed} bytes of weights, found {}",
                r.remaining()
            ),
        ));
    }
    for arr in params.arrays_mut() {
        for v in arr.iter_mut() {
            *v = r.f64()?;
        }
    }
    if !params.is_finite() {
        return Err(r.error_at(config_end, "non-finite weight"));
    }
    Ok(params)
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    write_atomic(path, &encode(params))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    decode(&fs::read(path)?)
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelParams {
        let cfg = ModelConfig {
            in_channels: 1,
            out_channels: 2,
            width: 3,
            proj_width: 5,
            layers: 2,
            modes: vec![3, 2],
            activation: Activation::Relu,
            layer_kind: LayerKind::Fno,
            hilbert_axis: 1,
            coord_features: true,
            grid: vec![16, 8],
        };
        ModelParams::init(cfg, 9).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let p = model();
        let bytes = encode(&p);
        assert_eq!(&bytes[..4], b"HNOM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(decode(&bytes).unwrap(), p);
    }

    #[test]
    fn truncation_and_corruption_are_rejected() {
        let bytes = encode(&model());
        for cut in [0, 3, 7, 30, bytes.len() - 1] {
            assert!(
                matches!(decode(&bytes[..cut]), Err(Error::Format { .. })),
                "cut {cut}"
            );
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format { offset: 0, .. })));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::Format { offset: 4, .. })));
        let mut long = bytes;
        long.push(0);
        assert!(decode(&long).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.hnom");
        let p = model();
        save(&p, &path).unwrap();
        assert_eq!(load(&path).unwrap(), p);
    }
}
