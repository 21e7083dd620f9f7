//! Paired input/output datasets and their on-disk format.
//!
//! Layout (little-endian): magic `NOPD`, version u32 = 1, problem tag
//! (u32 length + UTF-8), metadata count u32 followed by length-prefixed
//! key/value strings, then inputs and outputs, each as rank u32, dims
//! u32 x rank and a row-major f64 payload.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{invalid, mismatch, Error, Result};
use crate::field::RealField;
use crate::io::{Reader, Writer};
use crate::operator::checkpoint::write_atomic;

const MAGIC: &[u8; 4] = b"NOPD";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPair {
    pub inputs: RealField,
    pub outputs: RealField,
    pub problem: String,
    pub metadata: BTreeMap<String, String>,
}

impl DatasetPair {
    pub fn new(
        inputs: RealField,
        outputs: RealField,
        problem: impl Into<String>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        let pair = Self {
            inputs,
            outputs,
            problem: problem.into(),
            metadata,
        };
        if pair.inputs.batch() != pair.outputs.batch() {
            return Err(mismatch(format!(
                "{} input samples but {} output samples",
                pair.inputs.batch(),
                pair.outputs.batch()
            )));
        }
        Ok(pair)
    }

    pub fn len(&self) -> usize {
        self.inputs.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Finiteness of every entry and a strictly positive norm for every
    /// target sample (relative errors are undefined otherwise).
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("inputs", &self.inputs), ("outputs", &self.outputs)] {
            if let Some(p) = f.data().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    stage: format!("dataset {name} (sample {})", p / f.sample_len()),
                });
            }
        }
        for b in 0..self.outputs.batch() {
            if self.outputs.sample(b).iter().all(|&v| v == 0.0) {
                return Err(Error::DegenerateSample { index: b });
            }
        }
        Ok(())
    }

    /// Same pairs with every spatial axis subsampled by `stride`.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let mut out = self.clone();
        out.inputs = self.inputs.subsample(stride)?;
        out.outputs = self.outputs.subsample(stride)?;
        Ok(out)
    }

    /// Samples `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.inputs = self.inputs.select(indices)?;
        out.outputs = self.outputs.select(indices)?;
        Ok(out)
    }
}

fn put_field(w: &mut Writer, f: &RealField) {
    w.u32(f.shape().len() as u32);
    for &d in f.shape() {
        w.u32(d as u32);
    }
    for &v in f.data() {
        w.f64(v);
    }
}

fn get_field(r: &mut Reader) -> Result<RealField> {
    let at = r.offset();
    let rank = r.u32()? as usize;
    if !(3..=8).contains(&rank) {
        return Err(r.error_at(at, &format!("implausible rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r.u32()? as usize);
    }
    let count = shape
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64));
    match count {
        Some(c) if c.checked_mul(8).is_some_and(|b| b <= r.remaining()) => {}
        _ => {
            return Err(r.error_at(
                r.offset(),
                &format!(
                    "payload for shape {shape:?} exceeds the remaining {} bytes",
                    r.remaining()
                ),
            ))
        }
    }
    let count = count.unwrap() as usize;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        data.push(r.f64()?);
    }
    RealField::new(shape, data).map_err(|e| r.error_at(at, &e.to_string()))
}

pub fn encode_dataset(pair: &DatasetPair) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.str(&pair.problem);
    w.u32(pair.metadata.len() as u32);
    for (k, v) in &pair.metadata {
        w.str(k);
        w.str(v);
    }
    put_field(&mut w, &pair.inputs);
    put_field(&mut w, &pair.outputs);
    w.into_inner()
}

pub fn decode_dataset(bytes: &[u8]) -> Result<DatasetPair> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let problem = r.str()?;
    let count = r.u32()?;
    let mut metadata = BTreeMap::new();
    for _ in 0..count {
        let k = r.str()?;
        let v = r.str()?;
        metadata.insert(k, v);
    }
    let inputs = get_field(&mut r)?;
    let outputs = get_field(&mut r)?;
    if r.remaining() != 0 {
        return Err(r.error_at(r.offset(), &format!("{} trailing bytes", r.remaining())));
    }
    DatasetPair::new(inputs, outputs, problem, metadata).map_err(|e| Error::Format {
        offset: 0,
        reason: e.to_string(),
    })
}

/// Writes atomically: a reader never observes a partially written file.
pub fn write_dataset(pair: &DatasetPair, path: &Path) -> Result<()> {
    if pair.problem.is_empty() {
        return Err(invalid("dataset problem tag is empty"));
    }
    write_atomic(path, &encode_dataset(pair))
}

pub fn read_dataset(path: &Path) -> Result<DatasetPair> {
    decode_dataset(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> DatasetPair {
        let mut meta = BTreeMap::new();
        meta.insert("n".to_string(), "2".to_string());
        DatasetPair::new(
            RealField::new(vec![1, 2, 1], vec![1.0, -2.0]).unwrap(),
            RealField::new(vec![1, 2, 1], vec![0.5, 0.25]).unwrap(),
            "t",
            meta,
        )
        .unwrap()
    }

    // Hand-assembled little-endian bytes for `tiny()`.
    const GOLDEN: &[u8] = &[
        b'N', b'O', b'P', b'D', 1, 0, 0, 0, // magic, version
        1, 0, 0, 0, b't', // tag
        1, 0, 0, 0, 1, 0, 0, 0, b'n', 1, 0, 0, 0, b'2', // metadata
        3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, // input shape
        0, 0, 0, 0, 0, 0, 0xf0, 0x3f, 0, 0, 0, 0, 0, 0, 0, 0xc0, // 1.0, -2.0
        3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, // output shape
        0, 0, 0, 0, 0, 0, 0xe0, 0x3f, 0, 0, 0, 0, 0, 0, 0xd0, 0x3f, // 0.5, 0.25
    ];

    #[test]
    fn golden_bytes() {
        assert_eq!(encode_dataset(&tiny()), GOLDEN);
        assert_eq!(decode_dataset(GOLDEN).unwrap(), tiny());
    }

    #[test]
    fn file_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.nopd");
        let mut pair = tiny();
        pair.inputs.data_mut()[0] = f64::from_bits(0x3ff0_0000_0000_0001);
        write_dataset(&pair, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.inputs.data()[0].to_bits(), 0x3ff0_0000_0000_0001);
        assert_eq!(back, pair);
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        for cut in 0..GOLDEN.len() {
            match decode_dataset(&GOLDEN[..cut]) {
                Err(Error::Format { offset, .. }) => assert!(offset <= cut as u64),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut b = GOLDEN.to_vec();
        b[0] = b'X';
        assert!(matches!(
            decode_dataset(&b),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut b = GOLDEN.to_vec();
        b[4] = 2;
        assert!(matches!(
            decode_dataset(&b),
            Err(Error::Format { offset: 4, .. })
        ));
    }

    #[test]
    fn validation_sweep() {
        let mut p = tiny();
        assert!(p.validate().is_ok());
        p.outputs.data_mut().fill(0.0);
        assert!(matches!(
            p.validate(),
            Err(Error::DegenerateSample { index: 0 })
        ));
        let mut p = tiny();
        p.inputs.data_mut()[1] = f64::NAN;
        assert!(p.validate().is_err());
    }
}
