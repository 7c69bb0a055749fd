//! `RFSIGPK1` files: magic, `u32` LE manifest length, JSON manifest, then per
//! example the mixture and the SOI as interleaved I/Q little-endian `f64`,
//! followed by the bits packed LSB-first.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetSpec, InterferenceKind, MixtureExample};
use crate::binfmt::{self, FormatError};
use crate::dsp::{BitString, Complex64, ComplexSignal, SoiKind};
use crate::error::{Error, Result};

pub const SIGPACK_MAGIC: &[u8; 8] = b"RFSIGPK1";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    /// Byte offset from the start of the payload region.
    offset: usize,
    len: usize,
    n_bits: usize,
    soi_kind: SoiKind,
    interference_kind: InterferenceKind,
    sinr_db: f64,
    seed: u64,
    interference_seed: u64,
    augmented: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    count: usize,
    spec: Option<DatasetSpec>,
    examples: Vec<Entry>,
}

fn record_size(len: usize, n_bits: usize) -> usize {
    32 * len + n_bits.div_ceil(8)
}

fn push_signal(out: &mut Vec<u8>, sig: &ComplexSignal) {
    binfmt::push_f64s(out, sig.samples().iter().flat_map(|s| [s.re, s.im]));
}

pub fn encode_sigpack(examples: &[MixtureExample], spec: Option<&DatasetSpec>) -> Vec<u8> {
    let mut payload = Vec::new();
    let mut entries = Vec::with_capacity(examples.len());
    for e in examples {
        entries.push(Entry {
            offset: payload.len(),
            len: e.len(),
            n_bits: e.bits.len(),
            soi_kind: e.soi_kind,
            interference_kind: e.interference_kind,
            sinr_db: e.sinr_db,
            seed: e.seed,
            interference_seed: e.interference_seed,
            augmented: e.augmented,
        });
        push_signal(&mut payload, &e.mixture);
        push_signal(&mut payload, &e.soi);
        payload.extend_from_slice(&e.bits.pack());
    }
    let manifest = Manifest {
        version: VERSION,
        count: examples.len(),
        spec: spec.cloned(),
        examples: entries,
    };
    binfmt::encode(SIGPACK_MAGIC, &manifest, &payload)
}

fn manifest_error(reason: String) -> Error {
    FormatError::Manifest { offset: 12, reason }.into()
}

pub fn decode_sigpack(bytes: &[u8]) -> Result<(Vec<MixtureExample>, Option<DatasetSpec>)> {
    let (manifest, payload): (Manifest, _) = binfmt::decode(SIGPACK_MAGIC, bytes)?;
    if manifest.version != VERSION {
        return Err(manifest_error(format!("unsupported version {}", manifest.version)));
    }
    if manifest.count != manifest.examples.len() {
        return Err(manifest_error(format!(
            "count {} but {} example entries",
            manifest.count,
            manifest.examples.len()
        )));
    }
    let mut expected = 0usize;
    let mut examples = Vec::with_capacity(manifest.count);
    for (i, e) in manifest.examples.iter().enumerate() {
        if e.offset != expected {
            return Err(FormatError::OffsetMismatch {
                offset: payload.absolute(e.offset),
                reason: format!("example {i} should start at payload byte {expected}"),
            }
            .into());
        }
        let read_signal = |at: usize| -> Result<ComplexSignal> {
            let raw = payload.f64s(at, 2 * e.len)?;
            let samples = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            ComplexSignal::new(samples)
                .map_err(|err| manifest_error(format!("example {i} at payload byte {at}: {err}")))
        };
        let mixture = read_signal(e.offset)?;
        let soi = read_signal(e.offset + 16 * e.len)?;
        let packed = payload.slice(e.offset + 32 * e.len, e.n_bits.div_ceil(8))?;
        let bits = BitString::unpack(packed, e.n_bits)?;
        examples.push(MixtureExample {
            mixture,
            soi,
            bits,
            soi_kind: e.soi_kind,
            interference_kind: e.interference_kind,
            sinr_db: e.sinr_db,
            seed: e.seed,
            interference_seed: e.interference_seed,
            augmented: e.augmented,
        });
        expected += record_size(e.len, e.n_bits);
    }
    if expected != payload.len() {
        return Err(FormatError::OffsetMismatch {
            offset: payload.absolute(expected),
            reason: format!("{} bytes after the last example", payload.len() - expected),
        }
        .into());
    }
    Ok((examples, manifest.spec))
}

pub fn write_sigpack(examples: &[MixtureExample], spec: Option<&DatasetSpec>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_sigpack(examples, spec)).map_err(Error::io(path))
}

pub fn read_sigpack(path: &Path) -> Result<(Vec<MixtureExample>, Option<DatasetSpec>)> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode_sigpack(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_examples, Split};

    fn examples() -> (Vec<MixtureExample>, DatasetSpec) {
        let spec = DatasetSpec {
            n_segments: 1,
            examples_per_segment: 3,
            example_len: 300,
            split: Split::Val,
            ..Default::default()
        };
        (generate_examples(&spec).unwrap(), spec)
    }

    #[test]
    fn roundtrip_and_empty() {
        let (ex, spec) = examples();
        let bytes = encode_sigpack(&ex, Some(&spec));
        let (back, back_spec) = decode_sigpack(&bytes).unwrap();
        assert_eq!(back, ex);
        assert_eq!(back_spec, Some(spec));

        let empty = encode_sigpack(&[], None);
        let (back, spec) = decode_sigpack(&empty).unwrap();
        assert!(back.is_empty());
        assert_eq!(spec, None);
    }

    #[test]
    fn corruption_is_reported_with_offsets() {
        let (ex, _) = examples();
        let bytes = encode_sigpack(&ex, None);
        let mut bad = bytes.clone();
        bad[3] ^= 0xff;
        let msg = decode_sigpack(&bad).unwrap_err().to_string();
        assert!(msg.contains("bad magic"), "{msg}");

        let cut = &bytes[..bytes.len() - 100];
        let msg = decode_sigpack(cut).unwrap_err().to_string();
        assert!(msg.contains("truncated") && msg.contains("byte offset"), "{msg}");

        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            decode_sigpack(&long),
            Err(Error::Format(FormatError::OffsetMismatch { .. }))
        ));
    }
}
