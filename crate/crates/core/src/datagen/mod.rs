//! Deterministic mixture datasets, resynthesis augmentation and the
//! `sigpack` example container.
//!
//! Every example is a pure function of its 64-bit seed: the SOI bits and the
//! interference realization come from fixed sub-streams of it, and the
//! interference is scaled to hit the assigned SINR exactly.

mod augment;
mod sigpack;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::{gen_comm_surrogate, gen_emi_surrogate, mix_at_sinr, BitString, ComplexSignal, SoiKind};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

pub use augment::{augment_batch, augment_resynthesize, AugmentOutcome};
pub use sigpack::{decode_sigpack, encode_sigpack, read_sigpack, write_sigpack, SIGPACK_MAGIC};

const SEED_STREAM: u64 = 0x5345_4544;
const SOI_STREAM: u64 = 0x534f_49;
const INTERFERENCE_STREAM: u64 = 0x494e_5446;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceKind {
    EmiSurrogate,
    CommSurrogate,
}

impl InterferenceKind {
    pub fn generate(self, seed: u64, len: usize) -> Result<ComplexSignal> {
        Ok(match self {
            InterferenceKind::EmiSurrogate => gen_emi_surrogate(seed, len)?,
            InterferenceKind::CommSurrogate => gen_comm_surrogate(seed, len)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn tag(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    /// Inverse of the seed prefix written by [`example_seed`].
    pub fn of_seed(seed: u64) -> Option<Split> {
        match seed >> 62 {
            0 => Some(Split::Train),
            1 => Some(Split::Val),
            2 => Some(Split::Test),
            _ => None,
        }
    }
}

/// Seed of example `index` in `segment`: the split tag in the top two bits,
/// then the top 62 bits of
/// `derive_seed(derive_seed(derive_seed(master, SEED_STREAM), segment), index)`.
pub fn example_seed(master_seed: u64, split: Split, segment: usize, index: usize) -> u64 {
    let h = derive_seed(
        derive_seed(derive_seed(master_seed, SEED_STREAM), segment as u64),
        index as u64,
    );
    (split.tag() << 62) | (h >> 2)
}

/// Seed from which an example's interference realization is generated.
pub fn interference_seed(example_seed: u64) -> u64 {
    derive_seed(example_seed, INTERFERENCE_STREAM)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureExample {
    pub mixture: ComplexSignal,
    pub soi: ComplexSignal,
    pub bits: BitString,
    pub soi_kind: SoiKind,
    pub interference_kind: InterferenceKind,
    pub sinr_db: f64,
    pub seed: u64,
    /// Seed of the interference generator. Equal to
    /// `interference_seed(seed)` unless the example was augmented, in which
    /// case it is inherited from the source example.
    pub interference_seed: u64,
    pub augmented: bool,
}

impl MixtureExample {
    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }

    /// `mixture − soi`.
    pub fn interference(&self) -> Result<ComplexSignal> {
        Ok(self.mixture.sub(&self.soi)?)
    }
}

/// Builds the example for `seed` at `sinr_db`.
pub fn synthesize_example(
    soi_kind: SoiKind,
    interference_kind: InterferenceKind,
    len: usize,
    sinr_db: f64,
    seed: u64,
) -> Result<MixtureExample> {
    let n_bits = soi_kind.bits_for_len(len)?;
    let bits = BitString::new(Rng::new(derive_seed(seed, SOI_STREAM)).bits(n_bits))?;
    let soi = soi_kind.modulate(&bits, len)?;
    let iseed = interference_seed(seed);
    let interference = interference_kind.generate(iseed, len)?;
    let (mixture, _) = mix_at_sinr(&soi, &interference, sinr_db)?;
    Ok(MixtureExample {
        mixture,
        soi,
        bits,
        soi_kind,
        interference_kind,
        sinr_db,
        seed,
        interference_seed: iseed,
        augmented: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub soi_kind: SoiKind,
    pub interference_kind: InterferenceKind,
    pub n_segments: usize,
    pub examples_per_segment: usize,
    pub sinr_grid_db: Vec<f64>,
    pub example_len: usize,
    pub master_seed: u64,
    pub split: Split,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            soi_kind: SoiKind::Qpsk,
            interference_kind: InterferenceKind::CommSurrogate,
            n_segments: 10,
            examples_per_segment: 11,
            sinr_grid_db: default_sinr_grid(),
            example_len: 4096,
            master_seed: 0,
            split: Split::Train,
        }
    }
}

/// −15 dB to +15 dB in 3 dB steps.
pub fn default_sinr_grid() -> Vec<f64> {
    (0..11).map(|i| -15.0 + 3.0 * i as f64).collect()
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("dataset: {msg}")));
        if self.n_segments == 0 || self.examples_per_segment == 0 {
            return fail("n_segments and examples_per_segment must be positive".into());
        }
        if self.sinr_grid_db.is_empty() || self.sinr_grid_db.iter().any(|v| !v.is_finite()) {
            return fail("sinr_grid_db must be a non-empty list of finite values".into());
        }
        if self.sinr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return fail("sinr_grid_db must be strictly increasing".into());
        }
        if let Err(e) = self.soi_kind.bits_for_len(self.example_len) {
            return fail(format!("example_len {}: {e}", self.example_len));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_segments * self.examples_per_segment
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid level of `index` within its segment (round-robin).
    pub fn sinr_for(&self, index: usize) -> f64 {
        self.sinr_grid_db[index % self.sinr_grid_db.len()]
    }
}

/// All examples of `spec`, segment-major. Synthesis runs in parallel; the
/// result does not depend on the thread count.
pub fn generate_examples(spec: &DatasetSpec) -> Result<Vec<MixtureExample>> {
    spec.validate()?;
    (0..spec.len())
        .into_par_iter()
        .map(|k| {
            let (segment, index) = (k / spec.examples_per_segment, k % spec.examples_per_segment);
            synthesize_example(
                spec.soi_kind,
                spec.interference_kind,
                spec.example_len,
                spec.sinr_for(index),
                example_seed(spec.master_seed, spec.split, segment, index),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub segment: usize,
    pub index: usize,
    pub seed: u64,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub file: String,
    pub count: usize,
    pub spec: DatasetSpec,
    /// Hex SHA-256 of the sigpack file.
    pub sha256: String,
    pub records: Vec<ManifestRecord>,
}

/// Path of the JSON manifest written next to a sigpack file.
pub fn manifest_path(sigpack_path: &Path) -> std::path::PathBuf {
    sigpack_path.with_extension("manifest.json")
}

/// Writes the examples of `spec` to `out_path` (sigpack) and a JSON manifest
/// beside it.
pub fn generate_dataset(spec: &DatasetSpec, out_path: &Path) -> Result<DatasetManifest> {
    let examples = generate_examples(spec)?;
    let bytes = encode_sigpack(&examples, Some(spec));
    std::fs::write(out_path, &bytes).map_err(Error::io(out_path))?;
    let records = (0..spec.len())
        .map(|k| ManifestRecord {
            segment: k / spec.examples_per_segment,
            index: k % spec.examples_per_segment,
            seed: examples[k].seed,
            sinr_db: examples[k].sinr_db,
        })
        .collect();
    let manifest = DatasetManifest {
        file: out_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        count: examples.len(),
        spec: spec.clone(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        records,
    };
    let mpath = manifest_path(out_path);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&mpath, json).map_err(Error::io(&mpath))?;
    Ok(manifest)
}
