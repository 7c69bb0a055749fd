use rayon::prelude::*;

use super::{InterferenceKind, MixtureExample};
use crate::dsp::{mix_at_sinr, CommSurrogate};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

const AUGMENT_STREAM: u64 = 0x4155_47;

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentOutcome {
    Accepted(MixtureExample),
    /// The recovered bits disagreed with the generator's in `bit_errors`
    /// positions.
    Rejected { bit_errors: usize },
}

/// Demodulates the interference of `example`, and if every bit matches the
/// generator's, rebuilds the mixture from a clean re-modulation of those
/// bits at the same SINR.
///
/// The new example keeps the split prefix of the old seed; its remaining
/// bits come from `derive_seed(seed, AUGMENT_STREAM)`.
pub fn augment_resynthesize(example: &MixtureExample) -> Result<AugmentOutcome> {
    if example.interference_kind != InterferenceKind::CommSurrogate {
        return Err(Error::NotDemodulable(example.interference_kind));
    }
    let generator = CommSurrogate::from_seed(example.interference_seed, example.len())?;
    let component = example.interference()?;
    let recovered = generator.demodulate(&component)?;
    let bit_errors = recovered.count_errors(&generator.bits)?;
    if bit_errors > 0 {
        return Ok(AugmentOutcome::Rejected { bit_errors });
    }
    let clean = generator.synthesize(&recovered)?;
    let (mixture, _) = mix_at_sinr(&example.soi, &clean, example.sinr_db)?;
    let split_prefix = example.seed & (0b11 << 62);
    Ok(AugmentOutcome::Accepted(MixtureExample {
        mixture,
        seed: split_prefix | (derive_seed(example.seed, AUGMENT_STREAM) >> 2),
        augmented: true,
        ..example.clone()
    }))
}

/// Augments every example; returns the accepted ones in input order and the
/// number rejected.
pub fn augment_batch(examples: &[MixtureExample]) -> Result<(Vec<MixtureExample>, usize)> {
    let outcomes: Vec<AugmentOutcome> = examples.par_iter().map(augment_resynthesize).collect::<Result<_>>()?;
    let mut accepted = Vec::new();
    let mut rejected = 0;
    for o in outcomes {
        match o {
            AugmentOutcome::Accepted(e) => accepted.push(e),
            AugmentOutcome::Rejected { .. } => rejected += 1,
        }
    }
    Ok((accepted, rejected))
}
