//! Separation metrics on raw sample vectors: scale-invariant
//! source-to-noise ratio (Si-SNR) and the utterance-level
//! permutation-invariant (uPIT) objective.
//!
//! Si-SNR projects the estimate onto the target,
//! `s_target = (<est, tgt> / ||tgt||^2) * tgt`, and returns
//! `10 * log10(||s_target||^2 / ||est - s_target||^2)` in dB. Signals are
//! used as-is; mean subtraction is available behind an explicit option.
//! Degenerate cases are explicit: exact reconstruction returns the
//! positive-infinity sentinel, zero-energy inputs are errors rather than
//! epsilon-clamped values.

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SepError {
    #[error("sample vector must be non-empty")]
    Empty,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("length mismatch: estimate has {estimate} samples, target has {target}")]
    LengthMismatch { estimate: usize, target: usize },
    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: u32, b: u32 },
    #[error("target signal has zero energy")]
    ZeroEnergyTarget,
    #[error("estimate signal has zero energy")]
    ZeroEnergyEstimate,
    #[error("source count mismatch: {estimates} estimates vs {references} references")]
    CountMismatch {
        estimates: usize,
        references: usize,
    },
    #[error("no sources given")]
    NoSources,
    #[error("{sources} sources exceed the permutation search cap of {cap}")]
    TooManySources { sources: usize, cap: usize },
}

/// A finite, non-empty audio signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl SampleVector {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SepError> {
        if samples.is_empty() {
            return Err(SepError::Empty);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SepError::NonFinite { index });
        }
        Ok(SampleVector {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Options for Si-SNR computation.
#[derive(Debug, Clone, Copy, Default)]
pub struct SiSnrOptions {
    /// Subtract each signal's mean before projecting. Off by default;
    /// the plain formula is the reference behavior.
    pub zero_mean: bool,
}

/// Scale-invariant source-to-noise ratio in dB.
///
/// Returns `f64::INFINITY` for exact reconstruction (zero residual) and
/// `f64::NEG_INFINITY` when the estimate is orthogonal to the target.
pub fn si_snr(estimate: &SampleVector, target: &SampleVector) -> Result<f64, SepError> {
    si_snr_with(estimate, target, &SiSnrOptions::default())
}

pub fn si_snr_with(
    estimate: &SampleVector,
    target: &SampleVector,
    options: &SiSnrOptions,
) -> Result<f64, SepError> {
    if estimate.len() != target.len() {
        return Err(SepError::LengthMismatch {
            estimate: estimate.len(),
            target: target.len(),
        });
    }
    if estimate.sample_rate() != target.sample_rate() {
        return Err(SepError::SampleRateMismatch {
            a: estimate.sample_rate(),
            b: target.sample_rate(),
        });
    }

    let (est, tgt): (Vec<f64>, Vec<f64>) = if options.zero_mean {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let em = mean(estimate.samples());
        let tm = mean(target.samples());
        (
            estimate.samples().iter().map(|s| s - em).collect(),
            target.samples().iter().map(|s| s - tm).collect(),
        )
    } else {
        (estimate.samples().to_vec(), target.samples().to_vec())
    };

    let target_energy: f64 = tgt.iter().map(|s| s * s).sum();
    if target_energy == 0.0 {
        return Err(SepError::ZeroEnergyTarget);
    }
    let estimate_energy: f64 = est.iter().map(|s| s * s).sum();
    if estimate_energy == 0.0 {
        return Err(SepError::ZeroEnergyEstimate);
    }

    let dot: f64 = est.iter().zip(&tgt).map(|(e, t)| e * t).sum();
    let scale = dot / target_energy;
    let projected_energy = scale * scale * target_energy;
    let residual_energy: f64 = est
        .iter()
        .zip(&tgt)
        .map(|(e, t)| {
            let r = e - scale * t;
            r * r
        })
        .sum();

    if residual_energy == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (projected_energy / residual_energy).log10())
}

/// Options for the uPIT search.
#[derive(Debug, Clone, Copy)]
pub struct UpitOptions {
    pub si_snr: SiSnrOptions,
    /// Upper bound on the factorial permutation search.
    pub max_sources: usize,
}

impl Default for UpitOptions {
    fn default() -> Self {
        UpitOptions {
            si_snr: SiSnrOptions::default(),
            max_sources: 8,
        }
    }
}

/// Outcome of the uPIT search: the loss, the winning permutation
/// (estimate index -> reference index) and the per-pair Si-SNR values
/// under it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationResult {
    pub loss: f64,
    pub permutation: Vec<usize>,
    pub pair_si_snr: Vec<f64>,
}

/// Utterance-level permutation-invariant loss.
///
/// Searches all N! pairings of estimates to references; the per-pair
/// error is the negated Si-SNR and the loss is its mean. Among equal
/// losses the lexicographically smallest permutation wins.
pub fn upit_loss(
    estimates: &[SampleVector],
    references: &[SampleVector],
) -> Result<PermutationResult, SepError> {
    upit_loss_with(estimates, references, &UpitOptions::default())
}

pub fn upit_loss_with(
    estimates: &[SampleVector],
    references: &[SampleVector],
    options: &UpitOptions,
) -> Result<PermutationResult, SepError> {
    if estimates.len() != references.len() {
        return Err(SepError::CountMismatch {
            estimates: estimates.len(),
            references: references.len(),
        });
    }
    let n = estimates.len();
    if n == 0 {
        return Err(SepError::NoSources);
    }
    if n > options.max_sources {
        return Err(SepError::TooManySources {
            sources: n,
            cap: options.max_sources,
        });
    }

    // Pairwise Si-SNR once; the permutation search reuses the table.
    let mut table = vec![vec![0.0f64; n]; n];
    for (i, estimate) in estimates.iter().enumerate() {
        for (j, reference) in references.iter().enumerate() {
            table[i][j] = si_snr_with(estimate, reference, &options.si_snr)?;
        }
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let loss = mean_negated(perm.iter().enumerate().map(|(i, &j)| table[i][j]));
        // Strict improvement only: permutations iterate in lexicographic
        // order, so ties keep the earliest.
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, perm));
        }
    }

    let (loss, permutation) = best.expect("n >= 1 yields at least one permutation");
    let pair_si_snr = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| table[i][j])
        .collect();
    Ok(PermutationResult {
        loss,
        permutation,
        pair_si_snr,
    })
}

/// Mean of negated values with explicit sentinel handling: any -inf pair
/// (an orthogonal estimate) dominates and yields +inf loss; otherwise any
/// +inf pair (perfect reconstruction) yields -inf loss.
fn mean_negated(si_snrs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut count = 0usize;
    let mut has_perfect = false;
    let mut has_orthogonal = false;
    for v in si_snrs {
        count += 1;
        if v == f64::INFINITY {
            has_perfect = true;
        } else if v == f64::NEG_INFINITY {
            has_orthogonal = true;
        } else {
            sum += -v;
        }
    }
    if has_orthogonal {
        f64::INFINITY
    } else if has_perfect {
        f64::NEG_INFINITY
    } else {
        sum / count as f64
    }
}
