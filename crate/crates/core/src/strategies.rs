//! Per-utterance separation-quality checks computed from diarization
//! results alone.
//!
//! Three statistics judge whether the separation behind a
//! separation-based diarization (SSD) result was poor:
//!
//! 1. speaker-duration balance: min_i d(R_i) / max_i d(R_i),
//!    poor when <= th1 (channel confusion empties one stream);
//! 2. overlap ratio: (sum_i d(R_i) - d(union_i R_i)) / sum_i d(R_i),
//!    poor when >= th2 (duplication inflates overlap);
//! 3. deviation from the clustering-based (CSD) result, measured as the
//!    DER of the SSD result with the CSD result as reference, poor when
//!    >= th3.
//!
//! Equality with a threshold counts as flagged: the good side of each
//! check is a strict inequality.

use serde::Serialize;
use thiserror::Error;

use crate::der::{score_der, DerError};
use crate::timeline::Annotation;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("threshold {name} = {value} is outside [0, 1]")]
    ThresholdRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Der(#[from] DerError),
}

/// Decision thresholds. Defaults match the reference configuration:
/// th1 = 0.40, th2 = 0.20, th3 = 0.26.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Minimum duration ratio between the quietest and busiest speaker.
    pub th1: f64,
    /// Maximum tolerated overlap ratio in the SSD result.
    pub th2: f64,
    /// Maximum tolerated deviation (DER) of SSD relative to CSD.
    pub th3: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            th1: 0.40,
            th2: 0.20,
            th3: 0.26,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), StrategyError> {
        for (name, value) in [("th1", self.th1), ("th2", self.th2), ("th3", self.th3)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(StrategyError::ThresholdRange { name, value });
            }
        }
        Ok(())
    }
}

/// Which check produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StrategyId {
    /// Speaker-duration balance.
    S1,
    /// Overlap ratio.
    S2,
    /// Deviation from the CSD result.
    S3,
}

/// Outcome of one check on one recording.
///
/// `statistic` is `None` exactly when the input was degenerate (too
/// little signal to measure); degenerate inputs are always flagged poor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyVerdict {
    pub recording_id: String,
    pub strategy: StrategyId,
    pub statistic: Option<f64>,
    pub threshold: f64,
    pub flagged_poor: bool,
    pub degenerate: bool,
}

impl StrategyVerdict {
    /// The same measurement re-judged against a different threshold.
    /// Degenerate verdicts stay flagged regardless of the threshold.
    pub fn with_threshold(&self, threshold: f64) -> StrategyVerdict {
        let flagged_poor = match (self.degenerate, self.statistic, self.strategy) {
            (true, _, _) | (_, None, _) => true,
            (false, Some(stat), StrategyId::S1) => stat <= threshold,
            (false, Some(stat), StrategyId::S2 | StrategyId::S3) => stat >= threshold,
        };
        StrategyVerdict {
            threshold,
            flagged_poor,
            ..self.clone()
        }
    }
}

/// Checks whether speaker speech durations are unbalanced in the SSD
/// result. Degenerate when fewer than two speakers are present.
pub fn strategy1_balance(ssd: &Annotation, thresholds: &Thresholds) -> StrategyVerdict {
    let durations: Vec<i64> = ssd
        .speakers()
        .iter()
        .map(|s| {
            ssd.speaker_duration(s)
                .expect("speaker set is derived from turns")
                .centis()
        })
        .collect();
    let max = durations.iter().copied().max().unwrap_or(0);
    if durations.len() < 2 || max == 0 {
        return StrategyVerdict {
            recording_id: ssd.recording_id().to_string(),
            strategy: StrategyId::S1,
            statistic: None,
            threshold: thresholds.th1,
            flagged_poor: true,
            degenerate: true,
        };
    }
    let min = durations.iter().copied().min().unwrap_or(0);
    let statistic = min as f64 / max as f64;
    StrategyVerdict {
        recording_id: ssd.recording_id().to_string(),
        strategy: StrategyId::S1,
        statistic: Some(statistic),
        threshold: thresholds.th1,
        flagged_poor: statistic <= thresholds.th1,
        degenerate: false,
    }
}

/// Checks whether the SSD result carries an abnormal overlap ratio.
/// Degenerate when the result contains no speech at all.
pub fn strategy2_overlap(ssd: &Annotation, thresholds: &Thresholds) -> StrategyVerdict {
    let total = ssd.total_speaker_time().centis();
    if total == 0 {
        return StrategyVerdict {
            recording_id: ssd.recording_id().to_string(),
            strategy: StrategyId::S2,
            statistic: None,
            threshold: thresholds.th2,
            flagged_poor: true,
            degenerate: true,
        };
    }
    let union = ssd.union_duration().centis();
    let statistic = (total - union) as f64 / total as f64;
    StrategyVerdict {
        recording_id: ssd.recording_id().to_string(),
        strategy: StrategyId::S2,
        statistic: Some(statistic),
        threshold: thresholds.th2,
        flagged_poor: statistic >= thresholds.th2,
        degenerate: false,
    }
}

/// Measures how far the SSD result deviates from the CSD result: the DER
/// of the SSD hypothesis with the CSD result standing in as reference.
/// Degenerate when the CSD result is empty.
pub fn strategy3_deviation(
    csd: &Annotation,
    ssd: &Annotation,
    thresholds: &Thresholds,
) -> Result<StrategyVerdict, StrategyError> {
    let score = score_der(csd, ssd)?;
    if score.degenerate {
        return Ok(StrategyVerdict {
            recording_id: ssd.recording_id().to_string(),
            strategy: StrategyId::S3,
            statistic: None,
            threshold: thresholds.th3,
            flagged_poor: true,
            degenerate: true,
        });
    }
    Ok(StrategyVerdict {
        recording_id: ssd.recording_id().to_string(),
        strategy: StrategyId::S3,
        statistic: Some(score.der),
        threshold: thresholds.th3,
        flagged_poor: score.der >= thresholds.th3,
        degenerate: false,
    })
}
