//! Per-utterance selection between clustering-based (CSD) and
//! separation-based (SSD) diarization results.
//!
//! For every recording the three separation-quality checks run on the
//! SSD result; a combination mode folds their flags into one poor/ok
//! decision; flagged recordings fall back to the CSD result and the rest
//! keep the SSD result. Detection quality of the flags themselves is
//! evaluated against ground truth: a recording counts as positive when
//! its SSD result scores strictly worse than its CSD result.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::der::{score_der, DerError};
use crate::strategies::{
    strategy1_balance, strategy2_overlap, strategy3_deviation, StrategyError, StrategyVerdict,
    Thresholds,
};
use crate::timeline::Annotation;

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("recording sets differ: only in CSD: [{}]; only in SSD: [{}]",
        only_in_csd.join(", "), only_in_ssd.join(", "))]
    RecordingSetMismatch {
        only_in_csd: Vec<String>,
        only_in_ssd: Vec<String>,
    },
    #[error("mode {mode} requires a verdict from check {strategy}, none given")]
    MissingVerdict {
        mode: CombinationMode,
        strategy: &'static str,
    },
    #[error("oracle selection needs ground truth; use oracle_select")]
    OracleNeedsReference,
    #[error("recording `{recording}` missing from {collection}")]
    MissingRecording {
        recording: String,
        collection: &'static str,
    },
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Der(#[from] DerError),
}

/// How the three check flags fold into one decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CombinationMode {
    /// Duration-balance check alone.
    S1,
    /// Overlap-ratio check alone.
    S2,
    /// CSD-deviation check alone.
    S3,
    /// Union of checks 1 and 2: flagged by either.
    S1And2,
    /// Majority vote: flagged by at least two of the three.
    Vote,
    /// Ground-truth selection; requires a reference.
    Oracle,
}

impl CombinationMode {
    /// Every verdict-based mode, in reporting order.
    pub const STANDARD: [CombinationMode; 5] = [
        CombinationMode::S1,
        CombinationMode::S2,
        CombinationMode::S3,
        CombinationMode::S1And2,
        CombinationMode::Vote,
    ];
}

impl fmt::Display for CombinationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CombinationMode::S1 => "s1",
            CombinationMode::S2 => "s2",
            CombinationMode::S3 => "s3",
            CombinationMode::S1And2 => "s1and2",
            CombinationMode::Vote => "vote",
            CombinationMode::Oracle => "oracle",
        };
        f.write_str(name)
    }
}

impl FromStr for CombinationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(CombinationMode::S1),
            "s2" => Ok(CombinationMode::S2),
            "s3" => Ok(CombinationMode::S3),
            "s1and2" | "s1+2" | "s12" => Ok(CombinationMode::S1And2),
            "vote" | "vote123" => Ok(CombinationMode::Vote),
            "oracle" => Ok(CombinationMode::Oracle),
            other => Err(format!(
                "unknown mode `{other}` (expected s1, s2, s3, s1and2, vote or oracle)"
            )),
        }
    }
}

/// Which system's result a recording ends up using.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SystemChoice {
    Csd,
    Ssd,
}

impl fmt::Display for SystemChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemChoice::Csd => "CSD",
            SystemChoice::Ssd => "SSD",
        })
    }
}

/// Folds per-check flags into one decision for a recording.
///
/// Every check the mode depends on must be present.
pub fn combine_flags(
    s1: Option<&StrategyVerdict>,
    s2: Option<&StrategyVerdict>,
    s3: Option<&StrategyVerdict>,
    mode: CombinationMode,
) -> Result<bool, SelectorError> {
    let need = |verdict: Option<&StrategyVerdict>, strategy: &'static str| {
        verdict
            .map(|v| v.flagged_poor)
            .ok_or(SelectorError::MissingVerdict { mode, strategy })
    };
    match mode {
        CombinationMode::S1 => need(s1, "s1"),
        CombinationMode::S2 => need(s2, "s2"),
        CombinationMode::S3 => need(s3, "s3"),
        CombinationMode::S1And2 => Ok(need(s1, "s1")? || need(s2, "s2")?),
        CombinationMode::Vote => {
            let votes = [need(s1, "s1")?, need(s2, "s2")?, need(s3, "s3")?]
                .iter()
                .filter(|&&f| f)
                .count();
            Ok(votes >= 2)
        }
        CombinationMode::Oracle => Err(SelectorError::OracleNeedsReference),
    }
}

/// Per-recording selection outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionRecord {
    pub recording_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s1: Option<StrategyVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<StrategyVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s3: Option<StrategyVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub der_csd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub der_ssd: Option<f64>,
    pub flagged_poor: bool,
    pub chosen: SystemChoice,
}

/// Full result of a selection run over a corpus.
#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub mode: CombinationMode,
    pub thresholds: Thresholds,
    pub records: Vec<SelectionRecord>,
    /// The chosen annotation per recording.
    #[serde(skip)]
    pub selected: BTreeMap<String, Annotation>,
}

impl Selection {
    pub fn flagged_count(&self) -> usize {
        self.records.iter().filter(|r| r.flagged_poor).count()
    }

    /// Flag per recording, keyed by id.
    pub fn flags(&self) -> BTreeMap<String, bool> {
        self.records
            .iter()
            .map(|r| (r.recording_id.clone(), r.flagged_poor))
            .collect()
    }
}

fn check_same_recordings(
    csd: &BTreeMap<String, Annotation>,
    ssd: &BTreeMap<String, Annotation>,
) -> Result<(), SelectorError> {
    let only_in_csd: Vec<String> =
        csd.keys().filter(|k| !ssd.contains_key(*k)).cloned().collect();
    let only_in_ssd: Vec<String> =
        ssd.keys().filter(|k| !csd.contains_key(*k)).cloned().collect();
    if only_in_csd.is_empty() && only_in_ssd.is_empty() {
        Ok(())
    } else {
        Err(SelectorError::RecordingSetMismatch {
            only_in_csd,
            only_in_ssd,
        })
    }
}

/// Runs all three checks per recording, combines them with `mode`, and
/// picks the CSD result for flagged recordings, the SSD result otherwise.
pub fn select(
    csd: &BTreeMap<String, Annotation>,
    ssd: &BTreeMap<String, Annotation>,
    thresholds: &Thresholds,
    mode: CombinationMode,
) -> Result<Selection, SelectorError> {
    if mode == CombinationMode::Oracle {
        return Err(SelectorError::OracleNeedsReference);
    }
    thresholds.validate()?;
    check_same_recordings(csd, ssd)?;

    let mut records = Vec::new();
    let mut selected = BTreeMap::new();
    for (id, ssd_annotation) in ssd {
        let csd_annotation = &csd[id];
        let s1 = strategy1_balance(ssd_annotation, thresholds);
        let s2 = strategy2_overlap(ssd_annotation, thresholds);
        let s3 = strategy3_deviation(csd_annotation, ssd_annotation, thresholds)?;
        let flagged_poor = combine_flags(Some(&s1), Some(&s2), Some(&s3), mode)?;
        let chosen = if flagged_poor {
            SystemChoice::Csd
        } else {
            SystemChoice::Ssd
        };
        selected.insert(
            id.clone(),
            match chosen {
                SystemChoice::Csd => csd_annotation.clone(),
                SystemChoice::Ssd => ssd_annotation.clone(),
            },
        );
        records.push(SelectionRecord {
            recording_id: id.clone(),
            s1: Some(s1),
            s2: Some(s2),
            s3: Some(s3),
            der_csd: None,
            der_ssd: None,
            flagged_poor,
            chosen,
        });
    }

    Ok(Selection {
        mode,
        thresholds: *thresholds,
        records,
        selected,
    })
}

/// Ground-truth selection: per recording, the system with the lower DER
/// against the reference wins; exact ties keep the stable CSD result.
pub fn oracle_select(
    csd: &BTreeMap<String, Annotation>,
    ssd: &BTreeMap<String, Annotation>,
    reference: &BTreeMap<String, Annotation>,
) -> Result<Selection, SelectorError> {
    check_same_recordings(csd, ssd)?;

    let mut records = Vec::new();
    let mut selected = BTreeMap::new();
    for (id, ssd_annotation) in ssd {
        let csd_annotation = &csd[id];
        let reference_annotation =
            reference.get(id).ok_or_else(|| SelectorError::MissingRecording {
                recording: id.clone(),
                collection: "reference",
            })?;
        let der_csd = score_der(reference_annotation, csd_annotation)?.der;
        let der_ssd = score_der(reference_annotation, ssd_annotation)?.der;
        let flagged_poor = der_ssd >= der_csd;
        let chosen = if flagged_poor {
            SystemChoice::Csd
        } else {
            SystemChoice::Ssd
        };
        selected.insert(
            id.clone(),
            match chosen {
                SystemChoice::Csd => csd_annotation.clone(),
                SystemChoice::Ssd => ssd_annotation.clone(),
            },
        );
        records.push(SelectionRecord {
            recording_id: id.clone(),
            s1: None,
            s2: None,
            s3: None,
            der_csd: Some(der_csd),
            der_ssd: Some(der_ssd),
            flagged_poor,
            chosen,
        });
    }

    Ok(Selection {
        mode: CombinationMode::Oracle,
        thresholds: Thresholds::default(),
        records,
        selected,
    })
}

/// Flag-quality confusion counts and derived rates.
///
/// Positive class: recordings whose SSD result is strictly worse than
/// the CSD result against ground truth. Undefined precision or recall
/// (empty denominator) is reported as 1.0 with the corresponding
/// `degenerate_*` flag set.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub recall: f64,
    pub precision: f64,
    pub accuracy: f64,
    pub degenerate_precision: bool,
    pub degenerate_recall: bool,
}

impl DetectionMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let total = tp + fp + tn + fn_;
        let (recall, degenerate_recall) = if tp + fn_ > 0 {
            (tp as f64 / (tp + fn_) as f64, false)
        } else {
            (1.0, true)
        };
        let (precision, degenerate_precision) = if tp + fp > 0 {
            (tp as f64 / (tp + fp) as f64, false)
        } else {
            (1.0, true)
        };
        let accuracy = if total > 0 {
            (tp + tn) as f64 / total as f64
        } else {
            1.0
        };
        DetectionMetrics {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
            recall,
            precision,
            accuracy,
            degenerate_precision,
            degenerate_recall,
        }
    }
}

/// Computes the detection ground truth per recording: true when the SSD
/// result scores strictly worse than the CSD result against reference.
pub fn detection_positives(
    flags_for: &BTreeMap<String, bool>,
    csd: &BTreeMap<String, Annotation>,
    ssd: &BTreeMap<String, Annotation>,
    reference: &BTreeMap<String, Annotation>,
) -> Result<BTreeMap<String, bool>, SelectorError> {
    fn fetch<'a>(
        map: &'a BTreeMap<String, Annotation>,
        id: &str,
        collection: &'static str,
    ) -> Result<&'a Annotation, SelectorError> {
        map.get(id).ok_or_else(|| SelectorError::MissingRecording {
            recording: id.to_string(),
            collection,
        })
    }

    let mut positives = BTreeMap::new();
    for id in flags_for.keys() {
        let reference_annotation = fetch(reference, id, "reference")?;
        let der_csd = score_der(reference_annotation, fetch(csd, id, "CSD results")?)?.der;
        let der_ssd = score_der(reference_annotation, fetch(ssd, id, "SSD results")?)?.der;
        positives.insert(id.clone(), der_ssd > der_csd);
    }
    Ok(positives)
}

/// Confusion counts of flags against precomputed positives.
pub fn metrics_from_flags(
    flags: &BTreeMap<String, bool>,
    positives: &BTreeMap<String, bool>,
) -> Result<DetectionMetrics, SelectorError> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (id, &flagged) in flags {
        let positive = *positives.get(id).ok_or_else(|| SelectorError::MissingRecording {
            recording: id.clone(),
            collection: "detection ground truth",
        })?;
        match (flagged, positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(DetectionMetrics::from_counts(tp, fp, tn, fn_))
}

/// Scores poor-separation flags against ground truth.
pub fn evaluate_detection(
    flags: &BTreeMap<String, bool>,
    csd: &BTreeMap<String, Annotation>,
    ssd: &BTreeMap<String, Annotation>,
    reference: &BTreeMap<String, Annotation>,
) -> Result<DetectionMetrics, SelectorError> {
    let positives = detection_positives(flags, csd, ssd, reference)?;
    metrics_from_flags(flags, &positives)
}
