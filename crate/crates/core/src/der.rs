//! Diarization error rate scoring.
//!
//! Scores a hypothesis against a reference under an optimal one-to-one
//! speaker mapping, decomposing the error into missed speech, false alarm
//! and speaker error. All error mass is scored (overlap included) and the
//! collar defaults to zero; that is the reference configuration. All
//! accumulation happens in integer centiseconds, so the decomposition is
//! exact; only the final rates are floating point.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::assignment::max_weight_assignment;
use crate::timeline::{
    merge_intervals, segment_decomposition, subtract_intervals, Annotation, Time, TimeInterval,
    TimelineError,
};

#[derive(Debug, Error)]
pub enum DerError {
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

/// Injective map from hypothesis speakers to reference speakers.
/// Only pairs with strictly positive overlap are present.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SpeakerMapping {
    pairs: BTreeMap<String, String>,
    total_overlap: Time,
}

impl SpeakerMapping {
    /// Pairs as (hypothesis speaker, reference speaker), sorted by
    /// hypothesis label.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(h, r)| (h.as_str(), r.as_str()))
    }

    pub fn reference_for(&self, hyp_speaker: &str) -> Option<&str> {
        self.pairs.get(hyp_speaker).map(String::as_str)
    }

    /// Total co-occurrence time captured by the mapping.
    pub fn total_overlap(&self) -> Time {
        self.total_overlap
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// MISS/FA/SpkErr decomposition of one scored recording.
#[derive(Debug, Clone, Serialize)]
pub struct DerBreakdown {
    /// Reference speech with too few hypothesis speakers (speaker-seconds).
    pub missed_speech: Time,
    /// Hypothesis speech with too many speakers (speaker-seconds).
    pub false_alarm: Time,
    /// Matched-count speech attributed to the wrong speaker.
    pub speaker_error: Time,
    /// Denominator: total reference speaker time in scored segments.
    pub scored_speaker_time: Time,
    pub miss_rate: f64,
    pub fa_rate: f64,
    pub spkerr_rate: f64,
    pub der: f64,
    /// True when the reference is empty (zero denominator); rates are
    /// reported as zero and must not be interpreted.
    pub degenerate: bool,
    pub mapping: SpeakerMapping,
}

/// Corpus-pooled totals: seconds summed across recordings, divided once.
#[derive(Debug, Clone, Serialize)]
pub struct PooledDer {
    pub missed_speech: Time,
    pub false_alarm: Time,
    pub speaker_error: Time,
    pub scored_speaker_time: Time,
    pub miss_rate: f64,
    pub fa_rate: f64,
    pub spkerr_rate: f64,
    pub der: f64,
    pub degenerate: bool,
}

impl PooledDer {
    /// Pools per-recording scores: second-counts are summed and divided
    /// once. Never averages per-file rates.
    pub fn from_breakdowns<'a>(breakdowns: impl IntoIterator<Item = &'a DerBreakdown>) -> Self {
        let (mut miss, mut fa, mut spkerr, mut denom) = (0i64, 0i64, 0i64, 0i64);
        for b in breakdowns {
            miss += b.missed_speech.centis();
            fa += b.false_alarm.centis();
            spkerr += b.speaker_error.centis();
            denom += b.scored_speaker_time.centis();
        }
        let (miss_rate, fa_rate, spkerr_rate, der, degenerate) = rates(miss, fa, spkerr, denom);
        PooledDer {
            missed_speech: Time::from_centis(miss),
            false_alarm: Time::from_centis(fa),
            speaker_error: Time::from_centis(spkerr),
            scored_speaker_time: Time::from_centis(denom),
            miss_rate,
            fa_rate,
            spkerr_rate,
            der,
            degenerate,
        }
    }
}

fn rates(miss: i64, fa: i64, spkerr: i64, denom: i64) -> (f64, f64, f64, f64, bool) {
    if denom == 0 {
        return (0.0, 0.0, 0.0, 0.0, true);
    }
    let d = denom as f64;
    let miss_rate = miss as f64 / d;
    let fa_rate = fa as f64 / d;
    let spkerr_rate = spkerr as f64 / d;
    // DER is defined as the sum of the three rates over the same
    // denominator, so the identity holds exactly in floating point.
    (miss_rate, fa_rate, spkerr_rate, miss_rate + fa_rate + spkerr_rate, false)
}

impl DerBreakdown {
    fn from_centis(miss: i64, fa: i64, spkerr: i64, denom: i64, mapping: SpeakerMapping) -> Self {
        let (miss_rate, fa_rate, spkerr_rate, der, degenerate) = rates(miss, fa, spkerr, denom);
        DerBreakdown {
            missed_speech: Time::from_centis(miss),
            false_alarm: Time::from_centis(fa),
            speaker_error: Time::from_centis(spkerr),
            scored_speaker_time: Time::from_centis(denom),
            miss_rate,
            fa_rate,
            spkerr_rate,
            der,
            degenerate,
            mapping,
        }
    }
}

/// Scoring knobs. The defaults (collar zero, all regions scored) are the
/// reference configuration.
#[derive(Debug, Clone, Default)]
pub struct ScoringOptions {
    /// Forgiveness collar around each reference turn boundary; speech
    /// within `collar` of a boundary is excluded from scoring.
    pub collar: Time,
    /// Optional scoring regions (e.g. from a UEM file). None scores the
    /// full timeline.
    pub regions: Option<Vec<TimeInterval>>,
}

/// Finds the injective hypothesis-to-reference speaker mapping that
/// maximizes total overlap.
///
/// Ties between equally good mappings are broken deterministically: the
/// lexicographically smallest hypothesis speakers are matched first, each
/// to the lexicographically smallest reference speaker consistent with an
/// optimal assignment.
pub fn optimal_mapping(reference: &Annotation, hypothesis: &Annotation) -> Result<SpeakerMapping, DerError> {
    let segments = segment_decomposition(reference, hypothesis)?;
    let ref_labels: Vec<&str> = reference.speakers().iter().map(String::as_str).collect();
    let hyp_labels: Vec<&str> = hypothesis.speakers().iter().map(String::as_str).collect();

    let ref_index: BTreeMap<&str, usize> =
        ref_labels.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let hyp_index: BTreeMap<&str, usize> =
        hyp_labels.iter().enumerate().map(|(i, s)| (*s, i)).collect();

    // overlap[h][r] in centiseconds.
    let mut overlap = vec![vec![0i64; ref_labels.len()]; hyp_labels.len()];
    for seg in &segments {
        let d = seg.interval.duration().centis();
        for hyp_speaker in &seg.active_b {
            for ref_speaker in &seg.active_a {
                overlap[hyp_index[hyp_speaker.as_str()]][ref_index[ref_speaker.as_str()]] += d;
            }
        }
    }

    let best_total = max_weight_assignment(&overlap).total;

    // Fix pairs greedily in label order; a pair is kept only if some
    // optimal assignment extends it.
    let mut available = vec![true; ref_labels.len()];
    let mut pairs = BTreeMap::new();
    let mut fixed_total = 0i64;
    for h in 0..hyp_labels.len() {
        for r in 0..ref_labels.len() {
            if !available[r] || overlap[h][r] == 0 {
                continue;
            }
            let rest_rows: Vec<usize> = (h + 1..hyp_labels.len()).collect();
            let rest_cols: Vec<usize> =
                (0..ref_labels.len()).filter(|&c| available[c] && c != r).collect();
            let rest: Vec<Vec<i64>> = rest_rows
                .iter()
                .map(|&i| rest_cols.iter().map(|&j| overlap[i][j]).collect())
                .collect();
            let completion = max_weight_assignment(&rest).total;
            if fixed_total + overlap[h][r] + completion == best_total {
                pairs.insert(hyp_labels[h].to_string(), ref_labels[r].to_string());
                fixed_total += overlap[h][r];
                available[r] = false;
                break;
            }
        }
    }
    debug_assert_eq!(fixed_total, best_total);

    Ok(SpeakerMapping {
        pairs,
        total_overlap: Time::from_centis(best_total),
    })
}

/// Scores one recording with the reference configuration (no collar,
/// full timeline, overlap included).
pub fn score_der(reference: &Annotation, hypothesis: &Annotation) -> Result<DerBreakdown, DerError> {
    score_der_with(reference, hypothesis, &ScoringOptions::default())
}

/// Scores one recording with explicit options.
pub fn score_der_with(
    reference: &Annotation,
    hypothesis: &Annotation,
    options: &ScoringOptions,
) -> Result<DerBreakdown, DerError> {
    if reference.recording_id() != hypothesis.recording_id() {
        return Err(TimelineError::DifferentRecordings {
            a: reference.recording_id().to_string(),
            b: hypothesis.recording_id().to_string(),
        }
        .into());
    }

    let (reference, hypothesis) = restrict_to_scored_regions(reference, hypothesis, options);

    let mapping = optimal_mapping(&reference, &hypothesis)?;
    let segments = segment_decomposition(&reference, &hypothesis)?;

    let mapped: Vec<(&String, &String)> = mapping.pairs.iter().collect();
    let (mut miss, mut fa, mut spkerr, mut denom) = (0i64, 0i64, 0i64, 0i64);
    for seg in &segments {
        let d = seg.interval.duration().centis();
        let n_ref = seg.active_a.len() as i64;
        let n_hyp = seg.active_b.len() as i64;
        let n_correct = mapped
            .iter()
            .filter(|(h, r)| seg.active_b.contains(*h) && seg.active_a.contains(*r))
            .count() as i64;
        miss += d * (n_ref - n_hyp).max(0);
        fa += d * (n_hyp - n_ref).max(0);
        spkerr += d * (n_ref.min(n_hyp) - n_correct);
        denom += d * n_ref;
    }

    Ok(DerBreakdown::from_centis(miss, fa, spkerr, denom, mapping))
}

fn restrict_to_scored_regions(
    reference: &Annotation,
    hypothesis: &Annotation,
    options: &ScoringOptions,
) -> (Annotation, Annotation) {
    if options.collar.is_zero() && options.regions.is_none() {
        return (reference.clone(), hypothesis.clone());
    }

    let hull_end = reference.extent().max(hypothesis.extent());
    let base = match &options.regions {
        Some(regions) => merge_intervals(regions.clone()),
        None => match TimeInterval::new(Time::ZERO, hull_end) {
            Ok(iv) => vec![iv],
            Err(_) => Vec::new(), // both annotations empty
        },
    };

    let scored = if options.collar.is_zero() {
        base
    } else {
        let collar = options.collar;
        let mut excluded = Vec::new();
        for turn in reference.turns() {
            for boundary in [turn.interval.onset(), turn.interval.offset()] {
                let onset = (boundary - collar).max(Time::ZERO);
                if let Ok(iv) = TimeInterval::new(onset, boundary + collar) {
                    excluded.push(iv);
                }
            }
        }
        subtract_intervals(&base, &excluded)
    };

    if scored.is_empty() {
        (
            Annotation::empty(reference.recording_id()),
            Annotation::empty(hypothesis.recording_id()),
        )
    } else {
        (reference.crop(&scored), hypothesis.crop(&scored))
    }
}

/// Per-recording scores plus pooled corpus totals.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusScore {
    pub per_recording: BTreeMap<String, DerBreakdown>,
    pub pooled: PooledDer,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Scores a corpus. Recordings present on only one side are scored
/// against an empty counterpart, with a warning. The pooled result sums
/// second-counts across recordings and divides once; per-file rates are
/// never averaged.
pub fn score_corpus(
    references: &BTreeMap<String, Annotation>,
    hypotheses: &BTreeMap<String, Annotation>,
    options: &ScoringOptions,
) -> Result<CorpusScore, DerError> {
    let mut warnings = Vec::new();
    let mut ids: Vec<&String> = references.keys().collect();
    for id in hypotheses.keys() {
        if !references.contains_key(id) {
            ids.push(id);
        }
    }
    ids.sort();

    let mut per_recording = BTreeMap::new();
    for id in ids {
        let reference = match references.get(id) {
            Some(r) => r.clone(),
            None => {
                warnings.push(format!(
                    "recording {id}: no reference; hypothesis scored against empty reference"
                ));
                Annotation::empty(id.clone())
            }
        };
        let hypothesis = match hypotheses.get(id) {
            Some(h) => h.clone(),
            None => {
                warnings.push(format!("recording {id}: missing hypothesis; scored as empty"));
                Annotation::empty(id.clone())
            }
        };
        let breakdown = score_der_with(&reference, &hypothesis, options)?;
        per_recording.insert(id.clone(), breakdown);
    }

    Ok(CorpusScore {
        pooled: PooledDer::from_breakdowns(per_recording.values()),
        per_recording,
        warnings,
    })
}
