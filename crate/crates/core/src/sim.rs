//! Synthetic two-party conversations with controllable hypothesis
//! corruption, for desk-scale end-to-end validation of selection.
//!
//! The generator produces a ground-truth annotation per recording, a
//! clustering-style hypothesis (CSD: overlap regions collapsed onto one
//! speaker, so misses but never false alarms), and a separation-style
//! hypothesis (SSD) that is either clean or carries one of two injected
//! failures: a span where both speakers land in one stream (channel
//! confusion, drives duration imbalance and speaker error) or a span
//! where the speech is duplicated into both streams (drives abnormal
//! overlap and false alarm).
//!
//! Generation is deterministic: recording `i` draws from ChaCha8 stream
//! `i + 1` of the configured seed, so corpora are byte-identical across
//! runs and across any parallelization of the per-recording work.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::der::{score_corpus, CorpusScore, DerError, ScoringOptions};
use crate::selector::{
    evaluate_detection, oracle_select, select, CombinationMode, DetectionMetrics, Selection,
    SelectorError,
};
use crate::strategies::Thresholds;
use crate::timeline::{
    intersect_intervals, merge_intervals, segment_decomposition, subtract_intervals, Annotation,
    Time, TimeInterval, TimelineError, Turn,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot reach overlap ratio {target} (best attempt measured {achieved:.4})")]
    OverlapTargetUnreachable { target: f64, achieved: f64 },
    #[error("recording `{recording}` has {found} speakers, need {need}")]
    WrongSpeakerCount {
        recording: String,
        found: usize,
        need: String,
    },
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Der(#[from] DerError),
    #[error(transparent)]
    Selector(#[from] SelectorError),
}

fn default_num_recordings() -> usize {
    10
}
fn default_recording_len() -> f64 {
    600.0
}
fn default_num_speakers() -> usize {
    2
}
fn default_mean_turn() -> f64 {
    3.0
}
fn default_mean_pause() -> f64 {
    0.5
}
fn default_target_overlap() -> f64 {
    0.119
}
fn default_csd_miss_prob() -> f64 {
    0.7
}
fn default_failure_prob() -> f64 {
    0.25
}
fn default_jitter_sd() -> f64 {
    0.05
}
fn default_span_frac() -> f64 {
    0.6
}

/// Generative parameters. Loadable from a plain key-value (TOML) file;
/// unset keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_num_recordings")]
    pub num_recordings: usize,
    #[serde(default = "default_recording_len")]
    pub recording_len_secs: f64,
    #[serde(default = "default_num_speakers")]
    pub num_speakers: usize,
    #[serde(default = "default_mean_turn")]
    pub mean_turn_secs: f64,
    #[serde(default = "default_mean_pause")]
    pub mean_pause_secs: f64,
    /// Desired overlap ratio per recording; realized ratios are kept
    /// within two percentage points by resampling.
    #[serde(default = "default_target_overlap")]
    pub target_overlap_ratio: f64,
    /// Probability that an overlap region goes to the longer turn's
    /// owner rather than a random active speaker.
    #[serde(default = "default_csd_miss_prob")]
    pub csd_overlap_miss_prob: f64,
    #[serde(default = "default_failure_prob")]
    pub ssd_failure1_prob: f64,
    #[serde(default = "default_failure_prob")]
    pub ssd_failure2_prob: f64,
    #[serde(default = "default_jitter_sd")]
    pub boundary_jitter_sd_secs: f64,
    /// Fraction of the recording covered by an injected failure span.
    #[serde(default = "default_span_frac")]
    pub failure_span_frac: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            num_recordings: default_num_recordings(),
            recording_len_secs: default_recording_len(),
            num_speakers: default_num_speakers(),
            mean_turn_secs: default_mean_turn(),
            mean_pause_secs: default_mean_pause(),
            target_overlap_ratio: default_target_overlap(),
            csd_overlap_miss_prob: default_csd_miss_prob(),
            ssd_failure1_prob: default_failure_prob(),
            ssd_failure2_prob: default_failure_prob(),
            boundary_jitter_sd_secs: default_jitter_sd(),
            failure_span_frac: default_span_frac(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let config: SimConfig =
            toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |msg: &str| Err(SimError::Config(msg.to_string()));
        if self.num_recordings == 0 {
            return err("num_recordings must be at least 1");
        }
        if self.recording_len_secs <= 0.0 {
            return err("recording_len_secs must be positive");
        }
        if self.num_speakers < 2 {
            return err("num_speakers must be at least 2");
        }
        if self.mean_turn_secs <= 0.0 {
            return err("mean_turn_secs must be positive");
        }
        if self.mean_pause_secs < 0.0 {
            return err("mean_pause_secs must be non-negative");
        }
        if !(0.0..0.5).contains(&self.target_overlap_ratio) {
            return err("target_overlap_ratio must be in [0, 0.5)");
        }
        for (name, p) in [
            ("csd_overlap_miss_prob", self.csd_overlap_miss_prob),
            ("ssd_failure1_prob", self.ssd_failure1_prob),
            ("ssd_failure2_prob", self.ssd_failure2_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("{name} must be in [0, 1]")));
            }
        }
        if self.ssd_failure1_prob + self.ssd_failure2_prob > 1.0 {
            return err("ssd_failure1_prob + ssd_failure2_prob must not exceed 1");
        }
        if self.boundary_jitter_sd_secs < 0.0 {
            return err("boundary_jitter_sd_secs must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.failure_span_frac) {
            return err("failure_span_frac must be in [0, 1]");
        }
        Ok(())
    }
}

/// Which corruption was injected into the SSD hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InjectedMode {
    Clean,
    /// Both speakers merged into one stream over a span.
    Fail1,
    /// Span speech duplicated into both streams.
    Fail2,
}

/// One generated recording with its reference and both hypotheses.
#[derive(Debug, Clone, Serialize)]
pub struct SimulatedUtterance {
    pub reference: Annotation,
    pub csd: Annotation,
    pub ssd: Annotation,
    pub injected_mode: InjectedMode,
}

const MIN_TURN_CS: i64 = 20;
const MAX_OVERLAP_ATTEMPTS: usize = 200;

fn sample_exp_centis(rng: &mut ChaCha8Rng, mean_secs: f64) -> i64 {
    if mean_secs == 0.0 {
        return 0;
    }
    let exp = Exp::new(1.0 / mean_secs).expect("positive rate");
    (exp.sample(rng) * 100.0).round() as i64
}

/// Overlap ratio of an annotation by the per-speaker-time formula:
/// (sum of speaker durations - union duration) / sum of speaker durations.
pub fn overlap_ratio(annotation: &Annotation) -> f64 {
    let total = annotation.total_speaker_time().centis();
    if total == 0 {
        return 0.0;
    }
    (total - annotation.union_duration().centis()) as f64 / total as f64
}

/// Generates one ground-truth conversation: speakers alternate, turn
/// lengths and pauses are exponential, and a fraction of transitions
/// overlap the previous turn. The realized overlap ratio is kept within
/// two percentage points of the target by resampling (with an adjusted
/// overlap probability) up to a retry cap.
pub fn generate_reference(
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
    recording_id: &str,
) -> Result<Annotation, SimError> {
    let len_cs = Time::from_secs_f64(config.recording_len_secs).centis();
    let target = config.target_overlap_ratio;
    let mut overlap_prob = (2.0 * target).clamp(0.0, 0.95);
    let mut best_gap = f64::INFINITY;
    let mut best_ratio = 0.0;

    for _ in 0..MAX_OVERLAP_ATTEMPTS {
        let mut turns: Vec<Turn> = Vec::new();
        let mut cursor = 0i64;
        let mut speaker = 0usize;
        while cursor < len_cs {
            let duration = sample_exp_centis(rng, config.mean_turn_secs).max(MIN_TURN_CS);
            let onset = cursor;
            let offset = (onset + duration).min(len_cs);
            if offset <= onset {
                break;
            }
            let actual = offset - onset;
            turns.push(Turn::new(
                TimeInterval::new(Time::from_centis(onset), Time::from_centis(offset))?,
                format!("spk{speaker}"),
                recording_id,
            )?);
            speaker = (speaker + 1) % config.num_speakers;

            if target > 0.0 && rng.random::<f64>() < overlap_prob && actual > 1 {
                // Next turn starts inside the current one.
                let frac = rng.random_range(0.25..0.75);
                let overlap = ((actual as f64 * frac).round() as i64).clamp(1, actual - 1);
                cursor = offset - overlap;
            } else {
                cursor = offset + sample_exp_centis(rng, config.mean_pause_secs);
            }
        }

        let annotation = Annotation::new(recording_id, turns)?;
        if annotation.is_empty() {
            continue;
        }
        let ratio = overlap_ratio(&annotation);
        let gap = (ratio - target).abs();
        if gap <= 0.02 {
            return Ok(annotation);
        }
        if gap < best_gap {
            best_gap = gap;
            best_ratio = ratio;
        }
        // Multiplicative correction toward the target.
        overlap_prob = if ratio > 0.0 {
            (overlap_prob * target / ratio).clamp(0.01, 0.95)
        } else {
            (overlap_prob * 2.0).clamp(0.05, 0.95)
        };
    }

    Err(SimError::OverlapTargetUnreachable {
        target,
        achieved: best_ratio,
    })
}

fn jitter_intervals(
    intervals: &[TimeInterval],
    sd_secs: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<TimeInterval> {
    if sd_secs == 0.0 {
        return intervals.to_vec();
    }
    let normal = Normal::new(0.0, sd_secs).expect("non-negative sd");
    intervals
        .iter()
        .map(|iv| {
            let shift_on = (normal.sample(rng) * 100.0).round() as i64;
            let shift_off = (normal.sample(rng) * 100.0).round() as i64;
            let onset = (iv.onset().centis() + shift_on).max(0);
            let offset = (iv.offset().centis() + shift_off).max(onset + 1);
            TimeInterval::new(Time::from_centis(onset), Time::from_centis(offset))
                .expect("jittered interval stays valid")
        })
        .collect()
}

fn annotation_from_streams(
    recording_id: &str,
    streams: &[(String, Vec<TimeInterval>)],
) -> Result<Annotation, TimelineError> {
    let mut turns = Vec::new();
    for (label, intervals) in streams {
        for interval in intervals {
            turns.push(Turn::new(*interval, label.clone(), recording_id)?);
        }
    }
    Annotation::new(recording_id, turns)
}

/// Collapses every overlap region of the reference onto exactly one of
/// its speakers, as a clustering system that assigns each moment to a
/// single cluster would. With zero jitter the result misses the
/// overlapped speech but never raises a false alarm.
pub fn corrupt_csd(
    reference: &Annotation,
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Annotation, SimError> {
    if reference.num_speakers() < 2 {
        return Err(SimError::WrongSpeakerCount {
            recording: reference.recording_id().to_string(),
            found: reference.num_speakers(),
            need: "at least 2".to_string(),
        });
    }
    let recording_id = reference.recording_id();
    let empty = Annotation::empty(recording_id);
    let segments = segment_decomposition(reference, &empty)?;

    // Maximal contiguous runs where two or more speakers are active.
    #[derive(Clone)]
    struct Region {
        start: usize,
        end: usize, // inclusive segment indices
    }
    let mut regions: Vec<Region> = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if seg.active_a.len() < 2 {
            continue;
        }
        match regions.last_mut() {
            Some(r)
                if r.end + 1 == i
                    && segments[r.end].interval.offset() == seg.interval.onset() =>
            {
                r.end = i;
            }
            _ => regions.push(Region { start: i, end: i }),
        }
    }

    // Pick an owner per overlap region.
    let mut owner_by_segment: BTreeMap<usize, String> = BTreeMap::new();
    for region in &regions {
        let interval = TimeInterval::new(
            segments[region.start].interval.onset(),
            segments[region.end].interval.offset(),
        )?;
        let mut candidates: Vec<String> = Vec::new();
        for seg in &segments[region.start..=region.end] {
            for speaker in &seg.active_a {
                if !candidates.contains(speaker) {
                    candidates.push(speaker.clone());
                }
            }
        }
        candidates.sort();
        // Longest turn intersecting the region wins; ties go to the
        // lexicographically smaller label.
        let longest = candidates
            .iter()
            .max_by_key(|speaker| {
                reference
                    .turns()
                    .iter()
                    .filter(|t| t.speaker == **speaker && t.interval.overlaps(&interval))
                    .map(|t| t.interval.duration().centis())
                    .max()
                    .unwrap_or(0)
            })
            .expect("region has candidates")
            .clone();
        let owner = if rng.random::<f64>() < config.csd_overlap_miss_prob {
            longest
        } else {
            candidates[rng.random_range(0..candidates.len())].clone()
        };
        for i in region.start..=region.end {
            owner_by_segment.insert(i, owner.clone());
        }
    }

    // Assemble single-speaker output windows, coalescing touching runs.
    let labels: BTreeMap<&str, String> = reference
        .speakers()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), format!("clu{i}")))
        .collect();
    let mut per_stream: BTreeMap<String, Vec<TimeInterval>> = BTreeMap::new();
    for (i, seg) in segments.iter().enumerate() {
        let speaker = match owner_by_segment.get(&i) {
            Some(owner) => owner.as_str(),
            None => seg.active_a.first().expect("segment has a speaker").as_str(),
        };
        let label = labels[speaker].clone();
        let intervals = per_stream.entry(label).or_default();
        match intervals.last_mut() {
            Some(last) if last.offset() == seg.interval.onset() => {
                *last = TimeInterval::new(last.onset(), seg.interval.offset())?;
            }
            _ => intervals.push(seg.interval),
        }
    }

    let streams: Vec<(String, Vec<TimeInterval>)> = per_stream
        .into_iter()
        .map(|(label, intervals)| {
            let jittered = jitter_intervals(&intervals, config.boundary_jitter_sd_secs, rng);
            (label, jittered)
        })
        .collect();
    Ok(annotation_from_streams(recording_id, &streams)?)
}

fn draw_span(extent_cs: i64, frac: f64, rng: &mut ChaCha8Rng) -> Option<TimeInterval> {
    if frac <= 0.0 || extent_cs < 1 {
        return None;
    }
    let span_len = ((extent_cs as f64 * frac).round() as i64).clamp(1, extent_cs);
    let start = rng.random_range(0..=extent_cs - span_len);
    Some(
        TimeInterval::new(Time::from_centis(start), Time::from_centis(start + span_len))
            .expect("span is non-empty"),
    )
}

/// Builds the SSD hypothesis: clean stream-per-speaker output, or one of
/// the two injected failures over a contiguous span.
pub fn corrupt_ssd(
    reference: &Annotation,
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Annotation, InjectedMode), SimError> {
    if reference.num_speakers() != 2 {
        return Err(SimError::WrongSpeakerCount {
            recording: reference.recording_id().to_string(),
            found: reference.num_speakers(),
            need: "exactly 2".to_string(),
        });
    }
    let recording_id = reference.recording_id();
    let speakers: Vec<&String> = reference.speakers().iter().collect();
    let speech: Vec<Vec<TimeInterval>> = speakers
        .iter()
        .map(|s| merge_intervals(reference.speaker_intervals(s)))
        .collect();

    let draw = rng.random::<f64>();
    let mode = if draw < config.ssd_failure1_prob {
        InjectedMode::Fail1
    } else if draw < config.ssd_failure1_prob + config.ssd_failure2_prob {
        InjectedMode::Fail2
    } else {
        InjectedMode::Clean
    };

    let extent_cs = reference.extent().centis();
    let mut streams: Vec<Vec<TimeInterval>> = match mode {
        InjectedMode::Clean => speech.clone(),
        InjectedMode::Fail1 => {
            let dominant = rng.random_range(0..2usize);
            match draw_span(extent_cs, config.failure_span_frac, rng) {
                Some(span) => {
                    let other = 1 - dominant;
                    let stolen = intersect_intervals(&speech[other], &[span]);
                    let mut dominant_stream = speech[dominant].clone();
                    dominant_stream.extend(stolen);
                    let other_stream = subtract_intervals(&speech[other], &[span]);
                    let mut out = vec![Vec::new(), Vec::new()];
                    out[dominant] = merge_intervals(dominant_stream);
                    out[other] = other_stream;
                    out
                }
                None => speech.clone(),
            }
        }
        InjectedMode::Fail2 => match draw_span(extent_cs, config.failure_span_frac, rng) {
            Some(span) => {
                let all_speech = reference.support();
                let duplicated = intersect_intervals(&all_speech, &[span]);
                speech
                    .iter()
                    .map(|own| {
                        let mut stream = own.clone();
                        stream.extend(duplicated.iter().copied());
                        merge_intervals(stream)
                    })
                    .collect()
            }
            None => speech.clone(),
        },
    };

    for stream in &mut streams {
        *stream = jitter_intervals(stream, config.boundary_jitter_sd_secs, rng);
    }
    let labeled: Vec<(String, Vec<TimeInterval>)> = streams
        .into_iter()
        .enumerate()
        .map(|(i, intervals)| (format!("str{i}"), intervals))
        .collect();
    Ok((annotation_from_streams(recording_id, &labeled)?, mode))
}

/// Generates recording `index` of the configured corpus. Deterministic
/// in (seed, index); safe to call from parallel workers.
pub fn generate_utterance(config: &SimConfig, index: usize) -> Result<SimulatedUtterance, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);
    let recording_id = format!("sim_{index:05}");
    let reference = generate_reference(config, &mut rng, &recording_id)?;
    let csd = corrupt_csd(&reference, config, &mut rng)?;
    let (ssd, injected_mode) = corrupt_ssd(&reference, config, &mut rng)?;
    Ok(SimulatedUtterance {
        reference,
        csd,
        ssd,
        injected_mode,
    })
}

/// Evaluation of one combination mode over a simulated corpus.
#[derive(Debug)]
pub struct ModeOutcome {
    pub mode: CombinationMode,
    pub selection: Selection,
    pub corpus: CorpusScore,
    pub detection: DetectionMetrics,
}

/// Full benchmark: the corpus, both single-system baselines, and one
/// outcome per combination mode (the oracle included, last).
#[derive(Debug)]
pub struct BenchmarkRun {
    pub utterances: Vec<SimulatedUtterance>,
    pub csd_only: CorpusScore,
    pub ssd_only: CorpusScore,
    pub outcomes: Vec<ModeOutcome>,
}

impl BenchmarkRun {
    pub fn outcome(&self, mode: CombinationMode) -> Option<&ModeOutcome> {
        self.outcomes.iter().find(|o| o.mode == mode)
    }
}

/// Scores baselines, runs every combination mode plus the oracle, and
/// evaluates detection quality for each.
pub fn evaluate_benchmark(
    utterances: Vec<SimulatedUtterance>,
    thresholds: &Thresholds,
) -> Result<BenchmarkRun, SimError> {
    let mut reference = BTreeMap::new();
    let mut csd = BTreeMap::new();
    let mut ssd = BTreeMap::new();
    for utterance in &utterances {
        let id = utterance.reference.recording_id().to_string();
        reference.insert(id.clone(), utterance.reference.clone());
        csd.insert(id.clone(), utterance.csd.clone());
        ssd.insert(id, utterance.ssd.clone());
    }

    let scoring = ScoringOptions::default();
    let csd_only = score_corpus(&reference, &csd, &scoring)?;
    let ssd_only = score_corpus(&reference, &ssd, &scoring)?;

    let mut outcomes = Vec::new();
    for mode in CombinationMode::STANDARD {
        let selection = select(&csd, &ssd, thresholds, mode)?;
        let corpus = score_corpus(&reference, &selection.selected, &scoring)?;
        let detection = evaluate_detection(&selection.flags(), &csd, &ssd, &reference)?;
        outcomes.push(ModeOutcome {
            mode,
            selection,
            corpus,
            detection,
        });
    }
    let oracle = oracle_select(&csd, &ssd, &reference)?;
    let corpus = score_corpus(&reference, &oracle.selected, &scoring)?;
    let detection = evaluate_detection(&oracle.flags(), &csd, &ssd, &reference)?;
    outcomes.push(ModeOutcome {
        mode: CombinationMode::Oracle,
        selection: oracle,
        corpus,
        detection,
    });

    Ok(BenchmarkRun {
        utterances,
        csd_only,
        ssd_only,
        outcomes,
    })
}

/// Generates the whole corpus sequentially and evaluates it.
pub fn run_benchmark(config: &SimConfig, thresholds: &Thresholds) -> Result<BenchmarkRun, SimError> {
    config.validate()?;
    let utterances = (0..config.num_recordings)
        .map(|i| generate_utterance(config, i))
        .collect::<Result<Vec<_>, _>>()?;
    evaluate_benchmark(utterances, thresholds)
}
