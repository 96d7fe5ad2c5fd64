//! Core time types and exact interval algebra.
//!
//! Time is held as integer centiseconds so that interval unions, durations
//! and decompositions are exact and reproducible across runs and platforms.
//! RTTM files carry 2-decimal seconds in practice; finer input precision is
//! rejected unless rounding is explicitly requested.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Errors from time parsing and annotation construction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimelineError {
    #[error("cannot parse `{text}` as seconds: {reason}")]
    TimeParse { text: String, reason: String },
    #[error("`{text}` has sub-centisecond precision; pass --round to round to 0.01 s")]
    SubCentisecond { text: String },
    #[error("interval offset {offset} must be greater than onset {onset}")]
    EmptyInterval { onset: Time, offset: Time },
    #[error("interval onset {onset} must be non-negative")]
    NegativeOnset { onset: Time },
    #[error("speaker label must be non-empty")]
    EmptySpeaker,
    #[error("turn belongs to recording `{turn}`, expected `{expected}`")]
    RecordingIdMismatch { turn: String, expected: String },
    #[error("annotations belong to different recordings: `{a}` vs `{b}`")]
    DifferentRecordings { a: String, b: String },
    #[error("unknown speaker `{speaker}` in recording `{recording}`")]
    UnknownSpeaker { speaker: String, recording: String },
}

/// A point in time or a duration, in integer centiseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Time(i64);

impl Time {
    pub const ZERO: Time = Time(0);

    pub fn from_centis(centis: i64) -> Self {
        Time(centis)
    }

    pub fn centis(self) -> i64 {
        self.0
    }

    /// Rounds to the nearest centisecond, ties away from zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        Time((secs * 100.0).round() as i64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Parses a plain decimal seconds value ("12", "12.3", "12.34").
    ///
    /// Digits beyond the second decimal place must be zero unless `round`
    /// is set, in which case the value is rounded to the nearest
    /// centisecond (ties away from zero).
    pub fn parse_seconds(text: &str, round: bool) -> Result<Self, TimelineError> {
        let parse_err = |reason: &str| TimelineError::TimeParse {
            text: text.to_string(),
            reason: reason.to_string(),
        };

        let trimmed = text.trim();
        let (negative, digits) = match trimmed.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, trimmed),
        };
        if digits.is_empty() {
            return Err(parse_err("empty value"));
        }

        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(parse_err("no digits"));
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(parse_err("expected a plain decimal number"));
        }

        let whole: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| parse_err("integer overflow"))?
        };

        let mut frac = frac_part.bytes();
        let d1 = frac.next().map(|b| (b - b'0') as i64).unwrap_or(0);
        let d2 = frac.next().map(|b| (b - b'0') as i64).unwrap_or(0);
        let rest: Vec<u8> = frac.collect();
        let rest_nonzero = rest.iter().any(|&b| b != b'0');

        let mut centis = whole
            .checked_mul(100)
            .and_then(|v| v.checked_add(d1 * 10 + d2))
            .ok_or_else(|| parse_err("value out of range"))?;

        if rest_nonzero {
            if !round {
                return Err(TimelineError::SubCentisecond {
                    text: text.to_string(),
                });
            }
            // Round to nearest on the remaining digits; ties away from zero.
            if rest[0] - b'0' >= 5 {
                centis += 1;
            }
        }

        Ok(Time(if negative { -centis } else { centis }))
    }

    pub fn min(self, other: Time) -> Time {
        Time(self.0.min(other.0))
    }

    pub fn max(self, other: Time) -> Time {
        Time(self.0.max(other.0))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl Add for Time {
    type Output = Time;
    fn add(self, rhs: Time) -> Time {
        Time(self.0 + rhs.0)
    }
}

impl AddAssign for Time {
    fn add_assign(&mut self, rhs: Time) {
        self.0 += rhs.0;
    }
}

impl Sub for Time {
    type Output = Time;
    fn sub(self, rhs: Time) -> Time {
        Time(self.0 - rhs.0)
    }
}

impl Sum for Time {
    fn sum<I: Iterator<Item = Time>>(iter: I) -> Time {
        Time(iter.map(|t| t.0).sum())
    }
}

impl fmt::Display for Time {
    /// Exactly two decimals, matching RTTM conventions.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{}{}.{:02}", sign, abs / 100, abs % 100)
    }
}

impl Serialize for Time {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_secs_f64())
    }
}

/// A non-empty `[onset, offset)` span with non-negative onset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TimeInterval {
    onset: Time,
    offset: Time,
}

impl TimeInterval {
    pub fn new(onset: Time, offset: Time) -> Result<Self, TimelineError> {
        if onset < Time::ZERO {
            return Err(TimelineError::NegativeOnset { onset });
        }
        if offset <= onset {
            return Err(TimelineError::EmptyInterval { onset, offset });
        }
        Ok(TimeInterval { onset, offset })
    }

    pub fn from_secs(onset: f64, offset: f64) -> Result<Self, TimelineError> {
        TimeInterval::new(Time::from_secs_f64(onset), Time::from_secs_f64(offset))
    }

    pub fn onset(&self) -> Time {
        self.onset
    }

    pub fn offset(&self) -> Time {
        self.offset
    }

    pub fn duration(&self) -> Time {
        self.offset - self.onset
    }

    pub fn overlaps(&self, other: &TimeInterval) -> bool {
        self.onset < other.offset && other.onset < self.offset
    }

    pub fn intersect(&self, other: &TimeInterval) -> Option<TimeInterval> {
        let onset = self.onset.max(other.onset);
        let offset = self.offset.min(other.offset);
        (onset < offset).then_some(TimeInterval { onset, offset })
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.onset, self.offset)
    }
}

/// Merges intervals into a sorted, pairwise-disjoint cover of their union.
/// Touching intervals are coalesced.
pub fn merge_intervals(mut intervals: Vec<TimeInterval>) -> Vec<TimeInterval> {
    intervals.sort();
    let mut merged: Vec<TimeInterval> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        match merged.last_mut() {
            Some(last) if iv.onset <= last.offset => {
                last.offset = last.offset.max(iv.offset);
            }
            _ => merged.push(iv),
        }
    }
    merged
}

/// Total length of the union of `intervals`.
pub fn union_length(intervals: &[TimeInterval]) -> Time {
    merge_intervals(intervals.to_vec())
        .iter()
        .map(TimeInterval::duration)
        .sum()
}

/// Intersects two interval collections; result is sorted and disjoint.
pub fn intersect_intervals(a: &[TimeInterval], b: &[TimeInterval]) -> Vec<TimeInterval> {
    let a = merge_intervals(a.to_vec());
    let b = merge_intervals(b.to_vec());
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if let Some(iv) = a[i].intersect(&b[j]) {
            out.push(iv);
        }
        if a[i].offset <= b[j].offset {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Removes `cut` from `base`; result is sorted and disjoint.
pub fn subtract_intervals(base: &[TimeInterval], cut: &[TimeInterval]) -> Vec<TimeInterval> {
    let base = merge_intervals(base.to_vec());
    let cut = merge_intervals(cut.to_vec());
    let mut out = Vec::new();
    for iv in base {
        let mut cursor = iv.onset;
        for c in cut.iter().filter(|c| c.overlaps(&iv)) {
            if c.onset > cursor {
                out.push(TimeInterval {
                    onset: cursor,
                    offset: c.onset,
                });
            }
            cursor = cursor.max(c.offset);
        }
        if cursor < iv.offset {
            out.push(TimeInterval {
                onset: cursor,
                offset: iv.offset,
            });
        }
    }
    out
}

/// One speaker-labeled time span within a recording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Turn {
    pub interval: TimeInterval,
    pub speaker: String,
    pub recording_id: String,
}

impl Turn {
    pub fn new(
        interval: TimeInterval,
        speaker: impl Into<String>,
        recording_id: impl Into<String>,
    ) -> Result<Self, TimelineError> {
        let speaker = speaker.into();
        if speaker.is_empty() {
            return Err(TimelineError::EmptySpeaker);
        }
        Ok(Turn {
            interval,
            speaker,
            recording_id: recording_id.into(),
        })
    }
}

/// A recording's full diarization result: a set of speaker turns.
///
/// Turns of the same speaker never overlap (overlapping input turns are
/// merged at construction); overlap across different speakers is expected.
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Annotation {
    recording_id: String,
    turns: Vec<Turn>,
    speakers: BTreeSet<String>,
}

impl Annotation {
    /// Builds an annotation from turns, merging same-speaker overlap.
    pub fn new(
        recording_id: impl Into<String>,
        turns: Vec<Turn>,
    ) -> Result<Self, TimelineError> {
        let recording_id = recording_id.into();
        let mut by_speaker: BTreeMap<String, Vec<TimeInterval>> = BTreeMap::new();
        for turn in turns {
            if turn.recording_id != recording_id {
                return Err(TimelineError::RecordingIdMismatch {
                    turn: turn.recording_id,
                    expected: recording_id,
                });
            }
            if turn.speaker.is_empty() {
                return Err(TimelineError::EmptySpeaker);
            }
            by_speaker.entry(turn.speaker).or_default().push(turn.interval);
        }

        let mut turns = Vec::new();
        let mut speakers = BTreeSet::new();
        for (speaker, mut intervals) in by_speaker {
            intervals.sort();
            // Merge strictly overlapping same-speaker turns; keep touching
            // turns distinct so canonical form is stable under reparsing.
            let mut merged: Vec<TimeInterval> = Vec::with_capacity(intervals.len());
            for iv in intervals {
                match merged.last_mut() {
                    Some(last) if iv.onset() < last.offset() => {
                        *last = TimeInterval::new(last.onset(), last.offset().max(iv.offset()))?;
                    }
                    _ => merged.push(iv),
                }
            }
            for interval in merged {
                turns.push(Turn {
                    interval,
                    speaker: speaker.clone(),
                    recording_id: recording_id.clone(),
                });
            }
            speakers.insert(speaker);
        }
        turns.sort_by(|a, b| {
            (a.interval, &a.speaker).cmp(&(b.interval, &b.speaker))
        });

        Ok(Annotation {
            recording_id,
            turns,
            speakers,
        })
    }

    pub fn empty(recording_id: impl Into<String>) -> Self {
        Annotation {
            recording_id: recording_id.into(),
            turns: Vec::new(),
            speakers: BTreeSet::new(),
        }
    }

    pub fn recording_id(&self) -> &str {
        &self.recording_id
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn speakers(&self) -> &BTreeSet<String> {
        &self.speakers
    }

    pub fn num_speakers(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Sorted, disjoint intervals of one speaker's speech.
    pub fn speaker_intervals(&self, speaker: &str) -> Vec<TimeInterval> {
        self.turns
            .iter()
            .filter(|t| t.speaker == speaker)
            .map(|t| t.interval)
            .collect()
    }

    /// Total speech time of one speaker.
    pub fn speaker_duration(&self, speaker: &str) -> Result<Time, TimelineError> {
        if !self.speakers.contains(speaker) {
            return Err(TimelineError::UnknownSpeaker {
                speaker: speaker.to_string(),
                recording: self.recording_id.clone(),
            });
        }
        Ok(union_length(&self.speaker_intervals(speaker)))
    }

    /// Sum of every speaker's speech time (overlap counted once per speaker).
    pub fn total_speaker_time(&self) -> Time {
        self.turns.iter().map(|t| t.interval.duration()).sum()
    }

    /// Length of the union of all turns across all speakers.
    pub fn union_duration(&self) -> Time {
        union_length(&self.support())
    }

    /// Sorted, disjoint intervals where anyone is speaking.
    pub fn support(&self) -> Vec<TimeInterval> {
        merge_intervals(self.turns.iter().map(|t| t.interval).collect())
    }

    /// Largest offset over all turns, or zero for an empty annotation.
    pub fn extent(&self) -> Time {
        self.turns
            .iter()
            .map(|t| t.interval.offset())
            .max()
            .unwrap_or(Time::ZERO)
    }

    /// Keeps only the parts of each turn inside `regions`.
    /// An empty region list leaves the annotation unchanged.
    pub fn crop(&self, regions: &[TimeInterval]) -> Annotation {
        if regions.is_empty() {
            return self.clone();
        }
        let regions = merge_intervals(regions.to_vec());
        let mut turns = Vec::new();
        for turn in &self.turns {
            for region in &regions {
                if let Some(interval) = turn.interval.intersect(region) {
                    turns.push(Turn {
                        interval,
                        speaker: turn.speaker.clone(),
                        recording_id: self.recording_id.clone(),
                    });
                }
            }
        }
        // Inputs satisfied the invariants, so cropping cannot fail.
        Annotation::new(self.recording_id.clone(), turns).expect("cropping preserves invariants")
    }
}

/// One homogeneous piece of a two-annotation decomposition: within the
/// interval, the active-speaker sets of both annotations are constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub interval: TimeInterval,
    pub active_a: BTreeSet<String>,
    pub active_b: BTreeSet<String>,
}

/// Splits time at every turn boundary of either annotation.
///
/// The returned segments are disjoint, sorted by onset, and cover exactly
/// the union of both annotations' support.
pub fn segment_decomposition(
    a: &Annotation,
    b: &Annotation,
) -> Result<Vec<Segment>, TimelineError> {
    if a.recording_id() != b.recording_id() {
        return Err(TimelineError::DifferentRecordings {
            a: a.recording_id().to_string(),
            b: b.recording_id().to_string(),
        });
    }

    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Side {
        A,
        B,
    }
    // (time, is_onset, side, speaker); offsets sort before onsets at a
    // boundary so zero-length activations cannot arise.
    let mut events: Vec<(Time, bool, Side, &str)> = Vec::new();
    for turn in a.turns() {
        events.push((turn.interval.onset(), true, Side::A, &turn.speaker));
        events.push((turn.interval.offset(), false, Side::A, &turn.speaker));
    }
    for turn in b.turns() {
        events.push((turn.interval.onset(), true, Side::B, &turn.speaker));
        events.push((turn.interval.offset(), false, Side::B, &turn.speaker));
    }
    events.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));

    let mut segments = Vec::new();
    let mut active_a: BTreeSet<String> = BTreeSet::new();
    let mut active_b: BTreeSet<String> = BTreeSet::new();
    let mut cursor: Option<Time> = None;

    let mut idx = 0;
    while idx < events.len() {
        let boundary = events[idx].0;
        if let Some(start) = cursor {
            if start < boundary && (!active_a.is_empty() || !active_b.is_empty()) {
                segments.push(Segment {
                    interval: TimeInterval::new(start, boundary)?,
                    active_a: active_a.clone(),
                    active_b: active_b.clone(),
                });
            }
        }
        while idx < events.len() && events[idx].0 == boundary {
            let (_, is_onset, ref side, speaker) = events[idx];
            let set = match side {
                Side::A => &mut active_a,
                Side::B => &mut active_b,
            };
            if is_onset {
                set.insert(speaker.to_string());
            } else {
                set.remove(speaker);
            }
            idx += 1;
        }
        cursor = Some(boundary);
    }

    Ok(segments)
}
