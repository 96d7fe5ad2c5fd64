//! RTTM and UEM file parsing and serialization.
//!
//! RTTM lines carry 10 space-separated fields:
//! `SPEAKER <file> <chan> <onset> <dur> <NA> <NA> <speaker> <NA> <NA>`.
//! Lines beginning with `;;` are comments. Segment types other than
//! SPEAKER are skipped with a warning. UEM lines carry 4 fields:
//! `<file> <chan> <onset> <offset>`.

use std::collections::BTreeMap;
use std::io::BufRead;

use thiserror::Error;

use crate::timeline::{Annotation, Time, TimeInterval, TimelineError, Turn};

#[derive(Debug, Error)]
pub enum RttmError {
    #[error("line {line}, field {field} ({name}): {source}")]
    BadField {
        line: usize,
        field: usize,
        name: &'static str,
        source: TimelineError,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("recording `{recording}`: {source}")]
    Annotation {
        recording: String,
        source: TimelineError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One parsed RTTM line. The channel and placeholder fields are preserved
/// here but ignored for scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RttmRecord {
    pub file_id: String,
    pub channel: String,
    pub onset: Time,
    pub duration: Time,
    pub speaker: String,
}

/// One UEM scoring region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UemRegion {
    pub file_id: String,
    pub channel: String,
    pub interval: TimeInterval,
}

/// Parser behavior knobs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Round sub-centisecond times instead of rejecting them.
    pub round: bool,
}

/// Result of parsing an RTTM stream: one annotation per distinct file id,
/// plus human-readable warnings (skipped lines, dropped or merged turns).
#[derive(Debug)]
pub struct ParsedRttm {
    pub annotations: BTreeMap<String, Annotation>,
    pub warnings: Vec<String>,
}

/// Parses RTTM records without assembling annotations.
pub fn parse_rttm_records(
    reader: impl BufRead,
    options: ParseOptions,
) -> Result<(Vec<RttmRecord>, Vec<String>), RttmError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            warnings.push(format!(
                "line {line_no}: skipping record of type `{}`",
                fields[0]
            ));
            continue;
        }
        if fields.len() != 10 {
            return Err(RttmError::FieldCount {
                line: line_no,
                expected: 10,
                found: fields.len(),
            });
        }

        let parse_time = |field: usize, name: &'static str| {
            Time::parse_seconds(fields[field], options.round).map_err(|source| {
                RttmError::BadField {
                    line: line_no,
                    field: field + 1,
                    name,
                    source,
                }
            })
        };
        let onset = parse_time(3, "onset")?;
        let duration = parse_time(4, "duration")?;
        if onset < Time::ZERO {
            return Err(RttmError::BadRecord {
                line: line_no,
                reason: format!("negative onset {onset}"),
            });
        }
        if duration < Time::ZERO {
            return Err(RttmError::BadRecord {
                line: line_no,
                reason: format!("negative duration {duration}"),
            });
        }
        if duration.is_zero() {
            warnings.push(format!("line {line_no}: dropping zero-length turn"));
            continue;
        }
        let speaker = fields[7];
        if speaker.is_empty() || speaker == "<NA>" {
            return Err(RttmError::BadRecord {
                line: line_no,
                reason: "missing speaker name".to_string(),
            });
        }

        records.push(RttmRecord {
            file_id: fields[1].to_string(),
            channel: fields[2].to_string(),
            onset,
            duration,
            speaker: speaker.to_string(),
        });
    }

    Ok((records, warnings))
}

/// Parses an RTTM stream into per-recording annotations.
///
/// Speaker labels are scoped per file id; the same label in two recordings
/// is unrelated. Order of input lines does not matter.
pub fn parse_rttm(reader: impl BufRead, options: ParseOptions) -> Result<ParsedRttm, RttmError> {
    let (records, mut warnings) = parse_rttm_records(reader, options)?;

    let mut by_file: BTreeMap<String, Vec<Turn>> = BTreeMap::new();
    for record in records {
        let interval = TimeInterval::new(record.onset, record.onset + record.duration).map_err(
            |source| RttmError::Annotation {
                recording: record.file_id.clone(),
                source,
            },
        )?;
        let turn =
            Turn::new(interval, record.speaker, record.file_id.clone()).map_err(|source| {
                RttmError::Annotation {
                    recording: record.file_id.clone(),
                    source,
                }
            })?;
        by_file.entry(record.file_id).or_default().push(turn);
    }

    let mut annotations = BTreeMap::new();
    for (file_id, turns) in by_file {
        let input_count = turns.len();
        let annotation =
            Annotation::new(file_id.clone(), turns).map_err(|source| RttmError::Annotation {
                recording: file_id.clone(),
                source,
            })?;
        if annotation.turns().len() != input_count {
            warnings.push(format!(
                "recording {file_id}: merged {} same-speaker overlapping turn(s)",
                input_count - annotation.turns().len()
            ));
        }
        annotations.insert(file_id, annotation);
    }

    Ok(ParsedRttm {
        annotations,
        warnings,
    })
}

/// Serializes annotations as RTTM text.
///
/// Output is deterministic: records sorted by (file id, onset, speaker),
/// times with exactly two decimals, channel written as `1`.
pub fn serialize_rttm<'a>(annotations: impl IntoIterator<Item = &'a Annotation>) -> String {
    let mut lines: Vec<(String, Time, String, String)> = Vec::new();
    for annotation in annotations {
        for turn in annotation.turns() {
            let line = format!(
                "SPEAKER {} 1 {} {} <NA> <NA> {} <NA> <NA>",
                annotation.recording_id(),
                turn.interval.onset(),
                turn.interval.duration(),
                turn.speaker,
            );
            lines.push((
                annotation.recording_id().to_string(),
                turn.interval.onset(),
                turn.speaker.clone(),
                line,
            ));
        }
    }
    lines.sort();
    let mut out = String::new();
    for (_, _, _, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Parses a UEM stream into per-recording scoring regions (merged, sorted).
pub fn parse_uem(
    reader: impl BufRead,
    options: ParseOptions,
) -> Result<BTreeMap<String, Vec<TimeInterval>>, RttmError> {
    let mut regions: BTreeMap<String, Vec<TimeInterval>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(RttmError::FieldCount {
                line: line_no,
                expected: 4,
                found: fields.len(),
            });
        }
        let parse_time = |field: usize, name: &'static str| {
            Time::parse_seconds(fields[field], options.round).map_err(|source| {
                RttmError::BadField {
                    line: line_no,
                    field: field + 1,
                    name,
                    source,
                }
            })
        };
        let onset = parse_time(2, "onset")?;
        let offset = parse_time(3, "offset")?;
        let interval = TimeInterval::new(onset, offset).map_err(|source| RttmError::BadField {
            line: line_no,
            field: 4,
            name: "offset",
            source,
        })?;
        regions.entry(fields[0].to_string()).or_default().push(interval);
    }
    for intervals in regions.values_mut() {
        *intervals = crate::timeline::merge_intervals(std::mem::take(intervals));
    }
    Ok(regions)
}

/// Crops an annotation to the union of scoring regions; turns entirely
/// outside are dropped. No regions means no restriction.
pub fn apply_uem(annotation: &Annotation, regions: &[TimeInterval]) -> Annotation {
    annotation.crop(regions)
}
