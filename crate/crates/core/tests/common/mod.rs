//! Test-only oracles. Everything here works on a 1 ms tick grid by brute
//! force, straight from raw turn endpoints, so it shares no code path
//! with the library's interval algebra, Hungarian mapping, or scorer.

#![allow(dead_code)] // each test binary uses its own subset

use std::collections::BTreeSet;

use diarkit::timeline::{Annotation, TimeInterval, Turn};
use rand::rngs::StdRng;
use rand::Rng;

pub const TICKS_PER_CENTI: i64 = 10;

/// Per-speaker activity bitmaps at 1 ms resolution.
pub struct TickGrid {
    pub speakers: Vec<String>,
    pub active: Vec<Vec<bool>>,
    pub ticks: usize,
}

pub fn tick_extent(annotations: &[&Annotation]) -> usize {
    annotations
        .iter()
        .flat_map(|a| a.turns())
        .map(|t| (t.interval.offset().centis() * TICKS_PER_CENTI) as usize)
        .max()
        .unwrap_or(0)
}

pub fn rasterize(annotation: &Annotation, ticks: usize) -> TickGrid {
    let speakers: Vec<String> = annotation.speakers().iter().cloned().collect();
    let mut active = vec![vec![false; ticks]; speakers.len()];
    for turn in annotation.turns() {
        let index = speakers
            .iter()
            .position(|s| *s == turn.speaker)
            .expect("speaker set covers turns");
        let onset = (turn.interval.onset().centis() * TICKS_PER_CENTI) as usize;
        let offset = ((turn.interval.offset().centis() * TICKS_PER_CENTI) as usize).min(ticks);
        for tick in onset..offset {
            active[index][tick] = true;
        }
    }
    TickGrid {
        speakers,
        active,
        ticks,
    }
}

impl TickGrid {
    pub fn speaker_ticks(&self, speaker: &str) -> u64 {
        match self.speakers.iter().position(|s| s == speaker) {
            Some(index) => self.active[index].iter().filter(|&&a| a).count() as u64,
            None => 0,
        }
    }

    pub fn speaker_secs(&self, speaker: &str) -> f64 {
        self.speaker_ticks(speaker) as f64 / 1000.0
    }

    /// Ticks where at least one speaker is active.
    pub fn union_ticks(&self) -> u64 {
        (0..self.ticks)
            .filter(|&t| self.active.iter().any(|row| row[t]))
            .count() as u64
    }

    pub fn union_secs(&self) -> f64 {
        self.union_ticks() as f64 / 1000.0
    }

    /// Sum of per-speaker active ticks.
    pub fn total_ticks(&self) -> u64 {
        self.active
            .iter()
            .map(|row| row.iter().filter(|&&a| a).count() as u64)
            .sum()
    }

    pub fn active_at(&self, tick: usize) -> BTreeSet<&str> {
        self.speakers
            .iter()
            .enumerate()
            .filter(|(i, _)| self.active[*i][tick])
            .map(|(_, s)| s.as_str())
            .collect()
    }
}

/// Duration-balance statistic by tick counting: min/max of per-speaker
/// ticks. None when fewer than two speakers have any definition.
pub fn tick_balance_stat(annotation: &Annotation) -> Option<f64> {
    let grid = rasterize(annotation, tick_extent(&[annotation]));
    if grid.speakers.len() < 2 {
        return None;
    }
    let counts: Vec<u64> = grid.speakers.iter().map(|s| grid.speaker_ticks(s)).collect();
    let max = *counts.iter().max()?;
    if max == 0 {
        return None;
    }
    Some(*counts.iter().min()? as f64 / max as f64)
}

/// Overlap-ratio statistic by tick counting. None when there is no speech.
pub fn tick_overlap_stat(annotation: &Annotation) -> Option<f64> {
    let grid = rasterize(annotation, tick_extent(&[annotation]));
    let total = grid.total_ticks();
    if total == 0 {
        return None;
    }
    Some((total - grid.union_ticks()) as f64 / total as f64)
}

/// Brute-force DER on the tick grid: the speaker mapping is found by
/// exhaustive enumeration of every injective hypothesis-to-reference map.
pub struct TickDer {
    pub miss: u64,
    pub fa: u64,
    pub spkerr: u64,
    pub denom: u64,
    pub error: u64,
    /// Best total co-activity over all injective speaker maps.
    pub matched: u64,
    pub der: f64,
    pub degenerate: bool,
}

pub fn brute_force_der(reference: &Annotation, hypothesis: &Annotation) -> TickDer {
    let ticks = tick_extent(&[reference, hypothesis]);
    let ref_grid = rasterize(reference, ticks);
    let hyp_grid = rasterize(hypothesis, ticks);
    let n_ref = ref_grid.speakers.len();
    let n_hyp = hyp_grid.speakers.len();

    let mut miss = 0u64;
    let mut fa = 0u64;
    let mut min_sum = 0u64;
    let mut denom = 0u64;
    let mut co_ticks = vec![vec![0u64; n_ref]; n_hyp];
    for t in 0..ticks {
        let nr = (0..n_ref).filter(|&i| ref_grid.active[i][t]).count() as u64;
        let nh = (0..n_hyp).filter(|&i| hyp_grid.active[i][t]).count() as u64;
        miss += nr.saturating_sub(nh);
        fa += nh.saturating_sub(nr);
        min_sum += nr.min(nh);
        denom += nr;
        for (h, row) in co_ticks.iter_mut().enumerate() {
            if !hyp_grid.active[h][t] {
                continue;
            }
            for (r, cell) in row.iter_mut().enumerate() {
                if ref_grid.active[r][t] {
                    *cell += 1;
                }
            }
        }
    }

    // Maximize matched ticks over all injective maps.
    fn search(co: &[Vec<u64>], h: usize, used: &mut Vec<bool>) -> u64 {
        if h == co.len() {
            return 0;
        }
        let mut best = search(co, h + 1, used); // leave h unmatched
        for r in 0..used.len() {
            if !used[r] {
                used[r] = true;
                best = best.max(co[h][r] + search(co, h + 1, used));
                used[r] = false;
            }
        }
        best
    }
    let matched = search(&co_ticks, 0, &mut vec![false; n_ref]);
    let spkerr = min_sum - matched;
    let error = miss + fa + spkerr;
    let degenerate = denom == 0;
    TickDer {
        miss,
        fa,
        spkerr,
        denom,
        error,
        matched,
        der: if degenerate { 0.0 } else { error as f64 / denom as f64 },
        degenerate,
    }
}

/// Random annotation: up to `max_speakers` speakers, up to `max_turns`
/// turns at arbitrary (possibly overlapping) positions on a centisecond
/// grid. May come out empty.
pub fn random_annotation(
    rng: &mut StdRng,
    id: &str,
    max_speakers: usize,
    max_turns: usize,
    max_extent_cs: i64,
) -> Annotation {
    let n_speakers = rng.random_range(0..=max_speakers);
    let mut turns = Vec::new();
    if n_speakers > 0 {
        for _ in 0..rng.random_range(0..=max_turns) {
            let speaker = format!("spk{}", rng.random_range(0..n_speakers));
            let onset = rng.random_range(0..max_extent_cs - 1);
            let max_dur = (max_extent_cs / 4).max(2);
            let offset = (onset + rng.random_range(1..max_dur)).min(max_extent_cs);
            if offset > onset {
                turns.push(
                    Turn::new(
                        TimeInterval::new(
                            diarkit::timeline::Time::from_centis(onset),
                            diarkit::timeline::Time::from_centis(offset),
                        )
                        .unwrap(),
                        speaker,
                        id,
                    )
                    .unwrap(),
                );
            }
        }
    }
    Annotation::new(id, turns).unwrap()
}

/// Independent exhaustive permutation search over a pairwise Si-SNR
/// table: recursive, no shared code with the library's search.
pub fn independent_best_permutation(table: &[Vec<f64>]) -> (f64, Vec<usize>) {
    fn rec(
        table: &[Vec<f64>],
        level: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let n = table.len();
        if level == n {
            let mut sum = 0.0;
            let mut perfect = false;
            for (i, &j) in current.iter().enumerate() {
                if table[i][j] == f64::INFINITY {
                    perfect = true;
                } else {
                    sum += -table[i][j];
                }
            }
            let loss = if perfect { f64::NEG_INFINITY } else { sum / n as f64 };
            if best.as_ref().map_or(true, |(b, _)| loss < *b) {
                *best = Some((loss, current.clone()));
            }
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                current.push(j);
                rec(table, level + 1, used, current, best);
                current.pop();
                used[j] = false;
            }
        }
    }
    let mut best = None;
    rec(
        table,
        0,
        &mut vec![false; table.len()],
        &mut Vec::new(),
        &mut best,
    );
    best.expect("non-empty table")
}

/// Like `random_annotation` but guaranteed non-empty.
pub fn random_nonempty_annotation(
    rng: &mut StdRng,
    id: &str,
    max_speakers: usize,
    max_turns: usize,
    max_extent_cs: i64,
) -> Annotation {
    loop {
        let annotation =
            random_annotation(rng, id, max_speakers.max(1), max_turns.max(1), max_extent_cs);
        if !annotation.is_empty() {
            return annotation;
        }
    }
}
