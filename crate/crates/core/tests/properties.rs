//! Property tests for the spec-level invariants.

mod common;

use std::collections::BTreeMap;
use std::io::Cursor;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use diarkit::der::score_der;
use diarkit::rttm::{parse_rttm, serialize_rttm, ParseOptions};
use diarkit::selector::{select, CombinationMode};
use diarkit::sep::{si_snr, upit_loss, SampleVector};
use diarkit::strategies::{
    strategy1_balance, strategy2_overlap, strategy3_deviation, Thresholds,
};
use diarkit::timeline::{segment_decomposition, Annotation, Time, TimeInterval, Turn};

fn turn(id: &str, speaker: usize, onset: i64, dur: i64) -> Turn {
    Turn::new(
        TimeInterval::new(Time::from_centis(onset), Time::from_centis(onset + dur)).unwrap(),
        format!("spk{speaker}"),
        id,
    )
    .unwrap()
}

fn annotation_strategy(id: &'static str) -> impl Strategy<Value = Annotation> {
    prop::collection::vec((0usize..4, 0i64..1_000, 1i64..200), 0..12).prop_map(move |raw| {
        let turns = raw
            .into_iter()
            .map(|(speaker, onset, dur)| turn(id, speaker, onset, dur))
            .collect();
        Annotation::new(id, turns).unwrap()
    })
}

fn relabel(annotation: &Annotation, prefix: &str) -> Annotation {
    let turns = annotation
        .turns()
        .iter()
        .map(|t| {
            Turn::new(
                t.interval,
                format!("{prefix}{}", t.speaker),
                annotation.recording_id(),
            )
            .unwrap()
        })
        .collect();
    Annotation::new(annotation.recording_id(), turns).unwrap()
}

fn shift(annotation: &Annotation, by_cs: i64) -> Annotation {
    let turns = annotation
        .turns()
        .iter()
        .map(|t| {
            Turn::new(
                TimeInterval::new(
                    Time::from_centis(t.interval.onset().centis() + by_cs),
                    Time::from_centis(t.interval.offset().centis() + by_cs),
                )
                .unwrap(),
                t.speaker.clone(),
                annotation.recording_id(),
            )
            .unwrap()
        })
        .collect();
    Annotation::new(annotation.recording_id(), turns).unwrap()
}

fn has_cross_speaker_overlap(annotation: &Annotation) -> bool {
    let empty = Annotation::empty(annotation.recording_id());
    segment_decomposition(annotation, &empty)
        .unwrap()
        .iter()
        .any(|seg| seg.active_a.len() >= 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn union_bounded_by_speaker_sum_with_equality_iff_no_overlap(
        a in annotation_strategy("rec"),
    ) {
        let union = a.union_duration();
        let total = a.total_speaker_time();
        prop_assert!(union <= total);
        prop_assert_eq!(union == total, !has_cross_speaker_overlap(&a));
    }

    #[test]
    fn decomposition_is_disjoint_sorted_and_covers_both_supports(
        a in annotation_strategy("rec"),
        b in annotation_strategy("rec"),
    ) {
        let segments = segment_decomposition(&a, &b).unwrap();
        for pair in segments.windows(2) {
            prop_assert!(pair[0].interval.offset() <= pair[1].interval.onset());
        }
        let total: Time = segments.iter().map(|s| s.interval.duration()).sum();
        let mut support = a.support();
        support.extend(b.support());
        prop_assert_eq!(total, diarkit::timeline::union_length(&support));
        for seg in &segments {
            prop_assert!(!seg.active_a.is_empty() || !seg.active_b.is_empty());
        }
    }

    #[test]
    fn serialize_parse_round_trip_and_line_order_insensitivity(
        a in annotation_strategy("rec"),
        seed in any::<u64>(),
    ) {
        prop_assume!(!a.is_empty());
        let text = serialize_rttm([&a]);
        let parsed = parse_rttm(Cursor::new(&text), ParseOptions::default()).unwrap();
        prop_assert_eq!(&parsed.annotations["rec"], &a);

        let mut lines: Vec<&str> = text.lines().collect();
        lines.shuffle(&mut StdRng::seed_from_u64(seed));
        let shuffled = lines.join("\n");
        let reparsed = parse_rttm(Cursor::new(&shuffled), ParseOptions::default()).unwrap();
        prop_assert_eq!(&reparsed.annotations["rec"], &a);
    }

    #[test]
    fn parse_compute_serialize_is_bit_stable(a in annotation_strategy("rec")) {
        let text = serialize_rttm([&a]);
        let parsed = parse_rttm(Cursor::new(&text), ParseOptions::default()).unwrap();
        let again = serialize_rttm(parsed.annotations.values());
        prop_assert_eq!(text, again);
    }

    #[test]
    fn der_is_zero_against_itself(a in annotation_strategy("rec")) {
        let score = score_der(&a, &a).unwrap();
        if !score.degenerate {
            prop_assert_eq!(score.der, 0.0);
        }
    }

    #[test]
    fn der_is_invariant_under_bijective_relabeling(
        reference in annotation_strategy("rec"),
        hypothesis in annotation_strategy("rec"),
    ) {
        let base = score_der(&reference, &hypothesis).unwrap();
        let renamed_hyp = score_der(&reference, &relabel(&hypothesis, "zz_")).unwrap();
        let renamed_ref = score_der(&relabel(&reference, "qq_"), &hypothesis).unwrap();
        for other in [&renamed_hyp, &renamed_ref] {
            prop_assert_eq!(base.missed_speech, other.missed_speech);
            prop_assert_eq!(base.false_alarm, other.false_alarm);
            prop_assert_eq!(base.speaker_error, other.speaker_error);
            prop_assert_eq!(base.der, other.der);
        }
    }

    #[test]
    fn error_components_invariant_under_swapping_two_hypothesis_speakers(
        reference in annotation_strategy("rec"),
        hypothesis in annotation_strategy("rec"),
    ) {
        // Exchange the labels of the two lexicographically first
        // hypothesis speakers; the optimum (and each component) is
        // unchanged.
        let speakers: Vec<String> = hypothesis.speakers().iter().cloned().collect();
        prop_assume!(speakers.len() >= 2);
        let swapped_turns: Vec<Turn> = hypothesis
            .turns()
            .iter()
            .map(|t| {
                let speaker = if t.speaker == speakers[0] {
                    speakers[1].clone()
                } else if t.speaker == speakers[1] {
                    speakers[0].clone()
                } else {
                    t.speaker.clone()
                };
                Turn::new(t.interval, speaker, "rec").unwrap()
            })
            .collect();
        let swapped = Annotation::new("rec", swapped_turns).unwrap();
        let base = score_der(&reference, &hypothesis).unwrap();
        let other = score_der(&reference, &swapped).unwrap();
        prop_assert_eq!(base.missed_speech, other.missed_speech);
        prop_assert_eq!(base.false_alarm, other.false_alarm);
        prop_assert_eq!(base.speaker_error, other.speaker_error);
        prop_assert_eq!(base.der, other.der);
    }

    #[test]
    fn der_rate_identity_is_exact(
        reference in annotation_strategy("rec"),
        hypothesis in annotation_strategy("rec"),
    ) {
        let score = score_der(&reference, &hypothesis).unwrap();
        prop_assert_eq!(score.der, score.miss_rate + score.fa_rate + score.spkerr_rate);
    }

    #[test]
    fn deleting_a_correct_hypothesis_turn_increases_miss(
        reference in annotation_strategy("rec"),
        pick in any::<prop::sample::Index>(),
    ) {
        prop_assume!(!reference.is_empty());
        // Hypothesis identical to reference: all time is matched correct.
        let turns = reference.turns();
        let drop = pick.index(turns.len());
        let dropped_duration = turns[drop].interval.duration();
        let remaining: Vec<Turn> = turns
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != drop)
            .map(|(_, t)| t.clone())
            .collect();
        let hypothesis = Annotation::new(reference.recording_id(), remaining).unwrap();

        let before = score_der(&reference, &reference).unwrap();
        let after = score_der(&reference, &hypothesis).unwrap();
        prop_assert_eq!(after.missed_speech, dropped_duration);
        prop_assert!(after.missed_speech >= before.missed_speech);
        prop_assert!(after.der >= before.der);
    }

    #[test]
    fn strategy3_of_identical_results_is_zero(a in annotation_strategy("rec")) {
        prop_assume!(!a.is_empty());
        let verdict = strategy3_deviation(&a, &a, &Thresholds::default()).unwrap();
        prop_assert_eq!(verdict.statistic, Some(0.0));
        prop_assert!(!verdict.flagged_poor);
    }

    #[test]
    fn strategy_statistics_invariant_under_relabel_and_shift(
        a in annotation_strategy("rec"),
        by in 0i64..5_000,
    ) {
        let thresholds = Thresholds::default();
        let transformed = relabel(&shift(&a, by), "xx_");
        let s1 = strategy1_balance(&a, &thresholds);
        let s1t = strategy1_balance(&transformed, &thresholds);
        prop_assert_eq!(s1.statistic, s1t.statistic);
        prop_assert_eq!(s1.flagged_poor, s1t.flagged_poor);
        let s2 = strategy2_overlap(&a, &thresholds);
        let s2t = strategy2_overlap(&transformed, &thresholds);
        prop_assert_eq!(s2.statistic, s2t.statistic);
        prop_assert_eq!(s2.flagged_poor, s2t.flagged_poor);
    }

    #[test]
    fn overlap_statistic_is_bounded_by_speaker_count(a in annotation_strategy("rec")) {
        let verdict = strategy2_overlap(&a, &Thresholds::default());
        if let Some(stat) = verdict.statistic {
            let n = a.num_speakers() as f64;
            prop_assert!(stat >= 0.0);
            prop_assert!(stat <= 1.0 - 1.0 / n + 1e-12);
        }
    }

    #[test]
    fn flag_monotonicity_in_thresholds(
        a in annotation_strategy("rec"),
        b in annotation_strategy("rec"),
        th1 in 0.0f64..1.0, th1_lower in 0.0f64..1.0,
        th2 in 0.0f64..1.0, th2_higher in 0.0f64..1.0,
        th3 in 0.0f64..1.0, th3_higher in 0.0f64..1.0,
    ) {
        // Lowering th1 or raising th2/th3 never adds flags.
        let loose = Thresholds {
            th1: th1.min(th1_lower),
            th2: th2.max(th2_higher),
            th3: th3.max(th3_higher),
        };
        let tight = Thresholds { th1, th2, th3 };
        let s1_tight = strategy1_balance(&b, &tight);
        let s1_loose = strategy1_balance(&b, &loose);
        prop_assert!(!s1_loose.flagged_poor || s1_tight.flagged_poor || s1_loose.threshold > s1_tight.threshold);
        if loose.th1 <= tight.th1 && s1_loose.flagged_poor {
            prop_assert!(s1_tight.flagged_poor);
        }
        let s2_tight = strategy2_overlap(&b, &tight);
        let s2_loose = strategy2_overlap(&b, &loose);
        if s2_loose.flagged_poor {
            prop_assert!(s2_tight.flagged_poor);
        }
        let s3_tight = strategy3_deviation(&a, &b, &tight).unwrap();
        let s3_loose = strategy3_deviation(&a, &b, &loose).unwrap();
        if s3_loose.flagged_poor {
            prop_assert!(s3_tight.flagged_poor);
        }
    }

    #[test]
    fn combination_flag_set_relations_hold_on_random_corpora(
        annotations in prop::collection::vec(
            (annotation_strategy("r"), annotation_strategy("r")),
            1..4,
        ),
    ) {
        let mut csd = BTreeMap::new();
        let mut ssd = BTreeMap::new();
        for (i, (c, s)) in annotations.iter().enumerate() {
            let id = format!("r{i}");
            let fix = |a: &Annotation| {
                let turns = a.turns().iter().map(|t| {
                    Turn::new(t.interval, t.speaker.clone(), id.clone()).unwrap()
                }).collect();
                Annotation::new(id.clone(), turns).unwrap()
            };
            csd.insert(id.clone(), fix(c));
            ssd.insert(id.clone(), fix(s));
        }
        let thresholds = Thresholds::default();
        let flags = |mode| {
            select(&csd, &ssd, &thresholds, mode).unwrap().flags()
        };
        let s1 = flags(CombinationMode::S1);
        let s2 = flags(CombinationMode::S2);
        let s3 = flags(CombinationMode::S3);
        let s12 = flags(CombinationMode::S1And2);
        let vote = flags(CombinationMode::Vote);
        for id in csd.keys() {
            prop_assert_eq!(s12[id], s1[id] || s2[id]);
            prop_assert!(!vote[id] || s1[id] || s2[id] || s3[id]);
        }
    }

    #[test]
    fn si_snr_is_scale_invariant(
        samples in prop::collection::vec(-1.0f64..1.0, 8..32),
        noise in prop::collection::vec(-1.0f64..1.0, 8..32),
        alpha in prop::sample::select(vec![-3.0f64, -0.5, 0.25, 2.0, 7.5]),
        beta in prop::sample::select(vec![-2.0f64, -0.75, 0.5, 3.0, 10.0]),
    ) {
        let n = samples.len().min(noise.len());
        let target = SampleVector::new(samples[..n].to_vec(), 16_000);
        let estimate = SampleVector::new(
            samples[..n].iter().zip(&noise[..n]).map(|(s, e)| s + 0.3 * e).collect(),
            16_000,
        );
        let (Ok(target), Ok(estimate)) = (target, estimate) else { return Ok(()); };
        let Ok(base) = si_snr(&estimate, &target) else { return Ok(()); };
        prop_assume!(base.is_finite());
        let scaled_estimate = SampleVector::new(
            estimate.samples().iter().map(|x| alpha * x).collect(), 16_000).unwrap();
        let scaled_target = SampleVector::new(
            target.samples().iter().map(|x| beta * x).collect(), 16_000).unwrap();
        let a = si_snr(&scaled_estimate, &target).unwrap();
        let b = si_snr(&estimate, &scaled_target).unwrap();
        prop_assert!((a - base).abs() < 1e-6, "{} vs {}", a, base);
        prop_assert!((b - base).abs() < 1e-6, "{} vs {}", b, base);
    }

    #[test]
    fn upit_loss_invariant_under_reference_permutation(
        raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 16), 2..5),
        seed in any::<u64>(),
    ) {
        let sources: Vec<SampleVector> = raw
            .iter()
            .map(|s| SampleVector::new(s.clone(), 8_000))
            .collect::<Result<_, _>>()
            .unwrap();
        // Estimates: noisy versions of the sources.
        let estimates: Vec<SampleVector> = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                SampleVector::new(
                    s.samples().iter().map(|x| x * 0.9 + 0.01 * (i as f64 + 1.0)).collect(),
                    8_000,
                )
                .unwrap()
            })
            .collect();
        let Ok(base) = upit_loss(&estimates, &sources) else { return Ok(()); };

        let mut permuted = sources.clone();
        permuted.shuffle(&mut StdRng::seed_from_u64(seed));
        let Ok(shuffled) = upit_loss(&estimates, &permuted) else { return Ok(()); };
        if base.loss.is_finite() {
            prop_assert!((base.loss - shuffled.loss).abs() < 1e-9);
        } else {
            prop_assert_eq!(base.loss, shuffled.loss);
        }

        // Identical simultaneous permutation of both lists.
        let mut order: Vec<usize> = (0..sources.len()).collect();
        order.shuffle(&mut StdRng::seed_from_u64(seed ^ 0x5a5a));
        let est2: Vec<SampleVector> = order.iter().map(|&i| estimates[i].clone()).collect();
        let ref2: Vec<SampleVector> = order.iter().map(|&i| sources[i].clone()).collect();
        let Ok(both) = upit_loss(&est2, &ref2) else { return Ok(()); };
        if base.loss.is_finite() {
            prop_assert!((base.loss - both.loss).abs() < 1e-9);
        } else {
            prop_assert_eq!(base.loss, both.loss);
        }
    }
}

#[test]
fn stronger_orthogonal_noise_strictly_decreases_si_snr() {
    let target = SampleVector::new(vec![1.0, 1.0, 1.0, 1.0], 16_000).unwrap();
    let noise = [0.5, -0.5, 0.5, -0.5];
    let mut previous = f64::INFINITY;
    for level in [0.1f64, 0.2, 0.4, 0.8] {
        let estimate = SampleVector::new(
            target
                .samples()
                .iter()
                .zip(&noise)
                .map(|(s, n)| s + level * n)
                .collect(),
            16_000,
        )
        .unwrap();
        let value = si_snr(&estimate, &target).unwrap();
        assert!(value < previous, "level {level}: {value} !< {previous}");
        previous = value;
    }
}

#[test]
fn detection_metrics_do_not_depend_on_recording_order() {
    use diarkit::selector::evaluate_detection;

    let mut reference = BTreeMap::new();
    let mut csd = BTreeMap::new();
    let mut ssd = BTreeMap::new();
    let mut flags = BTreeMap::new();
    let ids = ["c", "a", "b", "e", "d"];
    for (i, id) in ids.iter().enumerate() {
        let make = |spk: &str, end: f64| {
            Annotation::new(
                *id,
                vec![Turn::new(TimeInterval::from_secs(0.0, end).unwrap(), spk, *id).unwrap()],
            )
            .unwrap()
        };
        reference.insert(id.to_string(), make("A", 10.0));
        csd.insert(id.to_string(), make("c", 9.0));
        ssd.insert(id.to_string(), make("s", if i % 2 == 0 { 10.0 } else { 5.0 }));
        flags.insert(id.to_string(), i % 3 == 0);
    }
    let forward = evaluate_detection(&flags, &csd, &ssd, &reference).unwrap();

    // Rebuild the maps inserting in reverse; BTreeMap iteration order is
    // canonical either way, so results must be identical.
    let reversed: BTreeMap<String, bool> =
        flags.iter().rev().map(|(k, v)| (k.clone(), *v)).collect();
    let backward = evaluate_detection(&reversed, &csd, &ssd, &reference).unwrap();
    assert_eq!(forward.true_positives, backward.true_positives);
    assert_eq!(forward.false_positives, backward.false_positives);
    assert_eq!(forward.recall, backward.recall);
    assert_eq!(forward.precision, backward.precision);
    assert_eq!(forward.accuracy, backward.accuracy);
}
