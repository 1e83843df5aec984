use proptest::prelude::*;
use qoekit_core::quality::{
    parse_scores_document, score, score_surrogate, AudioCodec, QualityError, ScorerConfig, ScoringInput,
};
use qoekit_core::stall::{DetectionMethod, StallEvent, StallReport};
use qoekit_core::SegmentMedia;

fn arb_media() -> impl Strategy<Value = Vec<SegmentMedia>> {
    prop::collection::vec(
        (
            1.0f64..20_000.0,
            16u32..3840,
            16u32..2160,
            1.0f64..120.0,
            0.5f64..15.0,
            prop_oneof![
                Just(AudioCodec::AacLc),
                Just(AudioCodec::HeAac),
                Just(AudioCodec::Mp2),
                Just(AudioCodec::Ac3)
            ],
        )
            .prop_map(|(kbps, w, h, fps, dur, audio)| SegmentMedia {
                audio_codec: audio,
                ..SegmentMedia::h264(kbps, w, h, fps, dur)
            }),
        1..20,
    )
}

fn arb_stalls() -> impl Strategy<Value = StallReport> {
    prop::collection::vec((1u64..30_000, 1u64..60_000), 0..10).prop_map(|raw| {
        let mut at = 0;
        let events = raw
            .into_iter()
            .map(|(gap, d)| {
                at += gap;
                StallEvent {
                    start_ms: at,
                    duration_ms: d,
                }
            })
            .collect();
        StallReport::new(events, DetectionMethod::Timeline)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn every_score_stays_in_range(media in arb_media(), stalls in arb_stalls()) {
        let q = score_surrogate(&media, &stalls).unwrap();
        for (key, v) in q.iter_scores() {
            prop_assert!((1.0..=5.0).contains(&v), "{key} = {v}");
        }
    }

    #[test]
    fn no_stalls_means_perfect_stall_score(media in arb_media()) {
        let q = score_surrogate(&media, &StallReport::empty(DetectionMethod::Timeline)).unwrap();
        prop_assert_eq!(q.o23, 5.0);
    }

    #[test]
    fn more_stalling_never_helps(media in arb_media(), stalls in arb_stalls(), extra in 1u64..30_000) {
        let mut worse = stalls.clone();
        worse.events.push(StallEvent {
            start_ms: worse.events.last().map_or(0, |e| e.start_ms) + 1,
            duration_ms: extra,
        });
        let worse = StallReport::new(worse.events, DetectionMethod::Timeline);
        let a = score_surrogate(&media, &stalls).unwrap();
        let b = score_surrogate(&media, &worse).unwrap();
        prop_assert!(b.o23 <= a.o23);
        prop_assert!(b.o46 <= a.o46);
    }

    #[test]
    fn more_bitrate_never_hurts(media in arb_media(), stalls in arb_stalls(), factor in 1.0f64..4.0) {
        let richer: Vec<SegmentMedia> = media
            .iter()
            .map(|m| SegmentMedia { bitrate_kbps: m.bitrate_kbps * factor, ..m.clone() })
            .collect();
        let a = score_surrogate(&media, &stalls).unwrap();
        let b = score_surrogate(&richer, &stalls).unwrap();
        prop_assert!(b.o35 >= a.o35);
        prop_assert!(b.o46 >= a.o46);
    }
}

#[test]
fn per_second_lists_cover_the_session() {
    let media = vec![SegmentMedia::h264(800.0, 1280, 720, 30.0, 4.0); 3];
    let q = score_surrogate(&media, &StallReport::empty(DetectionMethod::Timeline)).unwrap();
    assert_eq!(q.o21.len(), 12);
    assert_eq!(q.o22.len(), 12);
    assert_eq!(q.o34.len(), 12);
}

#[test]
fn invalid_media_is_rejected() {
    let media = vec![SegmentMedia::h264(0.0, 640, 360, 25.0, 4.0)];
    let stalls = StallReport::empty(DetectionMethod::Timeline);
    let err = score(
        &ScorerConfig::default(),
        ScoringInput::Media {
            segments: &media,
            stalls: &stalls,
        },
    )
    .unwrap_err();
    assert!(matches!(err, QualityError::InvalidMedia(_)));
}

#[test]
fn external_output_with_comments_parses() {
    let text = r#"{
        // produced by the reference implementation
        "session-1.json": {
            "O23": 5.0, "O34": [4.6, 4.7], "O35": 4.63, "O46": 4.92,
            "mode": 0, "streamId": 42, "O21": [4.5, 4.5], "O22": [4.6, 4.8]
        }
    }"#;
    let parsed = parse_scores_document(text).unwrap();
    assert_eq!(parsed.len(), 1);
    let q = &parsed[0].1;
    assert_eq!(q.o46, 4.92);
    assert_eq!(q.stream_id, 42);
}

#[test]
fn external_score_out_of_range_is_rejected() {
    let text = r#"{"s": {"O23": 5.0, "O34": [], "O35": 4.6, "O46": 5.4, "mode": 0, "O21": [], "O22": []}}"#;
    assert!(matches!(
        parse_scores_document(text),
        Err(QualityError::ScoreOutOfRange { .. })
    ));
}
