use std::path::PathBuf;

use proptest::prelude::*;
use qoekit_core::dataset::{clean, decode_mos, encode_mos, load_csv, read_csv, write_csv, DatasetError, RowPolicy};
use qoekit_core::SessionRecord;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn table_rows_round_trip_byte_for_byte() {
    let text = std::fs::read_to_string(fixture("table2.csv")).unwrap();
    let report = read_csv(text.as_bytes(), RowPolicy::Fatal).unwrap();
    assert_eq!(report.records.len(), 15);
    assert_eq!(report.records[0].mos(), 2.42);
    assert_eq!(report.records[6].mos(), 4.59);
    assert_eq!(report.records[3].stalling, "3 - 20 | 7 - 10");
    let mut out = Vec::new();
    write_csv(&mut out, &report.records, &report.extra_columns).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), text);
}

#[test]
fn cleaning_fixture_counts() {
    let loaded = load_csv(&fixture("cleaning_100.csv"), RowPolicy::Fatal).unwrap();
    assert_eq!(loaded.records.len(), 100);
    let cleaned = clean(&loaded.records);
    let p = cleaned.provenance;
    assert_eq!(p.loaded, 100);
    assert_eq!(p.dropped_delay, 7);
    assert_eq!(p.dropped_bitrate, 3);
    assert_eq!(p.jitter_adjusted, 5);
    assert_eq!(p.retained(), 90);
    assert_eq!(cleaned.records.len(), 90);
    assert!(cleaned
        .records
        .iter()
        .all(|r| r.delay_ms != 0 && r.delay_ms != -1000 && r.bitrate_kbps != 0 && r.jitter_ms != 0 && r.jitter_ms != -1000));
}

#[test]
fn table_encodings() {
    assert_eq!(encode_mos(2.42).unwrap(), 242);
    assert_eq!(encode_mos(4.59).unwrap(), 459);
    assert_eq!(decode_mos(242).unwrap(), 2.42);
    assert_eq!(decode_mos(459).unwrap(), 4.59);
    assert!(matches!(encode_mos(5.2), Err(DatasetError::OutOfRange { .. })));
}

#[test]
fn aliases_and_extra_columns() {
    let text = "avg_bitrate,delay_qos,mos,loss,jitter,throughput,rebuffering,buffering,framerate,duration,stalling,vheight,vwidth,startup_time,site\n\
                310,66,242,1000,43,28680,4580,1780,3404,50000,6 - 10,360,640,920,a\n";
    let r = read_csv(text.as_bytes(), RowPolicy::Fatal).unwrap();
    assert_eq!(r.records[0].bitrate_kbps, 310);
    assert_eq!(r.records[0].delay_ms, 66);
    assert_eq!(r.records[0].startup_ms, 920);
    assert_eq!(r.extra_columns, vec!["site".to_string()]);
    assert_eq!(r.records[0].extra_value("site"), Some("a"));
}

#[test]
fn missing_column_is_reported() {
    let text = "mos,loss\n242,0\n";
    match read_csv(text.as_bytes(), RowPolicy::Fatal) {
        Err(DatasetError::HeaderMismatch { missing }) => assert!(missing.contains(&"jitter".to_string())),
        other => panic!("{other:?}"),
    }
}

#[test]
fn bad_row_is_fatal_or_skipped() {
    let text = std::fs::read_to_string(fixture("table2.csv")).unwrap();
    let broken = text.replacen("191,0,83", "191,zero,83", 1);
    assert!(matches!(
        read_csv(broken.as_bytes(), RowPolicy::Fatal),
        Err(DatasetError::RowParseError { line: 3, .. })
    ));
    let r = read_csv(broken.as_bytes(), RowPolicy::Skip).unwrap();
    assert_eq!(r.records.len(), 14);
    assert_eq!(r.skipped.len(), 1);
}

fn arb_record() -> impl Strategy<Value = SessionRecord> {
    (
        100i64..=500,
        prop_oneof![Just(0i64), Just(-1000i64), 1i64..300],
        prop_oneof![Just(0i64), Just(-1000i64), 1i64..500],
        prop_oneof![Just(0i64), 150i64..900],
        0i64..10_000,
    )
        .prop_map(|(mos, jitter, delay, bitrate, loss)| SessionRecord {
            mos_x100: mos,
            loss_x100: loss,
            jitter_ms: jitter,
            delay_ms: delay,
            bitrate_kbps: bitrate,
            throughput_bps: 40_000,
            rebuffering_ms: 0,
            buffering_ms: 1_000,
            framerate_x100: 3_000,
            duration_ms: 40_000,
            stalling: "0 - 0".into(),
            vheight: 360,
            vwidth: 640,
            startup_ms: 900,
            extra: Vec::new(),
        })
}

proptest! {
    #[test]
    fn cleaning_is_idempotent(records in prop::collection::vec(arb_record(), 0..60)) {
        let once = clean(&records);
        let twice = clean(&once.records);
        prop_assert_eq!(&twice.records, &once.records);
        prop_assert_eq!(twice.provenance.retained(), once.provenance.retained());
        prop_assert_eq!(twice.provenance.jitter_adjusted, 0);
        let p = once.provenance;
        prop_assert_eq!(p.loaded, p.retained() + p.dropped_delay + p.dropped_bitrate);
    }

    #[test]
    fn mos_encoding_round_trips(x in 100i64..=500) {
        prop_assert_eq!(encode_mos(decode_mos(x).unwrap()).unwrap(), x);
    }
}
