use landsig_core::ingest::{parse_dataset_text, read_store, write_store, EventStore, SourceFormat};
use landsig_core::GeoEvent;
use proptest::prelude::*;

fn event() -> impl Strategy<Value = GeoEvent> {
    (
        -90.0f64..=90.0,
        -180.0f64..=180.0,
        0i64..4_000_000_000,
        "[a-z0-9]{1,8}",
    )
        .prop_map(|(lat, lon, ts, user)| GeoEvent {
            lat,
            lon,
            timestamp_utc: ts,
            user_id: user,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn store_round_trip_is_bit_identical(events in prop::collection::vec(event(), 1..200)) {
        let store = EventStore::from_events(&events);
        let again = EventStore::from_bytes(&store.to_bytes()).unwrap();
        let back: Vec<GeoEvent> = again.events().collect();
        prop_assert_eq!(back.len(), events.len());
        for (a, b) in back.iter().zip(&events) {
            prop_assert_eq!(a.lat.to_bits(), b.lat.to_bits());
            prop_assert_eq!(a.lon.to_bits(), b.lon.to_bits());
            prop_assert_eq!(a.timestamp_utc, b.timestamp_utc);
            prop_assert_eq!(&a.user_id, &b.user_id);
        }
    }

    /// Every line is accepted, skipped or counted malformed, and everything
    /// accepted satisfies the event invariants.
    #[test]
    fn ingest_accounting_holds_for_junk(lines in prop::collection::vec(
        prop_oneof![
            "[ -~]{0,40}",
            (-100.0f64..100.0, -200.0f64..200.0, -10i64..2_000_000_000).prop_map(|(a, b, t)| format!("{a},{b},{t},u")),
            Just(",,5,u".to_string()),
        ],
        1..80,
    )) {
        let text = format!("lat,lon,ts,user\n{}\n", lines.join("\n"));
        match parse_dataset_text(&text, SourceFormat::Csv, "fuzz".into(), 0) {
            Ok(ds) => {
                let s = &ds.stats;
                prop_assert_eq!(s.accepted + s.skipped + s.malformed, s.total_lines);
                prop_assert_eq!(ds.manifest.record_count, s.accepted);
                for e in ds.store.events() {
                    prop_assert!((-90.0..=90.0).contains(&e.lat));
                    prop_assert!((-180.0..=180.0).contains(&e.lon));
                    prop_assert!(e.timestamp_utc >= 0);
                }
            }
            Err(landsig_core::Error::EmptyDataset) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}

#[test]
fn store_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let text = "lat,lon,ts,user\n-27.47,153.02,1433129400,a\n-27.46,153.03,1433129500,b\n-27.46,153.03,1433129500,b\n";
    let ds = parse_dataset_text(text, SourceFormat::Csv, "bne".into(), 600).unwrap();
    write_store(dir.path(), &ds.store, &ds.manifest).unwrap();
    let (store, manifest) = read_store(dir.path()).unwrap();
    assert_eq!(store, ds.store);
    assert_eq!(manifest, ds.manifest);
    // Duplicates are kept.
    assert_eq!(manifest.record_count, 3);
    assert_eq!(manifest.unique_users, 2);
}

#[test]
fn ndjson_file_with_missing_geotags() {
    let mut text = String::new();
    for i in 0..100 {
        if i % 5 < 2 {
            text.push_str(&format!(
                "{{\"timestamp_ms\":\"{}000\",\"coordinates\":null,\"user\":{{\"id\":{i}}}}}\n",
                1_433_129_400 + i
            ));
        } else {
            text.push_str(&format!(
                "{{\"timestamp_ms\":\"{}000\",\"coordinates\":{{\"type\":\"Point\",\"coordinates\":[153.02,-27.47]}},\"user\":{{\"id\":{i}}}}}\n",
                1_433_129_400 + i
            ));
        }
    }
    let ds = parse_dataset_text(&text, SourceFormat::TweetJsonNdjson, "bne".into(), 600).unwrap();
    assert_eq!(ds.manifest.record_count, 60);
    assert_eq!(ds.stats.skipped, 40);
    assert_eq!(ds.manifest.source_format, SourceFormat::TweetJsonNdjson);
}
