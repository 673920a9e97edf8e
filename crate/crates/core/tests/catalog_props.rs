use chrono::{DateTime, TimeZone, Utc};
use proptest::prelude::*;

use npcluster::catalog::{
    filter_by, filter_catalog, read_catalog, ColumnMap, Event, EventCatalog, RowPolicy, SelectionWindow,
};

fn event(id: u64) -> impl Strategy<Value = Event> {
    (
        -80.0..-60.0f64,
        -45.0..-25.0f64,
        proptest::option::of(0.0..70.0f64),
        (15i32..80).prop_map(|m| f64::from(m) / 10.0),
        0i64..10_000_000_000,
    )
        .prop_map(move |(lon, lat, depth, magnitude, ms)| Event {
            id,
            lon,
            lat,
            depth,
            magnitude,
            time: Utc.timestamp_millis_opt(1_267_000_000_000 + ms).unwrap(),
        })
}

fn catalog() -> impl Strategy<Value = EventCatalog> {
    (0usize..40)
        .prop_flat_map(|n| (0..n as u64).map(event).collect::<Vec<_>>())
        .prop_map(|events| EventCatalog::new(events, "generated").unwrap())
}

fn time(offset: i64) -> DateTime<Utc> {
    Utc.timestamp_millis_opt(1_267_000_000_000 + offset).unwrap()
}

fn window() -> impl Strategy<Value = SelectionWindow> {
    (
        (-80.0..-60.0f64, 0.5..20.0f64),
        (-45.0..-25.0f64, 0.5..20.0f64),
        1.0..8.0f64,
        proptest::option::of((0i64..5_000_000_000, 1i64..5_000_000_000)),
    )
        .prop_map(|((lon, w), (lat, h), mag_min, t)| SelectionWindow {
            lon_min: lon,
            lon_max: lon + w,
            lat_min: lat,
            lat_max: lat + h,
            mag_min,
            t_start: t.map(|(a, _)| time(a)),
            t_end: t.map(|(a, d)| time(a + d)),
        })
}

proptest! {
    #[test]
    fn filtering_is_idempotent(cat in catalog(), w in window()) {
        let once = filter_catalog(&cat, &w).unwrap();
        let twice = filter_catalog(&once, &w).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn filter_and_complement_partition_the_catalog(cat in catalog(), w in window()) {
        let inside = filter_catalog(&cat, &w).unwrap();
        let outside = filter_by(&cat, |e| !w.contains(e));
        prop_assert_eq!(inside.len() + outside.len(), cat.len());
        let ids: Vec<u64> = inside.events.iter().map(|e| e.id).collect();
        prop_assert!(ids.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn csv_round_trip_preserves_events(cat in catalog()) {
        let mut buf = Vec::new();
        cat.write_csv(&mut buf).unwrap();
        let back = read_catalog(buf.as_slice(), &ColumnMap::default(), RowPolicy::Fail).unwrap();
        prop_assert!(back.rejected.is_empty());
        prop_assert_eq!(back.catalog.events, cat.events);
    }
}
