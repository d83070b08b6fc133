#![no_main]

use hvac_disagg::ingest::{build_temperature_matrix, read_series, DuplicatePolicy, SeriesKind};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for policy in [DuplicatePolicy::Reject, DuplicatePolicy::FirstWins] {
        let Ok(ts) = read_series(data, SeriesKind::Temperature, policy) else {
            continue;
        };
        assert!(ts.iter().all(|(_, v)| v.is_finite()));
        let mut dates: Vec<_> = ts.iter().map(|(t, _)| t.date()).collect();
        dates.dedup();
        if let Ok(m) = build_temperature_matrix(&ts, &dates) {
            assert!(m.temps().iter().all(|v| v.is_finite()));
        }
    }
});
