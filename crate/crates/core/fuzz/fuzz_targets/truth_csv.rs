#![no_main]

use hvac_disagg::ingest::{build_day_matrix, read_series, DuplicatePolicy, SeriesKind};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for policy in [DuplicatePolicy::Reject, DuplicatePolicy::FirstWins] {
        let Ok(ts) = read_series(data, SeriesKind::HvacTruth, policy) else {
            continue;
        };
        assert!(ts.iter().all(|(_, v)| v.is_finite()));
        let _ = build_day_matrix(&ts, 1.0);
    }
});
