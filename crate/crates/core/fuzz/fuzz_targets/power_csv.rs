#![no_main]

use hvac_disagg::ingest::{build_day_matrix, read_series, DuplicatePolicy, SeriesKind};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for policy in [DuplicatePolicy::Reject, DuplicatePolicy::FirstWins] {
        let Ok(ts) = read_series(data, SeriesKind::Power, policy) else {
            continue;
        };
        assert!(ts.iter().all(|(_, v)| v.is_finite()));
        if let Ok((m, _)) = build_day_matrix(&ts, 0.05) {
            assert_eq!(m.samples().nrows(), 96);
        }
    }
});
