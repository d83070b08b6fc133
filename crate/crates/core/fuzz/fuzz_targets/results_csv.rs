#![no_main]

use hvac_disagg::commands::{read_results_csv, write_results_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(days) = read_results_csv(data) {
        let mut buf = Vec::new();
        write_results_csv(&days, &mut buf).expect("writes");
        assert_eq!(read_results_csv(buf.as_slice()).expect("reparses"), days);
    }
});
