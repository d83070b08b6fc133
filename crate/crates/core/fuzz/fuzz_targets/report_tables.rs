#![no_main]

use hvac_disagg::eval::{read_fig6_csv, read_fig8_csv, read_table1_csv, read_table2_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_table1_csv(data);
    let _ = read_table2_csv(data);
    if let Ok(methods) = read_fig6_csv(data) {
        assert!(methods.iter().all(|(_, h)| h.len() == 24));
    }
    let _ = read_fig8_csv(data);
});
