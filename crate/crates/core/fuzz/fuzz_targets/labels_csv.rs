#![no_main]

use hvac_disagg::preprocess::{read_labels_csv, write_labels_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = read_labels_csv(data) {
        let mut buf = Vec::new();
        write_labels_csv(&labels, &mut buf).expect("writes");
        assert_eq!(read_labels_csv(buf.as_slice()).expect("reparses"), labels);
    }
});
