#![no_main]

use hvac_disagg::config::PipelineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = PipelineConfig::from_toml_str(text) {
        let again = PipelineConfig::from_toml_str(&cfg.to_toml()).expect("serialized config reparses");
        assert_eq!(again.to_toml(), cfg.to_toml());
    }
});
