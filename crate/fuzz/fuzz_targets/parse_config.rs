#![no_main]
use libfuzzer_sys::fuzz_target;
use mlirl::harness::{parse_config_text, ExperimentConfig};

fuzz_target!(|text: &str| {
    if let Ok(raw) = parse_config_text(text) {
        let _ = ExperimentConfig::resolve(&raw);
    }
});
