#![no_main]
use libfuzzer_sys::fuzz_target;
use mlirl::env::{parse_bundle, write_bundle};

fuzz_target!(|text: &str| {
    if let Ok(bundle) = parse_bundle(text) {
        let again = parse_bundle(&write_bundle(&bundle)).expect("written bundle must parse");
        assert_eq!(again, bundle);
    }
});
