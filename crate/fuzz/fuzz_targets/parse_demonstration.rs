#![no_main]
use libfuzzer_sys::fuzz_target;
use mlirl::demo::{parse_demonstration, write_demonstration};

fuzz_target!(|text: &str| {
    if let Ok(demo) = parse_demonstration(text) {
        assert_eq!(parse_demonstration(&write_demonstration(&demo)).unwrap(), demo);
    }
});
