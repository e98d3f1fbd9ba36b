//! Checked-in fuzz seeds stay valid inputs for their parsers.

use std::fs;
use std::path::Path;

use mlirl::demo::parse_demonstration;
use mlirl::env::parse_bundle;
use mlirl::harness::{parse_config_text, parse_metrics_csv, parse_summary_csv};

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(dir).unwrap().map(|e| fs::read(e.unwrap().path()).unwrap()).collect();
    assert!(!out.is_empty(), "no seeds for {target}");
    out.sort();
    out
}

fn text(b: &[u8]) -> &str {
    std::str::from_utf8(b).unwrap()
}

#[test]
fn seeds_parse() {
    for s in seeds("parse_bundle") {
        parse_bundle(text(&s)).unwrap();
    }
    for s in seeds("parse_demonstration") {
        parse_demonstration(text(&s)).unwrap();
    }
    for s in seeds("parse_config") {
        parse_config_text(text(&s)).unwrap();
    }
    for s in seeds("parse_metrics_csv") {
        let (which, rest) = s.split_first().unwrap();
        if which & 1 == 0 {
            parse_metrics_csv(text(rest)).unwrap();
        } else {
            parse_summary_csv(text(rest)).unwrap();
        }
    }
}
