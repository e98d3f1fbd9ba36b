#![no_main]
use libfuzzer_sys::fuzz_target;
use mlirl::harness::output::{format_iterations_csv, format_summary_csv};
use mlirl::harness::{parse_metrics_csv, parse_summary_csv};

// Both CSV readers; the first byte picks which.
fuzz_target!(|data: &[u8]| {
    let Some((&which, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    if which & 1 == 0 {
        if let Ok(rows) = parse_metrics_csv(text) {
            let again = parse_metrics_csv(&format_iterations_csv(&rows)).unwrap();
            assert_eq!(again.len(), rows.len());
        }
    } else if let Ok(rows) = parse_summary_csv(text) {
        let again = parse_summary_csv(&format_summary_csv(&rows)).unwrap();
        assert_eq!(again.len(), rows.len());
    }
});
