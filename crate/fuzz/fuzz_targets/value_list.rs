#![no_main]

use libfuzzer_sys::fuzz_target;
use stopgame::cli::parse_value_list;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(values) = parse_value_list(text) {
        assert!(!values.is_empty());
        assert!(values.iter().all(|v| v.is_finite()));
        assert_eq!(values.len(), text.trim().split(',').count());
    }
});
