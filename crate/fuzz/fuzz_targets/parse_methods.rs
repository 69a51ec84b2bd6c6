#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_risk::harness::{parse_methods, Method};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(methods) = parse_methods(text) {
            assert!(!methods.is_empty() && methods.len() <= Method::ALL.len());
        }
    }
});
