#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_risk::harness::{read_results, write_results};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_results(data) {
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).expect("rows read back must serialize");
        let again = read_results(buf.as_slice()).expect("serialized rows must parse");
        assert_eq!(again.len(), rows.len());
    }
});
