#![no_main]

use dcacert::regimes::GridSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(g) = text.parse::<GridSpec>() {
        let nodes = g.nodes();
        assert!(nodes.iter().all(|v| v.is_finite()));
    }
});
