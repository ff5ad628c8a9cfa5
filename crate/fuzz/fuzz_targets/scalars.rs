#![no_main]

// Extended reals, subgradient policies and parameter tuples share the
// same small text surface, so one target covers all three.

use dcacert::{classify_any, DcParams, ExtReal, SubgradPolicy};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Some(v) = text.parse::<ExtReal>().ok().filter(|v| !v.value().is_nan()) {
        let shown = v.to_string();
        assert_eq!(shown.parse::<ExtReal>().ok(), Some(v), "{shown}");
    }
    let _ = text.parse::<SubgradPolicy>();
    if let Ok(p) = serde_json::from_str::<DcParams>(text) {
        let _ = classify_any(&p);
    }
});
