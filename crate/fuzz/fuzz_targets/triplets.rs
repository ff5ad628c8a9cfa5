#![no_main]

use dcacert::interpolation::parse_triplets;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_triplets(text);
});
