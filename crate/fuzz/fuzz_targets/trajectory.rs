#![no_main]

use dcacert::engine::Trajectory;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = Trajectory::from_json(text) {
            let _ = t.to_csv();
        }
    }
});
