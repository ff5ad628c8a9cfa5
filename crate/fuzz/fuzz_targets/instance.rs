#![no_main]

use dcacert::DcInstance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(inst) = DcInstance::from_json(text) else { return };
    // anything accepted must survive a round trip
    let again = serde_json::to_string(&inst).unwrap();
    DcInstance::from_json(&again).expect("re-parse of accepted instance");
});
