#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = covsearch::config::RunConfig::from_toml_str(text, std::path::Path::new("."), &[]);
    }
});
