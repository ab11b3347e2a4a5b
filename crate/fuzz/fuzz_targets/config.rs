#![no_main]
use std::path::Path;

use libfuzzer_sys::fuzz_target;
use marsris::config::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Parsing only: building would generate terrain and read files.
        if let Ok(cfg) = ScenarioConfig::parse(text, Path::new(".")) {
            let again = ScenarioConfig::parse(&cfg.to_text(), Path::new(".")).expect("serialized config reparses");
            assert_eq!(again.to_text(), cfg.to_text());
        }
    }
});
