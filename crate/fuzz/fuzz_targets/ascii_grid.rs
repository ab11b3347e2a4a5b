#![no_main]
use libfuzzer_sys::fuzz_target;
use marsris::terrain::{load_ascii_grid, write_ascii_grid};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(hf) = load_ascii_grid(text) {
            let again = load_ascii_grid(&write_ascii_grid(&hf)).expect("exported grid reparses");
            assert_eq!(again, hf);
        }
    }
});
