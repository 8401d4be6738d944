#![no_main]

use libfuzzer_sys::fuzz_target;

// Input: members CSV, optionally followed by a NUL byte and the alters CSV.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match text.split_once('\0') {
        Some((members, alters)) => {
            let _ = rdsmdr::io::parse_sample_csv(members, Some(alters));
        }
        None => {
            let _ = rdsmdr::io::parse_sample_csv(text, None);
        }
    }
});
