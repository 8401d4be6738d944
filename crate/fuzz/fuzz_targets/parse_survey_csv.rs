#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(raw) = rdsmdr::io::parse_survey_csv(text) {
        let mut rng = rdsmdr::rng::from_seed(0);
        let _ = rdsmdr::harness::ingest(&raw, &rdsmdr::harness::IngestOptions::default(), &mut rng);
    }
});
