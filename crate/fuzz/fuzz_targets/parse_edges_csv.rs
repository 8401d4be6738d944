#![no_main]

use libfuzzer_sys::fuzz_target;

// Input: nodes CSV and edges CSV separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = rdsmdr::io::parse_edges_csv(text);
    if let Some((nodes, edges)) = text.split_once('\0') {
        let _ = rdsmdr::io::read_population(nodes, edges);
    }
});
