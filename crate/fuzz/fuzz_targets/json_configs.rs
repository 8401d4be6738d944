#![no_main]

use libfuzzer_sys::fuzz_target;
use rdsmdr::bootstrap::BootstrapConfig;
use rdsmdr::harness::{IngestOptions, ScenarioConfig};
use rdsmdr::io::from_json;
use rdsmdr::netgen::PopulationRecipe;
use rdsmdr::recruitment::RecruitmentModel;
use rdsmdr::sampler::SamplingDesign;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = from_json::<ScenarioConfig>(text) {
        let _ = c.validate();
    }
    if let Ok(c) = from_json::<BootstrapConfig>(text) {
        let _ = c.validate();
    }
    if let Ok(d) = from_json::<SamplingDesign>(text) {
        let _ = d.validate();
    }
    let _ = from_json::<RecruitmentModel>(text);
    let _ = from_json::<PopulationRecipe>(text);
    let _ = from_json::<IngestOptions>(text);
});
