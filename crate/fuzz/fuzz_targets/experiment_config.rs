#![no_main]

use hjcone_lab::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_json_str(text) {
        let canonical = cfg.to_canonical_json();
        let again = ExperimentConfig::from_json_str(&canonical).expect("canonical form parses");
        assert_eq!(again.to_canonical_json(), canonical);
        assert_eq!(again.content_hash(), cfg.content_hash());
    }
});
