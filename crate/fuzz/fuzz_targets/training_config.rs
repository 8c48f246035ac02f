#![no_main]

use flowsynth::gan_training::TrainingConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = TrainingConfig::from_toml_str(text) {
            let _ = cfg.validate();
        }
        let _ = TrainingConfig::from_json(text);
    }
});
