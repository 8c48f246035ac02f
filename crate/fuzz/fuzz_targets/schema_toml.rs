#![no_main]

use flowsynth::schema_codec::FeatureSchema;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = FeatureSchema::from_toml_str(text);
    }
});
