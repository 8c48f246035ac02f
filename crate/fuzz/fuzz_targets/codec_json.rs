#![no_main]

use flowsynth::schema_codec::Codec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(codec) = Codec::from_json(text) {
            let back = Codec::from_json(&codec.to_json()).expect("re-serialized codec parses");
            assert_eq!(back.to_json(), codec.to_json());
        }
    }
});
