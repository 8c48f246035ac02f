#![no_main]

use flowsynth::schema_codec::EncodedDataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = EncodedDataset::from_bytes(data) {
        let again = EncodedDataset::from_bytes(&ds.to_bytes()).expect("re-encoded container parses");
        assert_eq!(again.to_bytes(), ds.to_bytes());
    }
    let _ = EncodedDataset::from_bytes_with_generators(data);
});
