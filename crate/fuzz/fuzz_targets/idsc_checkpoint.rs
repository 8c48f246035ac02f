#![no_main]

use flowsynth::ids_zoo::Classifier;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = Classifier::from_bytes(data);
});
