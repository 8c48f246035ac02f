#![no_main]

use flowsynth::models::{Checkpoint, GMAC_MAGIC};
use flowsynth::synthesis::ClassGenerator;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = Checkpoint::from_bytes(data, &GMAC_MAGIC);
    let _ = ClassGenerator::from_bytes(data);
});
