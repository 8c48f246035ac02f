#![no_main]

use flowsynth::eval_metrics::EvalReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = EvalReport::from_json(text) {
            let _ = r.to_table();
        }
    }
});
