#![no_main]

use flowsynth::schema_codec::{read_flow_table, Codec, FeatureSchema, SplitTag};
use libfuzzer_sys::fuzz_target;

const SCHEMA: &str = r#"
[[field]]
name = "bytes"
kind = "continuous"

[[field]]
name = "proto"
kind = "discrete"

[[field]]
name = "duration"
kind = "continuous"

[[field]]
name = "label"
kind = "discrete"
role = "label"
"#;

fuzz_target!(|data: &[u8]| {
    let schema = FeatureSchema::from_toml_str(SCHEMA).unwrap();
    if let Ok(raw) = read_flow_table(data, &schema, SplitTag::Train) {
        // whatever parses must also fit and encode without panicking
        if let Ok(codec) = Codec::fit(&raw, &schema) {
            let _ = codec.encode(&raw);
        }
    }
});
