#![no_main]

use glp_ksample::sim::{generate, ScenarioSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = ScenarioSpec::from_json(text) else {
        return;
    };
    // Only draw small scenarios; size limits are the caller's business.
    if spec.n().saturating_mul(spec.d) <= 4096 {
        let ds = generate(&spec).expect("validated spec must generate");
        assert_eq!(ds.n(), spec.n());
        assert_eq!(ds.d(), spec.d);
    }
});
