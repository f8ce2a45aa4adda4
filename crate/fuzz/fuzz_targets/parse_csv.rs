#![no_main]

use glp_ksample::data::{read_csv, CsvOptions, LabelColumn};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // First byte picks header mode and label column; the rest is the file.
    let Some((&ctl, body)) = data.split_first() else {
        return;
    };
    let options = CsvOptions {
        has_header: ctl & 1 == 0,
        label: if ctl & 2 == 0 {
            LabelColumn::Index(((ctl >> 2) % 4) as usize)
        } else {
            LabelColumn::Name("label".into())
        },
    };
    if let Ok(ds) = read_csv(body, &options) {
        assert!(ds.k() >= 2);
        assert!(ds.y().iter().all(|&g| (1..=ds.k()).contains(&g)));
        assert!(ds.group_sizes().iter().all(|&c| c >= 2));
        assert!(ds.x().iter().all(|v| v.is_finite()));
        assert_eq!(ds.group_names().len(), ds.k());
    }
});
