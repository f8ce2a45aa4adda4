#![no_main]

use glp_ksample::data::summarize_column;
use glp_ksample::lpbasis::build_basis;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Small integer values so ties are common.
    let values: Vec<f64> = data.iter().skip(1).map(|&b| f64::from(b % 16)).collect();
    let order = data.first().map_or(1, |&b| 1 + (b % 4) as usize);
    if values.is_empty() {
        return;
    }
    let s = summarize_column(&values);
    let Ok(basis) = build_basis(&s, &values, order) else {
        return;
    };
    assert!(basis.order() < s.support_size());
    let n = values.len() as f64;
    for j in 0..basis.order() {
        let col = basis.values().column(j);
        assert!((col.sum() / n).abs() < 1e-8);
        assert!((col.dot(&col) / n - 1.0).abs() < 1e-6);
    }
});
