//! Fit report JSON parsing (nested model, masks, traces) must never panic,
//! and accepted reports must round-trip exactly.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsevar::pipeline::FitReport;

fuzz_target!(|text: &str| {
    if let Ok(report) = FitReport::from_json(text) {
        let out = report.to_json().unwrap();
        let back = FitReport::from_json(&out).unwrap();
        assert!(back.content_eq(&report));
    }
});
