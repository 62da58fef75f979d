//! Model JSON loading runs full constructor validation; no input may panic,
//! and accepted models must round-trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsevar::varmodel::VarModel;

fuzz_target!(|text: &str| {
    if let Ok(model) = VarModel::from_json(text) {
        let out = model.to_json().unwrap();
        let back = VarModel::from_json(&out).unwrap();
        assert_eq!(back, model);
    }
});
