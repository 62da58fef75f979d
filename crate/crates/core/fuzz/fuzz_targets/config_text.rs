//! Config sniffing (TOML or JSON) over both config shapes must never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsevar::bench::BenchConfig;
use sparsevar::config::{parse_auto, FitOverrides};

fuzz_target!(|text: &str| {
    let _ = parse_auto::<FitOverrides>(text);
    let _ = parse_auto::<BenchConfig>(text);
});
