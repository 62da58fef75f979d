//! The minimal DOT reader must reject arbitrary text without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsevar::graph::parse_digraph;

fuzz_target!(|text: &str| {
    let _ = parse_digraph(text);
});
