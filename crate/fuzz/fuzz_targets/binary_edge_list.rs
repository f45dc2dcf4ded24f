#![no_main]

use libfuzzer_sys::fuzz_target;
use sfgen_core::io::{parse_binary_edge_list, write_edge_list, Format};

fuzz_target!(|data: &[u8]| {
    let Ok(g) = parse_binary_edge_list(data) else {
        return;
    };
    // a valid payload re-encodes to exactly the input
    let mut out = Vec::new();
    write_edge_list(&g, Format::Binary, &mut out).unwrap();
    assert_eq!(out, data);
});
