#![no_main]

use libfuzzer_sys::fuzz_target;
use sfgen_core::io::{parse_text_edge_list, write_edge_list, Format};

fuzz_target!(|data: &[u8]| {
    let Ok(g) = parse_text_edge_list(data) else {
        return;
    };
    let mut out = Vec::new();
    write_edge_list(&g, Format::Text, &mut out).unwrap();
    let back = parse_text_edge_list(&out).unwrap();
    assert_eq!(back.edges(), g.edges());
    assert_eq!(back.vertex_count(), g.vertex_count());
});
