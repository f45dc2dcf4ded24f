#![no_main]

use libfuzzer_sys::fuzz_target;
use sfgen_core::io::{parse_seed_graph, write_seed_graph};

fuzz_target!(|data: &[u8]| {
    let Ok(seed) = parse_seed_graph(data) else {
        return;
    };
    let mut out = Vec::new();
    write_seed_graph(&seed, &mut out).unwrap();
    let back = parse_seed_graph(&out).unwrap();
    assert_eq!(back.nonzeros(), seed.nonzeros());
    assert_eq!(back.order(), seed.order());
});
