#![no_main]

use libfuzzer_sys::fuzz_target;
use sfgen_core::io::parse_factions;
use sfgen_core::pba::FactionConfig;

fuzz_target!(|data: &[u8]| {
    let Some((&ranks, body)) = data.split_first() else {
        return;
    };
    let ranks = ranks as usize % 64 + 1;
    let _ = parse_factions(body);
    if let Ok(fc) = FactionConfig::parse_file_contents(body, ranks) {
        for rank in 0..ranks {
            assert!(!fc.membership(rank).is_empty());
            assert_eq!(fc.prefix(rank).len(), fc.prefix_len(rank));
        }
    }
});
