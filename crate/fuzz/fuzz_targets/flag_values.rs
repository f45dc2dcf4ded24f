#![no_main]

use libfuzzer_sys::fuzz_target;
use sfgen_core::io::Format;
use sfgen_core::metrics::Sources;
use sfgen_core::pba::FactionConfig;
use sfgen_core::pk::NoiseMode;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(NoiseMode::SeedPerturb(p)) = s.parse::<NoiseMode>() {
        assert!((0.0..=1.0).contains(&p));
    }
    let _ = s.parse::<Sources>();
    let _ = s.parse::<Format>();
    let _ = FactionConfig::from_shorthand(s, 17);
});
