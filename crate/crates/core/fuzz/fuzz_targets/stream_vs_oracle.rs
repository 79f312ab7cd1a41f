#![no_main]

use continual_counting::mechanisms::{run_oracle, run_stream, MechanismConfig};
use continual_counting::Variant;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let [v, k, s0, s1, bits @ ..] = data else {
        return;
    };
    let variant = Variant::ALL[*v as usize % 3];
    let k = 2 + *k as u32 % 12;
    let bits: Vec<u8> = bits.iter().take(2048).map(|b| b & 1).collect();
    if bits.is_empty() || !variant.admits(k) {
        return;
    }
    let seed = u16::from_le_bytes([*s0, *s1]) as u64;
    let cfg = MechanismConfig::new(variant, k, bits.len() as u64, 1.0)
        .unwrap()
        .seed(seed);
    let a = run_stream(&cfg, &bits).unwrap();
    let b = run_oracle(&bits, &cfg).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
});
