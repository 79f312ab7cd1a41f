#![no_main]

use continual_counting::digits::{max_value, DigitVector, Variant};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: (u8, u8, u8, u64)| {
    let (v, k, w, t) = data;
    if t == u64::MAX {
        return;
    }
    let variant = Variant::ALL[v as usize % 3];
    let k = k as u32 % 40;
    let w = w as u32 % 20;
    let Ok(max) = max_value(variant, k, w) else {
        return;
    };
    let t = if max == 0 {
        0
    } else {
        (t as u128 % (max + 1)) as u64
    };
    let d = DigitVector::encode(variant, t, k, w).unwrap();
    assert_eq!(d.decode(), t as i128);
    let (lo, hi) = variant.digit_bounds(k);
    assert!(d.digits().iter().all(|&x| lo <= x && x <= hi));
    let rebuilt = DigitVector::from_digits(variant, k, d.digits().to_vec()).unwrap();
    assert_eq!(rebuilt, d);
    match d.increment() {
        Ok(next) => assert_eq!(next, DigitVector::encode(variant, t + 1, k, w).unwrap()),
        Err(_) => assert_eq!(t as u128, max),
    }
});
