#![no_main]

use hjcone::coneconjugate::GridFunction;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(u) = GridFunction::from_csv_str(text) {
        let back = GridFunction::from_csv_str(&u.to_csv_string()).expect("written form parses");
        assert_eq!(back.values().len(), u.values().len());
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
});
