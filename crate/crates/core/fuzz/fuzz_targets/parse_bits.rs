#![no_main]

use continual_counting::cli::{parse_bits, BitReader};
use continual_counting::Error;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let whole = parse_bits(data);
    let streamed: Result<Vec<u8>, Error> = BitReader::new(data).collect();
    assert_eq!(whole, streamed);
    match whole {
        Ok(bits) => {
            assert!(bits.iter().all(|&b| b <= 1));
            let text: String = bits.iter().map(|b| format!("{b}\n")).collect();
            assert_eq!(parse_bits(text.as_bytes()).unwrap(), bits);
        }
        Err(Error::Parse { line, .. }) => {
            let lines = data.split(|&c| c == b'\n').count();
            assert!(line >= 1 && line <= lines);
        }
        Err(e) => panic!("unexpected error kind: {e}"),
    }
});
