//! Replays the checked-in fuzz seeds for the parsers through the normal test run.

use std::path::Path;

use clap::Parser;
use continual_counting::cli::{parse_bits, BitReader, RunSpec};
use continual_counting::Error;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn parse_bits_seeds() {
    for (name, data) in seeds("parse_bits") {
        let whole = parse_bits(&data);
        let streamed: Result<Vec<u8>, Error> = BitReader::new(data.as_slice()).collect();
        assert_eq!(whole, streamed, "{name}");
        assert_eq!(whole.is_err(), name == "bad_token", "{name}");
    }
}

#[test]
fn cli_args_seeds() {
    for (name, data) in seeds("cli_args") {
        let text = String::from_utf8(data).unwrap();
        let args = std::iter::once("contcount").chain(text.split_whitespace());
        assert!(RunSpec::try_parse_from(args).is_ok(), "{name}: {text}");
    }
}
