#![no_main]

use clap::Parser;
use continual_counting::cli::RunSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let args = std::iter::once("contcount").chain(text.split_whitespace());
    let _ = RunSpec::try_parse_from(args);
});
