#![no_main]
use cibnet::ingest::read_wav;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_wav(data);
});
