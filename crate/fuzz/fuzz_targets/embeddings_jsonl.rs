#![no_main]
use cibnet::ingest::parse_embeddings;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_embeddings(data);
});
