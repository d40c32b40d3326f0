#![no_main]
use cibnet::ingest::{read_packed_embeddings, EmbeddingKind};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_packed_embeddings(data, EmbeddingKind::Speech);
});
