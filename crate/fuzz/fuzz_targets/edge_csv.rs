#![no_main]
use cibnet::simnet::read_edge_csv;
use cibnet::traces::TraceKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_edge_csv(data, TraceKind::HashtagSequence);
});
