#![no_main]
use std::collections::HashSet;

use cibnet::ingest::parse_comments;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_comments(data, None);
    let known: HashSet<&str> = ["p1", "p2"].into_iter().collect();
    let _ = parse_comments(data, Some(&known));
});
