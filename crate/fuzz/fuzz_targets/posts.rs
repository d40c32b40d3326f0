#![no_main]
use cibnet::ingest::{parse_posts, ParseOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_posts(data, ParseOptions::default());
    let _ = parse_posts(data, ParseOptions { case_sensitive_hashtags: true });
});
