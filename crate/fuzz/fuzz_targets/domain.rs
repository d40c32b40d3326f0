#![no_main]
use cibnet::ingest::{normalize_domain, normalize_domain_with, DomainOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Some(d) = normalize_domain(s) {
            assert!(!d.is_empty());
            assert_eq!(d, d.to_lowercase());
        }
        let _ = normalize_domain_with(s, DomainOptions { registrable_only: true });
    }
});
