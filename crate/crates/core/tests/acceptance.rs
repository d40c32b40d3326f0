mod common;

use std::time::Instant;

use common::*;

// Checks that fail for documented reasons (see README). They still
// print FAIL; any other failure makes the target fail.
const KNOWN_RED: [&str; 3] = ["AC6", "AC9", "P1"];

fn main() {
    let criteria: [(&str, &str, Box<dyn Fn() -> Check>); 11] = [
        ("AC1", "projection matches dense TF-IDF cosine", Box::new(|| ac1_projection(100, 1))),
        ("AC2", "centrality ranking matches long-run reference", Box::new(|| ac2_centrality(50, 2))),
        ("AC3", "68-account hashtag campaign recovered as one clique", Box::new(|| ac3_hashtag(10))),
        ("AC4", "embedding matches equal brute force", Box::new(|| ac4_embedding_matches(40, 4))),
        ("AC5", "four synchronized groups after edge+node pruning", Box::new(|| ac5_sync(10))),
        ("AC6", "retention under 5% and 10% post loss", Box::new(|| ac6_robustness(10))),
        ("AC7", "nine planted voiceprint groups, DBSCAN reference", Box::new(|| ac7_dbscan(7))),
        ("AC8", "NMI and Fisher ratio statistics", Box::new(|| ac8_statistics(8))),
        ("AC9", "no dense clusters on organic-only data", Box::new(|| ac9_false_positives(10))),
        ("AC10", "byte-identical output across reruns and thread counts", Box::new(|| ac10_determinism(0))),
        ("P1", "separable planted campaigns fully recovered, 20 seeds", Box::new(|| planted_recovery(20))),
    ];
    let mut passed = 0;
    let mut unexpected = Vec::new();
    for (id, name, run) in &criteria {
        let t = Instant::now();
        let check = run();
        let secs = t.elapsed().as_secs_f64();
        let status = if check.pass { "PASS" } else { "FAIL" };
        println!("{id:<4} {status}  {name}: {} [{secs:.1} s]", check.detail);
        if check.pass {
            passed += 1;
        } else if !KNOWN_RED.contains(id) {
            unexpected.push(*id);
        }
    }
    println!("acceptance: {passed}/{} checks pass", criteria.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
