#![allow(dead_code)]

pub mod oracle;

use std::sync::OnceLock;

use localeval::benchmark::{build_benchmark, BenchmarkFile, BuildOptions};
use localeval::fixtures::{generate_fixture, FixtureSpec};
use localeval::platform::StoreBundle;

pub fn fixture_bundle() -> &'static StoreBundle {
    static B: OnceLock<StoreBundle> = OnceLock::new();
    B.get_or_init(|| generate_fixture(&FixtureSpec::benchmark()))
}

/// Every task with two questions (82 in total).
pub fn toy_benchmark() -> &'static BenchmarkFile {
    static F: OnceLock<BenchmarkFile> = OnceLock::new();
    F.get_or_init(|| {
        let opts = BuildOptions { questions_per_task: 2, ..BuildOptions::default() };
        build_benchmark(fixture_bundle(), "Hangzhou", &opts, 11).unwrap().file
    })
}

/// A disjoint-seed build used as an exemplar pool.
pub fn pool_benchmark() -> &'static BenchmarkFile {
    static F: OnceLock<BenchmarkFile> = OnceLock::new();
    F.get_or_init(|| {
        let opts = BuildOptions { questions_per_task: 13, ..BuildOptions::default() };
        build_benchmark(fixture_bundle(), "Hangzhou", &opts, 99).unwrap().file
    })
}

pub fn data(name: &str) -> serde_json::Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
