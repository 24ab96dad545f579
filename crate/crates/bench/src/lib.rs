//! Shared fixtures for the benchmark targets.

use rootcma::{ArrayGeometry, Scenario, SnapshotMatrix, SourceConfig};

/// The three-source half-wavelength scenario used across the benchmarks.
pub fn three_source_snapshots(snr_db: Option<f64>, n: usize, seed: u64) -> SnapshotMatrix {
    let scenario = Scenario::new(
        ArrayGeometry::new(8, 0.5).expect("valid geometry"),
        vec![
            SourceConfig::new(-53.2, 1.0).expect("valid source"),
            SourceConfig::new(3.23, 1.0).expect("valid source"),
            SourceConfig::new(20.0, 1.0).expect("valid source"),
        ],
        snr_db,
        n,
        seed,
    )
    .expect("valid scenario");
    rootcma::synthesize(&scenario).expect("synthesis succeeds")
}
