//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use cantor_sio::{ConstructionSchedule, LevelMeasure};

/// The level-2 measure on radii `(1, 2^-6, 2^-13)`: 8192 leaves.
pub fn bench_measure() -> LevelMeasure {
    let s = ConstructionSchedule::new(3, vec![1.0, 2f64.powi(-6), 2f64.powi(-13)])
        .expect("valid schedule");
    LevelMeasure::new(Arc::new(s), 2).expect("level within depth")
}
