use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Wall-clock seconds per training phase.
///
/// `default_train` is everything the undefended protocol would also do;
/// the three defense phases are measured separately and `total` covers the
/// whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub default_train: f64,
    pub dim_transform: f64,
    pub grad_norm: f64,
    pub noise_rand: f64,
    pub total: f64,
}

impl TimingReport {
    pub fn defense_overhead(&self) -> f64 {
        self.dim_transform + self.grad_norm + self.noise_rand
    }
}

/// Runs `f`, adding its elapsed seconds to `acc`.
pub(crate) fn timed<T>(acc: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *acc += start.elapsed().as_secs_f64();
    out
}
