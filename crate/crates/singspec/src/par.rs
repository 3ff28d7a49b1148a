//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) [`ExecMode::Parallel`] runs on the rayon
//! global pool; without it every mode runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    #[default]
    Parallel,
    Sequential,
}

impl ExecMode {
    /// Whether this mode actually runs concurrently in this build.
    pub fn is_concurrent(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Order-preserving map.
pub fn map<T, R, F>(items: &[T], mode: ExecMode, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..200).collect();
        let a = map(&xs, ExecMode::Parallel, |x| x * x);
        let b = map(&xs, ExecMode::Sequential, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[17], 289);
    }
}
