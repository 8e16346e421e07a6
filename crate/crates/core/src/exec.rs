//! Episode-level data parallelism with a sequential fallback.
//!
//! Everything that fans out over seeds or episodes goes through [`map`]. With
//! the `parallel` feature disabled, or with [`Execution::Sequential`], work
//! runs in order on the calling thread. Results are always returned in input
//! order so parallel and sequential runs are bit-identical.

use serde::{Deserialize, Serialize};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "MHP_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Execution, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}

/// Configures the global rayon pool from `MHP_THREADS` if it is set.
///
/// Returns the cap that was applied. Calling it after the pool has started
/// is harmless; the first configuration wins.
pub fn init_threads_from_env() -> Option<usize> {
    let cap = std::env::var(THREADS_ENV).ok()?.parse::<usize>().ok()?.max(1);
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cap).build_global();
    }
    Some(cap)
}
