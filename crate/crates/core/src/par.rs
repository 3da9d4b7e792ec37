//! Rayon or sequential execution, selected by the `parallel` feature.
//!
//! Call sites always write `into_par_iter()` / `par_iter()`; without the
//! feature these resolve to plain iterators so the same chain compiles.

#[cfg(feature = "parallel")]
pub use rayon::prelude::*;

#[cfg(not(feature = "parallel"))]
pub use sequential::*;

#[cfg(not(feature = "parallel"))]
mod sequential {
    pub trait IntoParallelIterator {
        type Iter: Iterator<Item = Self::Item>;
        type Item;
        fn into_par_iter(self) -> Self::Iter;
    }

    impl<I: IntoIterator> IntoParallelIterator for I {
        type Iter = I::IntoIter;
        type Item = I::Item;
        fn into_par_iter(self) -> Self::Iter {
            self.into_iter()
        }
    }

    pub trait ParallelSlice<T> {
        fn par_iter(&self) -> std::slice::Iter<'_, T>;
    }

    impl<T> ParallelSlice<T> for [T] {
        fn par_iter(&self) -> std::slice::Iter<'_, T> {
            self.iter()
        }
    }
}

/// Number of worker threads the current configuration will use.
pub fn thread_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Environment variable read by [`configure_from_env`].
pub const THREADS_ENV: &str = "PANM_THREADS";

/// Sizes the global pool from `PANM_THREADS` when it is set. Has no effect
/// without the `parallel` feature or once the pool is already running.
pub fn configure_from_env() -> crate::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| crate::Error::Parse(format!("{THREADS_ENV}={raw:?} is not a thread count")))?;
    #[cfg(feature = "parallel")]
    {
        // a second call finds the pool built; that is fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}
