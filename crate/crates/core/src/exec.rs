//! Execution strategy shim: data-parallel maps when the `parallel` feature
//! is enabled (the default), plain sequential loops otherwise. Callers get
//! identical results either way; outputs are ordered by input index.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_slice<T: Sync, R: Send, F: Fn(&T) -> R + Sync + Send>(items: &[T], f: F) -> Vec<R> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, R, F: Fn(&T) -> R>(items: &[T], f: F) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_range<R: Send, F: Fn(usize) -> R + Sync + Send>(n: usize, f: F) -> Vec<R> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F: Fn(usize) -> R>(n: usize, f: F) -> Vec<R> {
    (0..n).map(f).collect()
}

/// Caps the worker pool. Returns an error string when the pool was already
/// fixed (rayon allows exactly one global configuration); a `0` request is a
/// no-op meaning "use the default".
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) -> Result<(), String> {
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) -> Result<(), String> {
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_preserve_order() {
        let squares = map_range(6, |i| i * i);
        assert_eq!(squares, vec![0, 1, 4, 9, 16, 25]);
        let items = vec![1.0f64, 2.0, 3.0];
        let doubled = map_slice(&items, |x| 2.0 * x);
        assert_eq!(doubled, vec![2.0, 4.0, 6.0]);
    }
}
