//! Order-preserving map over work units, parallel when the `parallel`
//! feature is on and more than one worker is requested.

/// Applies `f` to every item; results come back in input order.
pub fn ordered_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
    }
    let _ = workers;
    items.iter().map(f).collect()
}

/// Whether this build can run more than one worker.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..500).collect();
        let seq = ordered_map(&items, 1, |x| x * x);
        let par = ordered_map(&items, 8, |x| x * x);
        assert_eq!(seq, par);
    }
}
