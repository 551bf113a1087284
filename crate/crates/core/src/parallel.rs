//! Order-preserving parallel map over indices on scoped threads.

/// `(0..count).map(f)` evaluated on up to `workers` threads. The output is in
/// index order, so results do not depend on scheduling.
pub fn parallel_map<T: Send>(
    count: usize,
    workers: usize,
    f: impl Fn(usize) -> T + Sync,
) -> Vec<T> {
    let workers = workers.clamp(1, count.max(1));
    if workers == 1 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(workers);
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (c, part) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (k, slot) in part.iter_mut().enumerate() {
                    *slot = Some(f(c * chunk + k));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every slot is filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_worker_count() {
        let serial = parallel_map(37, 1, |i| i * i);
        for workers in [2, 3, 8, 64] {
            assert_eq!(parallel_map(37, workers, |i| i * i), serial);
        }
        assert!(parallel_map(0, 4, |i| i).is_empty());
    }
}
