//! Deterministic worker-pool helper.
//!
//! `REALPG_THREADS` caps worker parallelism (0 or unset = auto). Results are
//! written into index-order slots, so output is identical for every thread
//! count.

use std::sync::atomic::{AtomicUsize, Ordering};

static OVERRIDE: AtomicUsize = AtomicUsize::new(0);

/// Force a worker count from code (used by determinism tests). `None` restores
/// the environment-driven behaviour.
pub fn set_thread_override(threads: Option<usize>) {
    OVERRIDE.store(threads.map_or(0, |t| t.max(1)), Ordering::SeqCst);
}

/// Effective worker count: override, then `REALPG_THREADS`, then auto.
pub fn thread_count() -> usize {
    let forced = OVERRIDE.load(Ordering::SeqCst);
    if forced > 0 {
        return forced;
    }
    match std::env::var("REALPG_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => auto(),
            Ok(n) => n,
        },
        Err(_) => auto(),
    }
}

fn auto() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Map `f` over `0..n`, possibly on multiple threads, preserving index order.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = thread_count().min(n).max(1);
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunk = n.div_ceil(workers);
    std::thread::scope(|scope| {
        for (w, slots) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            let start = w * chunk;
            scope.spawn(move || {
                for (offset, slot) in slots.iter_mut().enumerate() {
                    *slot = Some(f(start + offset));
                }
            });
        }
    });
    out.into_iter().map(|o| o.expect("slot filled")).collect()
}
