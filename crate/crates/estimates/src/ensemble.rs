use rayon::prelude::*;

/// Maps `f(state, i)` over `i in 0..n` on the current rayon pool and returns
/// the results in index order. `init` builds per-worker scratch state.
pub fn par_map<S, T, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map_init(init, f).collect()
}
