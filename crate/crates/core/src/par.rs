//! Thin dispatch layer between rayon and plain loops.
//!
//! Every kernel routed through here computes each output slot independently
//! with a sequential inner loop, so results are bitwise identical whether
//! the `parallel` feature is enabled or not, and for any thread count.

/// Work (in multiply-adds, roughly) below which forking to rayon costs more
/// than it saves.
pub(crate) const MIN_PAR_WORK: usize = 16 * 1024;

/// Runs `f` on each `cols`-wide row of `data`, in parallel when worthwhile.
pub(crate) fn for_each_row(
    data: &mut [f64],
    cols: usize,
    work_per_row: usize,
    f: impl Fn(usize, &mut [f64]) + Sync,
) {
    debug_assert!(cols > 0 && data.len().is_multiple_of(cols));
    #[cfg(feature = "parallel")]
    {
        let rows = data.len() / cols;
        if rows > 1 && rows.saturating_mul(work_per_row) >= MIN_PAR_WORK {
            use rayon::prelude::*;
            data.par_chunks_mut(cols).enumerate().for_each(|(i, row)| f(i, row));
            return;
        }
    }
    let _ = work_per_row;
    for (i, row) in data.chunks_mut(cols).enumerate() {
        f(i, row);
    }
}

/// Collects `f(0), f(1), ..., f(n-1)` in index order, in parallel when
/// worthwhile.
pub(crate) fn map_indexed<T: Send>(
    n: usize,
    work_per_item: usize,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        if n > 1 && n.saturating_mul(work_per_item) >= MIN_PAR_WORK {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = work_per_item;
    (0..n).map(f).collect()
}
