//! Run-indexed maps. Every run derives its randomness from `(seed, run_id)`,
//! so results do not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How to execute an indexed batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

/// Independent stream for one run.
pub fn stream_rng(seed: u64, run_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_id);
    rng
}

/// `(0..n).map(f)` collected in index order.
pub fn map_indexed<T, F>(exec: Exec, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => (0..n).map(f).collect(),
        Exec::Parallel => par_map(n, f),
    }
}

/// Applies `f` to every element of a slice, keeping order.
pub fn map_slice<S, T, F>(exec: Exec, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => items.iter().map(f).collect(),
        Exec::Parallel => par_map_slice(items, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Send, F: Fn(u64) -> T + Sync + Send>(n: u64, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Send, F: Fn(u64) -> T + Sync + Send>(n: u64, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
fn par_map_slice<S: Sync, T: Send, F: Fn(&S) -> T + Sync + Send>(items: &[S], f: F) -> Vec<T> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map_slice<S: Sync, T: Send, F: Fn(&S) -> T + Sync + Send>(items: &[S], f: F) -> Vec<T> {
    items.iter().map(f).collect()
}

/// Fills `out[i] = f(i)`, in parallel chunks when enabled.
pub fn fill_indexed<T, F>(exec: Exec, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => out.iter_mut().enumerate().for_each(|(i, x)| *x = f(i)),
        Exec::Parallel => par_fill(out, f),
    }
}

#[cfg(feature = "parallel")]
fn par_fill<T: Send, F: Fn(usize) -> T + Sync + Send>(out: &mut [T], f: F) {
    use rayon::prelude::*;
    out.par_iter_mut().with_min_len(4096).enumerate().for_each(|(i, x)| *x = f(i));
}

#[cfg(not(feature = "parallel"))]
fn par_fill<T: Send, F: Fn(usize) -> T + Sync + Send>(out: &mut [T], f: F) {
    out.iter_mut().enumerate().for_each(|(i, x)| *x = f(i));
}

/// Visits `a` and `b` in aligned chunks of `chunk` elements; `f` gets the
/// chunk's starting index. Per-chunk results come back in chunk order, so
/// reductions over them are independent of scheduling.
pub fn zip_chunks_mut<T, U, R, F>(exec: Exec, a: &mut [T], b: &mut [U], chunk: usize, f: F) -> Vec<R>
where
    T: Send,
    U: Send,
    R: Send,
    F: Fn(usize, &mut [T], &mut [U]) -> R + Sync + Send,
{
    assert_eq!(a.len(), b.len());
    match exec {
        Exec::Sequential => {
            a.chunks_mut(chunk).zip(b.chunks_mut(chunk)).enumerate().map(|(c, (x, y))| f(c * chunk, x, y)).collect()
        }
        Exec::Parallel => par_zip_chunks(a, b, chunk, f),
    }
}

#[cfg(feature = "parallel")]
fn par_zip_chunks<T, U, R, F>(a: &mut [T], b: &mut [U], chunk: usize, f: F) -> Vec<R>
where
    T: Send,
    U: Send,
    R: Send,
    F: Fn(usize, &mut [T], &mut [U]) -> R + Sync + Send,
{
    use rayon::prelude::*;
    a.par_chunks_mut(chunk).zip(b.par_chunks_mut(chunk)).enumerate().map(|(c, (x, y))| f(c * chunk, x, y)).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_zip_chunks<T, U, R, F>(a: &mut [T], b: &mut [U], chunk: usize, f: F) -> Vec<R>
where
    T: Send,
    U: Send,
    R: Send,
    F: Fn(usize, &mut [T], &mut [U]) -> R + Sync + Send,
{
    a.chunks_mut(chunk).zip(b.chunks_mut(chunk)).enumerate().map(|(c, (x, y))| f(c * chunk, x, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn results_independent_of_exec() {
        let run = |id: u64| stream_rng(42, id).gen::<u64>();
        assert_eq!(map_indexed(Exec::Sequential, 256, run), map_indexed(Exec::Parallel, 256, run));
        let mut a = vec![0u64; 10_000];
        let mut b = vec![0u64; 10_000];
        fill_indexed(Exec::Sequential, &mut a, |i| (i as u64).wrapping_mul(2654435761));
        fill_indexed(Exec::Parallel, &mut b, |i| (i as u64).wrapping_mul(2654435761));
        assert_eq!(a, b);
        let sums = |exec| {
            let mut x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
            let mut y = vec![0.0; 1000];
            let r = zip_chunks_mut(exec, &mut x, &mut y, 64, |off, xs, ys| {
                for (j, (u, v)) in xs.iter_mut().zip(ys.iter_mut()).enumerate() {
                    *v = *u + (off + j) as f64;
                }
                ys.iter().sum::<f64>()
            });
            (r, y)
        };
        assert_eq!(sums(Exec::Sequential), sums(Exec::Parallel));
        assert_eq!(sums(Exec::Sequential).0.len(), 16);
    }

    #[test]
    fn streams_differ() {
        assert_ne!(stream_rng(1, 0).gen::<u64>(), stream_rng(1, 1).gen::<u64>());
        assert_eq!(stream_rng(1, 5).gen::<u64>(), stream_rng(1, 5).gen::<u64>());
    }
}
