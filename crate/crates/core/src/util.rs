use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A generator keyed by `(seed, a, b)`; the same key always yields the same
/// stream regardless of which thread asks for it.
pub(crate) fn keyed_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(mix64(seed) ^ a) ^ b))
}

/// `rows x cols` matrix (row-major) with orthonormal columns, drawn from a
/// seeded Gaussian and orthonormalized by modified Gram-Schmidt.
///
/// With `zero_mean`, every column is also orthogonal to the all-ones vector,
/// which needs `rows > cols`.
pub(crate) fn orthonormal_columns(rows: usize, cols: usize, seed: u64, zero_mean: bool) -> Vec<f64> {
    assert!(cols + usize::from(zero_mean) <= rows, "not enough rows for {cols} orthonormal columns");
    let mut rng = keyed_rng(seed, 0x6f72_7468, (rows * 1000 + cols) as u64);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols + 1);
    if zero_mean {
        basis.push(vec![1.0 / (rows as f64).sqrt(); rows]);
    }
    while basis.len() < cols + usize::from(zero_mean) {
        let mut v: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(&mut rng)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let cols_vecs = &basis[usize::from(zero_mean)..];
    let mut out = vec![0.0; rows * cols];
    for (c, col) in cols_vecs.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            out[r * cols + c] = v;
        }
    }
    out
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> crate::error::Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(crate::error::CocaError::Config("thread count must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| crate::error::CocaError::Config(format!("cannot start {n} worker threads: {e}"))),
    }
}
