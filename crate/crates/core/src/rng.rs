// SPDX-License-Identifier: Apache-2.0

//! Counter-based random streams and the deterministic replication engine.
//!
//! Replication `i` of a run with master seed `s` draws from its own
//! generator, seeded with `mix64(s, i)`. The generator is PCG64 (the
//! 128-bit MCG variant, `rand_pcg::Pcg64Mcg`); normal variates come from
//! `rand_distr::StandardNormal` (ziggurat). Because no stream is shared,
//! a replication's draws do not depend on which worker runs it or in what
//! order.
//!
//! Replications are grouped into fixed-size chunks. Each chunk folds its
//! replications sequentially; chunks are merged strictly in index order.
//! Totals are therefore bit-identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

pub type ReplicationRng = Pcg64Mcg;

/// Replications folded sequentially inside one chunk.
pub const CHUNK: usize = 64;

/// Chunks evaluated concurrently before merging. Bounds peak memory for
/// large accumulators; it does not affect results.
const WAVE: usize = 8;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `master`.
pub fn mix64(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

pub fn replication_rng(master: u64, index: u64) -> ReplicationRng {
    Pcg64Mcg::seed_from_u64(mix64(master, index))
}

pub fn standard_normal(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn fill_standard_normal(rng: &mut impl Rng, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// Runs `reps` replications and folds them into one accumulator.
///
/// `step(acc, i, rng)` receives the replication index and its private
/// generator. `merge(into, from)` must combine two chunk accumulators where
/// `from` holds later replications.
pub fn replicate<A, I, S, M, E>(reps: usize, seed: u64, init: I, step: S, merge: M) -> Result<A, E>
where
    A: Send,
    E: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, usize, &mut ReplicationRng) -> Result<(), E> + Sync,
    M: Fn(&mut A, A),
{
    let chunks = reps.div_ceil(CHUNK);
    let mut total = init();
    let mut start = 0;
    while start < chunks {
        let end = (start + WAVE).min(chunks);
        let wave: Vec<Result<A, E>> = (start..end)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                for i in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                    let mut rng = replication_rng(seed, i as u64);
                    step(&mut acc, i, &mut rng)?;
                }
                Ok(acc)
            })
            .collect();
        for acc in wave {
            merge(&mut total, acc?);
        }
        start = end;
    }
    Ok(total)
}

/// Collects one record per replication, in replication order.
pub fn replicate_records<T, S, E>(reps: usize, seed: u64, step: S) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    S: Fn(usize, &mut ReplicationRng) -> Result<T, E> + Sync,
{
    replicate(
        reps,
        seed,
        Vec::new,
        |acc: &mut Vec<T>, i, rng| {
            acc.push(step(i, rng)?);
            Ok(())
        },
        |into, from| into.extend(from),
    )
}

/// Runs `f` on a dedicated pool with `workers` threads (`None` keeps the
/// current pool).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(w) if w > 0 => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}
