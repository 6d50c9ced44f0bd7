//! Seeded, chunked Monte Carlo.
//!
//! Samples are split into fixed-size chunks. Chunk `i` draws from a ChaCha
//! stream keyed by `(seed, i)`, and per-chunk partial sums are reduced in
//! chunk order, so results depend only on `(seed, chunk size)` and not on
//! how many threads evaluate the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;

pub type McRng = ChaCha8Rng;

pub const DEFAULT_CHUNK: usize = 4096;

/// SplitMix64 finalizer; used to derive independent seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, stream: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl MeasureEstimate {
    pub fn exact(value: f64, seed: u64) -> Self {
        Self { value, std_error: 0.0, n_samples: 0, seed }
    }

    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            self.std_error / self.value.abs()
        }
    }

    pub fn scaled(self, s: f64) -> Self {
        Self { value: self.value * s, std_error: self.std_error * s.abs(), ..self }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

/// Sample plan: total count, seed and chunk size.
#[derive(Clone, Copy, Debug)]
pub struct McPlan {
    pub samples: usize,
    pub seed: u64,
    pub chunk: usize,
}

impl McPlan {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed, chunk: DEFAULT_CHUNK }
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }
}

/// Mean of `f` over `plan.samples` draws, returned as an estimate of
/// `scale * E[f]`.
pub fn mean<F>(plan: McPlan, scale: f64, f: F) -> Result<MeasureEstimate>
where
    F: Fn(&mut McRng) -> Result<f64> + Sync,
{
    let chunks = plan.samples.div_ceil(plan.chunk);
    let partials: Vec<Result<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(plan.seed, c as u64);
            let len = plan.chunk.min(plan.samples - c * plan.chunk);
            let mut m = Moments::default();
            for _ in 0..len {
                let v = f(&mut rng)?;
                m.count += 1;
                m.sum += v;
                m.sum_sq += v * v;
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for p in partials {
        let p = p?;
        total.count += p.count;
        total.sum += p.sum;
        total.sum_sq += p.sum_sq;
    }
    Ok(finish(total, scale, plan.seed))
}

/// Per-sample outputs of `f`, in chunk order; `None` outputs are dropped.
pub fn collect<T, F>(plan: McPlan, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut McRng) -> Result<Option<T>> + Sync,
{
    let chunks = plan.samples.div_ceil(plan.chunk);
    let parts: Vec<Result<Vec<T>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(plan.seed, c as u64);
            let len = plan.chunk.min(plan.samples - c * plan.chunk);
            let mut out = Vec::new();
            for _ in 0..len {
                if let Some(v) = f(&mut rng)? {
                    out.push(v);
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

fn finish(m: Moments, scale: f64, seed: u64) -> MeasureEstimate {
    if m.count == 0 {
        return MeasureEstimate { value: 0.0, std_error: 0.0, n_samples: 0, seed };
    }
    let n = m.count as f64;
    let mu = m.sum / n;
    let var = if m.count > 1 { ((m.sum_sq - n * mu * mu) / (n - 1.0)).max(0.0) } else { 0.0 };
    MeasureEstimate {
        value: scale * mu,
        std_error: scale.abs() * (var / n).sqrt(),
        n_samples: m.count,
        seed,
    }
}

/// Estimate from precomputed per-sample values (used by pooled estimators).
pub fn from_values<I: IntoIterator<Item = f64>>(values: I, scale: f64, seed: u64) -> MeasureEstimate {
    let mut m = Moments::default();
    for v in values {
        m.count += 1;
        m.sum += v;
        m.sum_sq += v * v;
    }
    finish(m, scale, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn deterministic_under_thread_count() {
        let plan = McPlan::new(50_000, 3).with_chunk(1000);
        let f = |r: &mut McRng| -> Result<f64> { Ok(r.gen::<f64>().powi(2)) };
        let a = mean(plan, 1.0, f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| mean(plan, 1.0, f).unwrap());
        assert_eq!(a, b);
        assert!((a.value - 1.0 / 3.0).abs() < 4.0 * a.std_error);
    }

    #[test]
    fn collect_keeps_chunk_order() {
        let plan = McPlan::new(1000, 9).with_chunk(64);
        let f = |r: &mut McRng| -> Result<Option<f64>> {
            let v: f64 = r.gen();
            Ok((v < 0.5).then_some(v))
        };
        let a = collect(plan, f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool.install(|| collect(plan, f).unwrap());
        assert_eq!(a, b);
        assert!(a.iter().all(|v| *v < 0.5));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn empty_plan_is_zero() {
        let e = mean(McPlan::new(0, 1), 1.0, |_| Ok(1.0)).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.n_samples, 0);
    }
}
