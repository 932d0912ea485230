//! Monte Carlo harness: path-keyed random streams, a deterministic parallel
//! trial runner, and the interval estimators used by every report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// SplitMix64 finalizer; a bijection on `u64` with full avalanche.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Top 53 bits of a hash as a uniform in `[0, 1)`.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Identifier of an independent random stream: a master seed plus a path of
/// integer labels, folded into a single key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    master: u64,
    key: u64,
    depth: u32,
}

impl StreamId {
    pub fn root(master: u64) -> StreamId {
        StreamId {
            master,
            key: mix64(master ^ 0x005E_ED0F_C0DE),
            depth: 0,
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Child stream. Order-sensitive: `derive(a).derive(b) != derive(b).derive(a)`.
    pub fn derive(&self, label: u64) -> StreamId {
        let salt = mix64(label ^ (u64::from(self.depth) + 1).wrapping_mul(0xD6E8_FEB8_6659_FD93));
        StreamId {
            master: self.master,
            key: mix64(self.key.rotate_left(23) ^ salt),
            depth: self.depth + 1,
        }
    }

    /// Child keyed by a signed pair, e.g. lattice coordinates.
    pub fn derive_pair(&self, a: i64, b: i64) -> StreamId {
        self.derive(a as u64).derive(b as u64)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.key.to_le_bytes());
        seed[8..16].copy_from_slice(&mix64(self.key ^ 1).to_le_bytes());
        seed[16..24].copy_from_slice(&mix64(self.key ^ 2).to_le_bytes());
        seed[24..].copy_from_slice(&self.master.to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Wilson,
    Bootstrap,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: u64,
    pub method: CiMethod,
}

impl EstimateWithCI {
    /// Standard error of a Bernoulli proportion at the point estimate.
    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.point * (1.0 - self.point) / self.n as f64).sqrt()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `successes / n`.
pub fn wilson(successes: u64, n: u64, z: f64) -> EstimateWithCI {
    if n == 0 {
        return EstimateWithCI {
            point: 0.0,
            lo: 0.0,
            hi: 1.0,
            n,
            method: CiMethod::Wilson,
        };
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // clamp so that the interval always contains the point (rounding at p=0/1)
    EstimateWithCI {
        point: p,
        lo: (center - half).max(0.0).min(p),
        hi: (center + half).min(1.0).max(p),
        n,
        method: CiMethod::Wilson,
    }
}

/// Evaluate `f(index, stream)` for `index in 0..n`, each trial on its own
/// child stream `root.derive(index)`. Output order is the index order, so the
/// result does not depend on `parallelism` (0 means the global rayon pool).
pub fn run_trials<T, F>(n: u64, root: &StreamId, parallelism: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, StreamId) -> T + Sync + Send,
{
    let work = || {
        (0..n)
            .into_par_iter()
            .map(|i| f(i, root.derive(i)))
            .collect::<Vec<T>>()
    };
    if parallelism == 1 {
        return (0..n).map(|i| f(i, root.derive(i))).collect();
    }
    if parallelism == 0 {
        return work();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}

/// Bernoulli experiment summarized with a Wilson interval.
pub fn estimate<F>(n: u64, root: &StreamId, parallelism: usize, f: F) -> EstimateWithCI
where
    F: Fn(u64, StreamId) -> bool + Sync + Send,
{
    let hits = run_trials(n, root, parallelism, f)
        .into_iter()
        .filter(|b| *b)
        .count() as u64;
    wilson(hits, n, Z95)
}

/// Percentile bootstrap for an arbitrary statistic of a sample of rows.
/// Returns `(lo, hi)` at the given two-sided level.
pub fn bootstrap<T, F>(data: &[T], resamples: usize, level: f64, stream: &StreamId, stat: F) -> (f64, f64)
where
    T: Clone,
    F: Fn(&[T]) -> f64,
{
    if data.is_empty() || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = stream.rng();
    let mut buf = Vec::with_capacity(data.len());
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            buf.clear();
            for _ in 0..data.len() {
                buf.push(data[rng.random_range(0..data.len())].clone());
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    (quantile_sorted(&stats, alpha), quantile_sorted(&stats, 1.0 - alpha))
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mann–Kendall trend test on a series in its natural order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannKendall {
    pub s: i64,
    pub var_s: f64,
    pub z: f64,
    /// Two-sided p-value under the no-trend null.
    pub p_value: f64,
}

impl MannKendall {
    /// Non-increasing trend: `S <= 0`, i.e. the data give no evidence of an
    /// upward drift at any level.
    pub fn nonincreasing(&self) -> bool {
        self.s <= 0
    }

    /// Significantly decreasing at one-sided level `alpha`.
    pub fn decreasing_at(&self, alpha: f64) -> bool {
        let n = Normal::new(0.0, 1.0).expect("standard normal");
        n.cdf(self.z) < alpha
    }
}

pub fn mann_kendall(xs: &[f64]) -> MannKendall {
    let n = xs.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += match xs[j].partial_cmp(&xs[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    // tie correction
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut k = 0;
    while k < sorted.len() {
        let mut j = k;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[k] {
            j += 1;
        }
        let t = (j - k + 1) as f64;
        ties += t * (t - 1.0) * (2.0 * t + 5.0);
        k = j + 1;
    }
    let nf = n as f64;
    let var_s = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ties) / 18.0;
    let z = if var_s <= 0.0 {
        0.0
    } else if s > 0 {
        (s as f64 - 1.0) / var_s.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / var_s.sqrt()
    } else {
        0.0
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    MannKendall {
        s,
        var_s,
        z,
        p_value: 2.0 * (1.0 - normal.cdf(z.abs())),
    }
}

/// `P(A ∩ B) − P(A)P(B)` from paired indicators, with a delta-method
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub p_a: f64,
    pub p_b: f64,
    pub p_ab: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub n: u64,
}

impl Covariance {
    pub fn lo(&self, z: f64) -> f64 {
        self.estimate - z * self.std_err
    }

    pub fn hi(&self, z: f64) -> f64 {
        self.estimate + z * self.std_err
    }
}

pub fn covariance(pairs: &[(bool, bool)]) -> Covariance {
    let n = pairs.len() as f64;
    if pairs.is_empty() {
        return Covariance {
            p_a: 0.0,
            p_b: 0.0,
            p_ab: 0.0,
            estimate: 0.0,
            std_err: 0.0,
            n: 0,
        };
    }
    let f = |b: bool| if b { 1.0 } else { 0.0 };
    let p_a = pairs.iter().map(|p| f(p.0)).sum::<f64>() / n;
    let p_b = pairs.iter().map(|p| f(p.1)).sum::<f64>() / n;
    let p_ab = pairs.iter().map(|p| f(p.0 && p.1)).sum::<f64>() / n;
    // influence function of (p_ab, p_a, p_b) ↦ p_ab − p_a p_b
    let var = pairs
        .iter()
        .map(|&(a, b)| {
            let psi = (f(a && b) - p_ab) - p_b * (f(a) - p_a) - p_a * (f(b) - p_b);
            psi * psi
        })
        .sum::<f64>()
        / n;
    Covariance {
        p_a,
        p_b,
        p_ab,
        estimate: p_ab - p_a * p_b,
        std_err: (var / n).sqrt(),
        n: pairs.len() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::ChiSquared;

    #[test]
    fn derive_is_pure_and_path_sensitive() {
        let s = StreamId::root(9);
        assert_eq!(s.derive(0), s.derive(0));
        assert_ne!(s.derive(0), s.derive(1));
        assert_ne!(s.derive(1).derive(2), s.derive(2).derive(1));
        assert_ne!(StreamId::root(1).derive(0), StreamId::root(2).derive(0));
    }

    #[test]
    fn derived_children_are_uniform() {
        let s = StreamId::root(2024);
        let bins = 16usize;
        let mut counts = vec![0f64; bins];
        let n = 1001;
        for label in 0..n {
            let u: f64 = s.derive(label).rng().random();
            counts[(u * bins as f64) as usize] += 1.0;
        }
        let expect = n as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn constant_true_experiment() {
        let e = estimate(100, &StreamId::root(1), 1, |_, _| true);
        assert_eq!(e.point, 1.0);
        assert_eq!(e.hi, 1.0);
        assert!(e.lo < 1.0);
    }

    #[test]
    fn fair_coin() {
        let e = estimate(10_000, &StreamId::root(3), 0, |_, s| s.rng().random_bool(0.5));
        assert!((e.point - 0.5).abs() <= 0.015, "{e:?}");
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let f = |i: u64, s: StreamId| (i, s.rng().random::<u64>());
        let a = run_trials(500, &StreamId::root(5), 1, f);
        let b = run_trials(500, &StreamId::root(5), 8, f);
        assert_eq!(a, b);
    }

    #[test]
    fn wilson_coverage() {
        for (k, &p) in [0.1, 0.5, 0.9].iter().enumerate() {
            let root = StreamId::root(77).derive(k as u64);
            let covered = (0..500u64)
                .filter(|&m| {
                    let mut rng = root.derive(m).rng();
                    let hits = (0..200).filter(|_| rng.random_bool(p)).count() as u64;
                    wilson(hits, 200, Z95).contains(p)
                })
                .count();
            assert!(covered >= 465, "p = {p}: {covered}/500");
        }
    }

    #[test]
    fn wilson_degenerate() {
        let e = wilson(0, 50, Z95);
        assert_eq!(e.point, 0.0);
        assert_eq!(e.lo, 0.0);
        assert!(e.hi > 0.0);
    }

    #[test]
    fn mann_kendall_directions() {
        assert!(mann_kendall(&[4.0, 3.0, 2.0, 1.0]).s == -6);
        assert!(mann_kendall(&[1.0, 2.0, 3.0]).s == 3);
        let flat = mann_kendall(&[1.0, 1.0, 1.0]);
        assert_eq!(flat.s, 0);
        assert!(flat.nonincreasing());
        let big: Vec<f64> = (0..30).map(|i| -(i as f64)).collect();
        assert!(mann_kendall(&big).decreasing_at(0.05));
    }

    #[test]
    fn covariance_of_identical_events() {
        let pairs: Vec<(bool, bool)> = (0..100).map(|i| (i % 4 == 0, i % 4 == 0)).collect();
        let c = covariance(&pairs);
        assert!((c.estimate - 0.25 * 0.75).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_brackets_mean() {
        let data: Vec<f64> = (0..200).map(|i| (i % 10) as f64).collect();
        let (lo, hi) = bootstrap(&data, 500, 0.95, &StreamId::root(4), mean);
        assert!(lo < 4.5 && 4.5 < hi);
    }
}
