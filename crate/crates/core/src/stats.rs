//! Percentiles, bootstrap confidence intervals, and rank correlation.

use crate::rng::{stream_rng, tag};
use crate::{Result, SimError};
use rand::Rng;

/// Linear-interpolation percentile: rank `q/100 * (n-1)` between order
/// statistics. `q` is in percent, 0 to 100 inclusive.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(SimError::EmptySamples);
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(SimError::InvalidParameter(format!("percentile {q} outside [0, 100]")));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(SimError::InvalidParameter("percentile input contains NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN screened above"));
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Two-sided bootstrap confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ci {
    pub lo: f64,
    pub hi: f64,
}

impl Ci {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Percentile-bootstrap CI for a statistic of `n` paired observations.
/// `stat` receives a resampled index multiset; evaluating it on indices
/// keeps resamples paired across any arrays the closure captures.
pub fn bootstrap_ci(
    n: usize,
    reps: u32,
    seed: u64,
    confidence: f64,
    stat: impl Fn(&[usize]) -> f64,
) -> Result<Ci> {
    if n == 0 {
        return Err(SimError::EmptySamples);
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(SimError::InvalidParameter(format!(
            "confidence must be in (0, 1), got {confidence}"
        )));
    }
    if reps < 2 {
        return Err(SimError::InvalidParameter("bootstrap needs at least 2 replicates".into()));
    }
    let mut values = Vec::with_capacity(reps as usize);
    let mut idx = vec![0usize; n];
    for rep in 0..reps {
        let mut rng = stream_rng(seed, &[tag::BOOTSTRAP, u64::from(rep)]);
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        values.push(stat(&idx));
    }
    let tail = 100.0 * (1.0 - confidence) / 2.0;
    Ok(Ci { lo: percentile(&values, tail)?, hi: percentile(&values, 100.0 - tail)? })
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("NaN in rank input"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(SimError::InvalidParameter(
            "correlation undefined for a constant sequence".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(SimError::InvalidParameter(
            "rank correlation needs two equal sequences of length >= 3".into(),
        ));
    }
    pearson(&ranks(xs), &ranks(ys))
}

/// Largest sequence length for exact permutation p-values (8! = 40320).
pub const SPEARMAN_EXACT_MAX_N: usize = 8;

/// Spearman rho plus the exact one-sided p-value for negative association:
/// the fraction of permutations of `ys` whose rho is at most the observed
/// one. Exact enumeration, so `xs.len() <= 8`.
pub fn spearman_exact_p_negative(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let rho = spearman_rho(xs, ys)?;
    if xs.len() > SPEARMAN_EXACT_MAX_N {
        return Err(SimError::InvalidParameter(format!(
            "exact permutation test limited to n <= {SPEARMAN_EXACT_MAX_N}, got {}",
            xs.len()
        )));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let mut perm: Vec<usize> = (0..ry.len()).collect();
    let mut at_most = 0u64;
    let mut total = 0u64;
    let mut buf = vec![0.0; ry.len()];
    permute(&mut perm, 0, &mut |p| {
        for (slot, &i) in buf.iter_mut().zip(p) {
            *slot = ry[i];
        }
        // Permuting ranks of a tie-free x never changes sxx/syy, so rho is
        // well defined here whenever the observed rho was.
        let r = pearson(&rx, &buf).expect("variance checked on observed data");
        if r <= rho + 1e-12 {
            at_most += 1;
        }
        total += 1;
    });
    Ok((rho, at_most as f64 / total as f64))
}

fn permute(arr: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == arr.len() {
        f(arr);
        return;
    }
    for i in k..arr.len() {
        arr.swap(k, i);
        permute(arr, k + 1, f);
        arr.swap(k, i);
    }
}
