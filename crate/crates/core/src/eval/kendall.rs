//! Kendall's tau-b trend test.
//!
//! The p-value is two-sided. For up to [`EXACT_MAX_N`] points it is exact:
//! the null distribution of the score `S` over all permutations is obtained
//! from a q-multinomial when at most one variable has ties, and by full
//! enumeration when both do. Larger samples use the tie-corrected normal
//! approximation without continuity correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Family-wise 0.05 split over the seven trend tests of one sweep.
pub const BONFERRONI_ALPHA: f64 = 0.05 / 7.0;

pub const EXACT_MAX_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KendallTrend {
    pub tau: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Concordant minus discordant pairs.
    pub score: i64,
    pub method: PValueMethod,
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn score(x: &[f64], y: &[f64]) -> i64 {
    let n = x.len();
    let mut s = 0;
    for i in 0..n {
        for j in i + 1..n {
            s += sign(x[j] - x[i]) * sign(y[j] - y[i]);
        }
    }
    s
}

/// Sizes of groups of equal values.
fn tie_groups(v: &[f64]) -> Vec<usize> {
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    crate::ingest::runs(&sorted).map(|(a, b)| b - a).collect()
}

fn tied_pairs(groups: &[usize]) -> i64 {
    groups.iter().map(|&t| (t * (t - 1) / 2) as i64).sum()
}

/// Tau-b and the score `S`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<(f64, i64)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Undefined("non-finite input to Kendall's tau".into()));
    }
    let n = x.len() as i64;
    let n0 = n * (n - 1) / 2;
    let n1 = tied_pairs(&tie_groups(x));
    let n2 = tied_pairs(&tie_groups(y));
    if n0 == n1 || n0 == n2 {
        return Err(Error::Undefined("a constant variable has no Kendall's tau".into()));
    }
    let s = score(x, y);
    Ok((s as f64 / (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt(), s))
}

/// Coefficients of `∏ (1 + q + … + q^(k-1))` over `k` in `sizes`.
fn q_factorial_product(sizes: impl Iterator<Item = usize>) -> Vec<u128> {
    let mut poly = vec![1u128];
    for k in sizes {
        let mut next = vec![0u128; poly.len() + k - 1];
        for (i, &c) in poly.iter().enumerate() {
            for slot in &mut next[i..i + k] {
                *slot += c;
            }
        }
        poly = next;
    }
    poly
}

/// Number of distinct arrangements of a multiset with the given tie groups
/// having each inversion count: `[n]_q! / ∏ [m_i]_q!`.
fn inversion_distribution(groups: &[usize]) -> Vec<u128> {
    let n: usize = groups.iter().sum();
    let mut poly: Vec<i128> = q_factorial_product(1..=n).into_iter().map(|c| c as i128).collect();
    for &m in groups {
        for k in 2..=m {
            // Divide by (1 - q^k) / (1 - q): multiply by (1 - q), then divide by (1 - q^k).
            let mut times = vec![0i128; poly.len() + 1];
            for (i, &c) in poly.iter().enumerate() {
                times[i] += c;
                times[i + 1] -= c;
            }
            let mut quotient = vec![0i128; times.len()];
            for i in 0..times.len() {
                quotient[i] = times[i] + if i >= k { quotient[i - k] } else { 0 };
            }
            while quotient.last() == Some(&0) {
                quotient.pop();
            }
            poly = quotient;
        }
    }
    poly.into_iter().map(|c| c as u128).collect()
}

/// `P(|S| >= |observed|)` under independence, exactly.
fn exact_p_value(x: &[f64], y: &[f64], observed: i64) -> f64 {
    let n = x.len();
    let (gx, gy) = (tie_groups(x), tie_groups(y));
    let x_untied = gx.iter().all(|&g| g == 1);
    let y_untied = gy.iter().all(|&g| g == 1);
    if x_untied || y_untied {
        // With one variable untied, S = n0 - n_tied - 2·inversions of the
        // other when ordered by the untied one.
        let groups = if x_untied { &gy } else { &gx };
        let base = (n * (n - 1) / 2) as i64 - tied_pairs(groups);
        let dist = inversion_distribution(groups);
        let total: u128 = dist.iter().sum();
        let extreme: u128 = dist
            .iter()
            .enumerate()
            .filter(|&(inv, _)| (base - 2 * inv as i64).abs() >= observed.abs())
            .map(|(_, &c)| c)
            .sum();
        return extreme as f64 / total as f64;
    }
    let mut perm = y.to_vec();
    let (mut extreme, mut total) = (0u64, 0u64);
    let mut visit = |p: &[f64]| {
        total += 1;
        if score(x, p).abs() >= observed.abs() {
            extreme += 1;
        }
    };
    heap_permutations(&mut perm, &mut visit);
    extreme as f64 / total as f64
}

/// Visits every permutation of `v` (Heap's algorithm, iterative).
pub(crate) fn heap_permutations<T>(v: &mut [T], visit: &mut impl FnMut(&[T])) {
    let n = v.len();
    let mut c = vec![0usize; n];
    visit(v);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            visit(v);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn normal_p_value(x: &[f64], y: &[f64], s: i64) -> f64 {
    let n = x.len() as f64;
    let (gx, gy) = (tie_groups(x), tie_groups(y));
    let sum = |g: &[usize], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t as f64)).sum::<f64>();
    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt = sum(&gx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&gy, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&gx, &|t| t * (t - 1.0)) * sum(&gy, &|t| t * (t - 1.0));
    let v2 = sum(&gx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&gy, &|t| t * (t - 1.0) * (t - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 / (2.0 * n * (n - 1.0)) + v2 / (9.0 * n * (n - 1.0) * (n - 2.0));
    let z = s as f64 / var.sqrt();
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Tau-b trend of `values` against `x` with a two-sided p-value, judged at
/// [`BONFERRONI_ALPHA`].
pub fn kendall_tau_trend(x: &[f64], values: &[f64]) -> Result<KendallTrend> {
    if x.len() < 4 {
        return Err(Error::Config(format!(
            "a trend test needs at least 4 points, got {}",
            x.len()
        )));
    }
    let (tau, s) = kendall_tau_b(x, values)?;
    let (p_value, method) = if x.len() <= EXACT_MAX_N {
        (exact_p_value(x, values, s), PValueMethod::Exact)
    } else {
        (normal_p_value(x, values, s), PValueMethod::Normal)
    };
    Ok(KendallTrend {
        tau,
        p_value,
        significant: p_value < BONFERRONI_ALPHA,
        score: s,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_trends() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = kendall_tau_trend(&x, &[0.1, 0.2, 0.5, 0.7, 0.9]).unwrap();
        assert_eq!(up.tau, 1.0);
        // Only the identity and its reverse reach |S| = 10: 2/120.
        assert!((up.p_value - 2.0 / 120.0).abs() < 1e-15);
        let down = kendall_tau_trend(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(down.tau, -1.0);
    }

    #[test]
    fn constant_metric_is_undefined() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(kendall_tau_trend(&x, &[0.5; 4]), Err(Error::Undefined(_))));
        assert!(kendall_tau_trend(&x[..3], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn threshold_is_bonferroni() {
        assert_eq!(BONFERRONI_ALPHA, 0.05 / 7.0);
        assert!((BONFERRONI_ALPHA - 0.0071).abs() < 5e-5);
    }

    #[test]
    fn inversion_distribution_matches_mahonian_numbers() {
        assert_eq!(inversion_distribution(&[1, 1, 1]), vec![1, 2, 2, 1]);
        // Multiset {a, a, b}: aab (0), aba (1), baa (2).
        assert_eq!(inversion_distribution(&[2, 1]), vec![1, 1, 1]);
        let total: u128 = inversion_distribution(&[1; 8]).iter().sum();
        assert_eq!(total, 40320);
    }

    #[test]
    fn normal_approximation_for_large_samples() {
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let y = [3.0, 1.0, 2.0, 5.0, 4.0, 6.0, 8.0, 7.0, 0.0, 9.0, 11.0, 10.0];
        let t = kendall_tau_trend(&x, &y).unwrap();
        assert_eq!(t.method, PValueMethod::Normal);
        // z = S / sqrt(12·11·29/18)
        let z = t.score as f64 / (12.0f64 * 11.0 * 29.0 / 18.0).sqrt();
        assert!((t.p_value - erfc(z / std::f64::consts::SQRT_2)).abs() < 1e-15);
    }
}
