//! Distances between discrete distributions, linear and circular.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Accepted deviation of a distribution's mass from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("distribution entries must be finite and non-negative"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(invalid("distribution must sum to 1"));
    }
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.is_empty() || p.len() != q.len() {
        return Err(invalid("distributions must be non-empty and of equal length"));
    }
    check_distribution(p)?;
    check_distribution(q)
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * libm::log2(pi / mi))
        .sum()
}

/// Jensen–Shannon divergence with base-2 logarithms, in `[0, 1]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * kl_to_mixture(p, &m) + 0.5 * kl_to_mixture(q, &m);
    Ok(js.clamp(0.0, 1.0))
}

/// Bhattacharyya distance `−ln Σ √(p q)`; disjoint supports give `+∞`.
pub fn bhattacharyya(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let bc: f64 = p.iter().zip(q).map(|(a, b)| libm::sqrt(a * b)).sum();
    if bc <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((-libm::log(bc)).max(0.0))
}

/// W1 between two distributions on a strictly increasing support, via the
/// integrated absolute CDF difference.
pub fn wasserstein_1d(support: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    if support.len() != p.len() {
        return Err(invalid("support length must match the distributions"));
    }
    if support.windows(2).any(|w| !(w[1] > w[0])) || support.iter().any(|v| !v.is_finite()) {
        return Err(invalid("support must be finite and strictly increasing"));
    }
    Ok(cdf_distance(support, p, q))
}

fn cdf_distance(support: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let (mut fp, mut fq, mut w) = (0.0, 0.0, 0.0);
    for i in 0..support.len().saturating_sub(1) {
        fp += p[i];
        fq += q[i];
        w += (fp - fq).abs() * (support[i + 1] - support[i]);
    }
    w
}

/// W1 between the empirical distributions of two samples.
pub fn wasserstein_samples(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("samples must be non-empty"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (wa, wb) = (1.0 / sa.len() as f64, 1.0 / sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut prev = f64::min(sa[0], sb[0]);
    let mut w = 0.0;
    while i < sa.len() || j < sb.len() {
        let next = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        w += (fa - fb).abs() * (next - prev);
        while i < sa.len() && sa[i] == next {
            fa += wa;
            i += 1;
        }
        while j < sb.len() && sb[j] == next {
            fb += wb;
            j += 1;
        }
        prev = next;
    }
    Ok(w)
}

/// W1 on the circle between two distributions over `B` equal angular bins,
/// in degrees: the smallest linear W1 over the `B` cyclic cut points.
pub fn circular_wasserstein(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let n = p.len();
    let spacing = 360.0 / n as f64;
    let support: Vec<f64> = (0..n).map(|i| i as f64 * spacing).collect();
    let mut rp = vec![0.0; n];
    let mut rq = vec![0.0; n];
    let mut best = f64::INFINITY;
    for cut in 0..n {
        for i in 0..n {
            rp[i] = p[(cut + i) % n];
            rq[i] = q[(cut + i) % n];
        }
        best = best.min(cdf_distance(&support, &rp, &rq));
    }
    Ok(best)
}

fn circular_mean(angles: &[f64]) -> f64 {
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + libm::sin(*a), c + libm::cos(*a)));
    libm::atan2(s, c)
}

/// Circular correlation `Σ sin(aᵢ−ā) sin(bᵢ−b̄) / √(Σ sin²(aᵢ−ā) Σ sin²(bᵢ−b̄))`
/// with circular means `ā`, `b̄`.
pub fn circular_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(invalid("need two equal-length sequences of at least two angles"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("angles must be finite"));
    }
    let (ma, mb) = (circular_mean(a), circular_mean(b));
    let (mut num, mut sa, mut sb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (libm::sin(x - ma), libm::sin(y - mb));
        num += da * db;
        sa += da * da;
        sb += db * db;
    }
    let den = libm::sqrt(sa * sb);
    if !(den > 1e-12) {
        return Err(Error::UndefinedResult("angular spread is zero".into()));
    }
    Ok((num / den).clamp(-1.0, 1.0))
}

/// Histograms of two scalar samples over `bins` uniform bins spanning their
/// joint range. A zero-width range puts all mass in the first bin.
pub fn shared_range_histograms(a: &[f64], b: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.is_empty() || b.is_empty() || bins == 0 {
        return Err(invalid("samples and bin count must be non-empty"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    let hist = |xs: &[f64]| {
        let mut h = vec![0.0; bins];
        let w = 1.0 / xs.len() as f64;
        for &x in xs {
            let i = if width > 0.0 {
                (libm::floor((x - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            };
            h[i] += w;
        }
        h
    };
    Ok((hist(a), hist(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn js_examples() {
        assert_eq!(js_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        let v = js_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        let expected = 0.5 * (0.5 * libm::log2(0.5 / 0.75) + 0.5 * libm::log2(2.0)) + 0.5 * libm::log2(1.0 / 0.75);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.311_278).abs() < 1e-6);
        assert!(js_divergence(&[0.5, 0.5], &[1.0]).is_err());
        assert!(js_divergence(&[0.5, 0.6], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn bhattacharyya_examples() {
        assert_eq!(bhattacharyya(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        let v = bhattacharyya(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((v - 0.346_573_590_279_972_6).abs() < 1e-12);
        assert_eq!(bhattacharyya(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn wasserstein_examples() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let p = [0.2, 0.1, 0.3, 0.1, 0.1, 0.2];
        assert_eq!(wasserstein_1d(&s, &p, &p).unwrap(), 0.0);
        let a = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(wasserstein_1d(&s, &a, &b).unwrap(), 5.0);
        assert_eq!(wasserstein_1d(&[0.0, 5.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 5.0);
        assert!(wasserstein_1d(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn sample_wasserstein() {
        assert_eq!(wasserstein_samples(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((wasserstein_samples(&[0.0, 1.0], &[2.0, 3.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((wasserstein_samples(&[0.0], &[1.0, 3.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn circular_wasserstein_examples() {
        let p = [0.1, 0.2, 0.0, 0.3, 0.1, 0.1, 0.1, 0.1];
        assert_eq!(circular_wasserstein(&p, &p).unwrap(), 0.0);
        let mut a = [0.0; 8];
        let mut b = [0.0; 8];
        a[1] = 1.0;
        b[3] = 1.0;
        assert!((circular_wasserstein(&a, &b).unwrap() - 90.0).abs() < 1e-12);
        let mut c = [0.0; 8];
        c[5] = 1.0;
        assert!((circular_wasserstein(&a, &c).unwrap() - 180.0).abs() < 1e-12);
        let mut d = [0.0; 8];
        d[7] = 1.0;
        assert!((circular_wasserstein(&a, &d).unwrap() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn circular_correlation_examples() {
        let a = [0.1, 1.2, -2.0, 2.9, -0.7, 0.4];
        assert!((circular_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((circular_correlation(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        let c = [PI / 3.0; 5];
        let other = [0.1, 0.5, 1.0, 2.0, 3.0];
        assert!(matches!(
            circular_correlation(&c, &other),
            Err(Error::UndefinedResult(_))
        ));
        assert!(circular_correlation(&[0.1], &[0.2]).is_err());
    }

    #[test]
    fn shared_range() {
        let (h1, h2) = shared_range_histograms(&[0.0, 1.0], &[0.5, 0.5], 2).unwrap();
        assert_eq!(h1, vec![0.5, 0.5]);
        assert_eq!(h2, vec![0.0, 1.0]);
        let (h1, h2) = shared_range_histograms(&[0.3], &[0.3, 0.3], 4).unwrap();
        assert_eq!((h1[0], h2[0]), (1.0, 1.0));
    }
}
