//! Small statistical helpers used by diagnostics and test oracles:
//! moments, Pearson correlation, a two-sample Kolmogorov–Smirnov test, and a
//! dip-style multimodality statistic with Monte-Carlo calibration.

use rand::Rng;

use crate::rng;

/// Arithmetic mean; 0.0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (ddof = 1); 0.0 when fewer than two points.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample standard deviation (ddof = 1).
pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Standard error of the mean.
pub fn std_err(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Pearson correlation coefficient; 0.0 when either side is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "pearson: length mismatch");
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Two-sample Kolmogorov–Smirnov test. Returns `(statistic, p_value)` with
/// the usual asymptotic p-value approximation.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty(), "ks_two_sample: empty sample");
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let (x, y) = (xs[i], ys[j]);
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let f1 = i as f64 / n1;
        let f2 = j as f64 / n2;
        d = d.max((f1 - f2).abs());
    }
    let ne = (n1 * n2 / (n1 + n2)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    (d, ks_tail(lambda))
}

/// Asymptotic tail probability Q_KS(λ) = 2 Σ (−1)^{k−1} exp(−2 k² λ²).
fn ks_tail(lambda: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Dip-style multimodality statistic: the smallest, over candidate modal
/// points, of the larger sup-gap between the empirical CDF and its greatest
/// convex minorant (left of the mode) / least concave majorant (right of the
/// mode), halved. Near zero for unimodal samples, large for well-separated
/// mixtures. Calibrate significance with [`dip_p_value`].
pub fn dip_statistic(xs: &[f64]) -> f64 {
    let n = xs.len();
    assert!(n >= 4, "dip_statistic: need at least 4 points");
    let mut s = xs.to_vec();
    s.sort_by(|p, q| p.total_cmp(q));
    let left = prefix_convex_gaps(&s, false);
    let right = prefix_convex_gaps(&s, true);
    let mut dip = f64::INFINITY;
    for m in 0..n {
        let g = left[m].max(right[n - 1 - m]);
        dip = dip.min(g);
    }
    dip / 2.0
}

/// For each prefix end m, the max vertical gap between the empirical CDF
/// staircase and the greatest convex minorant of the prefix. With
/// `mirrored`, computes the concave-majorant gaps of suffixes instead (by
/// reflecting the data), so index m refers to the suffix starting at
/// `n-1-m`.
fn prefix_convex_gaps(sorted: &[f64], mirrored: bool) -> Vec<f64> {
    let n = sorted.len();
    // Points of the CDF's lower staircase corners: (x_i, i/n); the upper
    // corner at x_i is (i+1)/n. The convex minorant hugs the lower corners;
    // gaps are measured to the upper corners.
    let pt = |i: usize| -> (f64, f64) {
        if mirrored {
            // Reflect x -> -x and F -> 1-F: the concave majorant of the
            // suffix becomes the convex minorant of the reflected prefix.
            (-sorted[n - 1 - i], i as f64 / n as f64)
        } else {
            (sorted[i], i as f64 / n as f64)
        }
    };
    let mut hull: Vec<usize> = Vec::with_capacity(n); // indices into 0..n of lower-hull vertices
    let mut gaps = vec![0.0; n];
    for m in 0..n {
        let (xm, ym) = pt(m);
        while hull.len() >= 2 {
            let (x1, y1) = pt(hull[hull.len() - 2]);
            let (x2, y2) = pt(hull[hull.len() - 1]);
            // Pop while the middle point is not strictly below the chord.
            if (x2 - x1) * (ym - y1) - (y2 - y1) * (xm - x1) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(m);
        // Max gap between upper staircase corners and the hull over 0..=m.
        let mut gap: f64 = 0.0;
        let mut seg = 0usize;
        for i in 0..=m {
            let (xi, _) = pt(i);
            while seg + 1 < hull.len() && pt(hull[seg + 1]).0 < xi {
                seg += 1;
            }
            let (x1, y1) = pt(hull[seg]);
            let hull_y = if seg + 1 < hull.len() {
                let (x2, y2) = pt(hull[seg + 1]);
                if x2 > x1 { y1 + (y2 - y1) * (xi - x1) / (x2 - x1) } else { y1 }
            } else {
                y1
            };
            let upper = (i + 1) as f64 / n as f64;
            gap = gap.max(upper - hull_y);
        }
        gaps[m] = gap;
    }
    gaps
}

/// Monte-Carlo p-value for [`dip_statistic`] against the uniform null
/// (the standard calibration for dip tests), with `b` simulations.
pub fn dip_p_value(xs: &[f64], b: usize, seed: u64) -> f64 {
    let d_obs = dip_statistic(xs);
    let n = xs.len();
    let mut rng = rng::stream(seed, "dip-null");
    let mut ge = 0usize;
    for _ in 0..b {
        let sample: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        if dip_statistic(&sample) >= d_obs {
            ge += 1;
        }
    }
    (1 + ge) as f64 / (b + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn moments_on_known_sample() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((mean(&xs) - 2.5).abs() < 1e-12);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_of_linear_relation_is_one() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((pearson(&xs, &ys) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_same_distribution_not_rejected() {
        let mut r = crate::rng::stream(11, "ks-same");
        let a: Vec<f64> = (0..800).map(|_| { let v: f64 = StandardNormal.sample(&mut r); v }).collect();
        let b: Vec<f64> = (0..800).map(|_| { let v: f64 = StandardNormal.sample(&mut r); v }).collect();
        let (_, p) = ks_two_sample(&a, &b);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn ks_shifted_distribution_rejected() {
        let mut r = crate::rng::stream(12, "ks-shift");
        let a: Vec<f64> = (0..800).map(|_| { let v: f64 = StandardNormal.sample(&mut r); v }).collect();
        let b: Vec<f64> = (0..800).map(|_| 1.0 + { let v: f64 = StandardNormal.sample(&mut r); v }).collect();
        let (_, p) = ks_two_sample(&a, &b);
        assert!(p < 0.01, "p = {p}");
    }

    #[test]
    fn dip_separates_bimodal_from_unimodal() {
        let mut r = crate::rng::stream(13, "dip");
        let unimodal: Vec<f64> = (0..600).map(|_| { let v: f64 = StandardNormal.sample(&mut r); v }).collect();
        let bimodal: Vec<f64> = (0..600)
            .map(|_| {
                let side = if r.gen::<bool>() { 4.0 } else { -4.0 };
                side + { let v: f64 = StandardNormal.sample(&mut r); v } * 0.5
            })
            .collect();
        assert!(dip_statistic(&bimodal) > 3.0 * dip_statistic(&unimodal));
        assert!(dip_p_value(&bimodal, 200, 5) < 0.01);
        assert!(dip_p_value(&unimodal, 200, 5) > 0.05);
    }
}
