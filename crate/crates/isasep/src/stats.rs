//! Small statistical helpers: two-sample Kolmogorov-Smirnov statistic and
//! its large-sample critical value.

/// Two-sample KS statistic: sup over x of |F_a(x) - F_b(x)|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "KS needs nonempty samples");
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        worst = worst.max((i as f64 / n - j as f64 / m).abs());
    }
    worst
}

/// Large-sample two-sample critical value at level `alpha`:
/// c(alpha) * sqrt((n + m) / (n * m)) with c = sqrt(-ln(alpha/2) / 2).
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0);
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand::RngExt;
    use rand_distr::StandardNormal;

    #[test]
    fn identical_samples_have_zero_statistic() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
    }

    #[test]
    fn disjoint_samples_have_unit_statistic() {
        let a = [0.0, 1.0];
        let b = [5.0, 6.0];
        assert_eq!(ks_statistic(&a, &b), 1.0);
    }

    #[test]
    fn same_distribution_stays_below_critical() {
        let mut rng = RngSeed::new(1).rng();
        let n = 5000;
        let a: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        assert!(ks_statistic(&a, &b) < ks_critical(n, n, 0.01));
    }

    #[test]
    fn shifted_distribution_exceeds_critical() {
        let mut rng = RngSeed::new(2).rng();
        let n = 5000;
        let a: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + 0.3).collect();
        assert!(ks_statistic(&a, &b) > ks_critical(n, n, 0.01));
    }

    #[test]
    fn critical_value_matches_tabulated_constant() {
        // c(0.01) = 1.6276 for the asymptotic two-sample test
        let crit = ks_critical(10_000, 10_000, 0.01);
        let c = crit / ((20_000f64) / (10_000f64 * 10_000f64)).sqrt();
        assert!((c - 1.6276).abs() < 1e-3, "c = {c}");
    }
}
