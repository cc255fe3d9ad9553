use ssat::predictor::prior::sample_headways;
use ssat::predictor::{lognormal_pdf, sample_prior, LatentGroup, PriorSpec, HEADWAY_MU, HEADWAY_SIGMA};
use statrs::distribution::{Continuous, ContinuousCDF, LogNormal};

/// Asymptotic Kolmogorov tail probability with the small-sample correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn headway_density_matches_closed_form() {
    let oracle = LogNormal::new(HEADWAY_MU, HEADWAY_SIGMA).unwrap();
    for x in [0.1, 0.5, 1.0706, 2.0, 5.0] {
        assert!((lognormal_pdf(x, HEADWAY_MU, HEADWAY_SIGMA) - oracle.pdf(x)).abs() < 1e-12);
    }
    assert!((lognormal_pdf(1.0706, HEADWAY_MU, HEADWAY_SIGMA) - 0.5759).abs() < 5e-4);
}

#[test]
fn headway_samples_follow_the_prior() {
    let xs: Vec<f64> = sample_headways(&PriorSpec::new(16), 20_000, 99);
    let oracle = LogNormal::new(HEADWAY_MU, HEADWAY_SIGMA).unwrap();
    let d = ks_statistic(xs, |x| oracle.cdf(x));
    assert!(ks_p_value(d, 20_000) > 0.01, "D = {d}");
}

#[test]
fn shifted_samples_fail_the_ks_test() {
    let xs: Vec<f64> = sample_headways::<f64>(&PriorSpec::new(16), 20_000, 99)
        .into_iter()
        .map(|x| x * 1.1)
        .collect();
    let oracle = LogNormal::new(HEADWAY_MU, HEADWAY_SIGMA).unwrap();
    let d = ks_statistic(xs, |x| oracle.cdf(x));
    assert!(ks_p_value(d, 20_000) < 0.01, "D = {d}");
}

#[test]
fn intention_prior_is_one_hot_with_configured_rates() {
    let spec = PriorSpec::new(4).with_lat_counts([7, 1, 1]);
    let mut counts = [0usize; 3];
    for seed in 0..6000 {
        let s: Vec<f64> = sample_prior(&spec, LatentGroup::Lat, seed);
        assert_eq!(s.iter().filter(|v| **v == 1.0).count(), 1);
        assert_eq!(s.iter().sum::<f64>(), 1.0);
        counts[s.iter().position(|v| *v == 1.0).unwrap()] += 1;
    }
    // Laplace-smoothed: (8, 2, 2) / 12
    let expected = [8.0 / 12.0, 2.0 / 12.0, 2.0 / 12.0];
    for (c, e) in counts.iter().zip(expected) {
        assert!((*c as f64 / 6000.0 - e).abs() < 0.02);
    }
}

#[test]
fn other_prior_is_standard_normal() {
    let spec = PriorSpec::new(16);
    let xs: Vec<f64> = (0..400)
        .flat_map(|seed| sample_prior::<f64>(&spec, LatentGroup::Other, seed))
        .collect();
    assert_eq!(xs.len(), 6400);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    assert!(mean.abs() < 0.05 && (var - 1.0).abs() < 0.07, "{mean} {var}");
}
