//! Finite-n identities of unperturbed Fréchet rows, checked against
//! oracles computed here from the marginal cdfs alone.

use winner_core::lab::samples::{argmax_draws, poisson_draws};
use winner_core::measures::{LimitMeasure, TailMeasure, WeightScheme};
use winner_core::point_process::{PlanarConfiguration, PoissonSpec};
use winner_core::rng::map_replicates;
use winner_core::stats::{ks_one_sample, mean_and_variance};
use winner_core::tail_models::TailModel;

/// `∫ f_j(x) Π_{i≠j} F_i(x) dx` for the scaled row `F_i(x) = exp(-s_i/x)`,
/// by composite Simpson after `x = v / (1 - v)`.
fn argmax_probabilities_by_quadrature(shares: &[f64]) -> Vec<f64> {
    let intervals = 20_000;
    let h = 1.0 / intervals as f64;
    let mut acc = vec![0.0; shares.len()];
    // The end points are evaluated just inside (0, 1).
    for k in 0..=intervals {
        let v = (k as f64 * h).clamp(1e-12, 1.0 - 1e-12);
        let x = v / (1.0 - v);
        let jacobian = 1.0 / ((1.0 - v) * (1.0 - v));
        let cdfs: Vec<f64> = shares.iter().map(|s| (-s / x).exp()).collect();
        let all: f64 = cdfs.iter().product();
        let w = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for (j, s) in shares.iter().enumerate() {
            if cdfs[j] == 0.0 {
                continue;
            }
            let density = s / (x * x) * cdfs[j];
            acc[j] += w * density * (all / cdfs[j]) * jacobian;
        }
    }
    acc.iter().map(|a| a * h / 3.0).collect()
}

#[test]
fn quadrature_confirms_the_argmax_law() {
    let model = TailModel::frechet(1.0, WeightScheme::Power { beta: 1.0 }).unwrap();
    let row = model.row(100).unwrap();
    let probs = argmax_probabilities_by_quadrature(row.shares());
    for (j, p) in probs.iter().enumerate() {
        let exact = (j + 1) as f64 / 5050.0;
        assert!((p - exact).abs() < 1e-8, "j={} quadrature {p} exact {exact}", j + 1);
    }
}

#[test]
fn argmax_index_frequencies_within_four_standard_errors() {
    let model = TailModel::frechet(1.0, WeightScheme::Power { beta: 1.0 }).unwrap();
    let reps = 200_000;
    let draws = argmax_draws(&model, 100, reps, 2024).unwrap();
    let mut counts = vec![0usize; 100];
    for a in &draws {
        counts[a.position] += 1;
    }
    for (j, &c) in counts.iter().enumerate() {
        let p = (j + 1) as f64 / 5050.0;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        let freq = c as f64 / reps as f64;
        assert!((freq - p).abs() < 4.0 * se, "j={} freq {freq} p {p}", j + 1);
    }
}

#[test]
fn max_law_holds_for_arbitrary_weights_and_alpha() {
    let weights = WeightScheme::Explicit { values: (1..=12).map(|j| 1.0 + (j as f64).sin().abs() * 5.0).collect() };
    let model = TailModel::frechet(2.5, weights).unwrap();
    let draws = argmax_draws(&model, 12, 50_000, 5).unwrap();
    let maxima: Vec<f64> = draws.iter().map(|a| a.height).collect();
    let ks = ks_one_sample(&maxima, |x| (-x.powf(-2.5)).exp()).unwrap();
    assert!(ks.p_value > 0.001, "{ks:?}");
}

#[test]
fn row_box_counts_match_the_binomial_mean() {
    // Count of points of row n in [t1, t2] x [a, ∞): a sum of independent
    // Bernoulli(1 - exp(-s_j a^{-α})).
    let model = TailModel::frechet(1.0, WeightScheme::Power { beta: 1.0 }).unwrap();
    let n = 200;
    let (t1, t2, a) = (0.25, 0.75, 0.3);
    let row = model.row(n).unwrap();
    let expected: f64 = (1..=n)
        .filter(|&j| (t1..=t2).contains(&(j as f64 / n as f64)))
        .map(|j| -(-row.shares()[j - 1] / a).exp_m1())
        .sum();
    let reps = 20_000;
    let counts: Vec<f64> = map_replicates(77, reps, |_, rng| {
        let config = PlanarConfiguration::from_row(&row.sample(rng)).unwrap();
        config.count_in(t1, t2, a, f64::INFINITY) as f64
    });
    let (mean, var) = mean_and_variance(&counts);
    let se = (var / reps as f64).sqrt();
    assert!((mean - expected).abs() < 4.0 * se, "mean {mean} expected {expected} se {se}");
}

#[test]
fn poisson_limit_counts_are_poisson() {
    let spec =
        PoissonSpec::with_default_truncation(LimitMeasure::power(1.0).unwrap(), TailMeasure::frechet(1.0).unwrap())
            .unwrap();
    let reps = 40_000;
    let configs = poisson_draws(&spec, reps, 99);
    // μ([0.2, 0.6]) γ([0.5, ∞)) = (0.36 - 0.04) · 2
    let lambda = 0.64;
    let counts: Vec<f64> = configs.iter().map(|c| c.count_in(0.2, 0.6, 0.5, f64::INFINITY) as f64).collect();
    let (mean, var) = mean_and_variance(&counts);
    let se_mean = (lambda / reps as f64).sqrt();
    let se_var = ((lambda + 2.0 * lambda * lambda) / reps as f64).sqrt();
    assert!((mean - lambda).abs() < 4.0 * se_mean, "mean {mean}");
    assert!((var - lambda).abs() < 4.0 * se_var, "var {var}");
    let empty = counts.iter().filter(|&&c| c == 0.0).count() as f64 / reps as f64;
    let p0 = (-lambda).exp();
    assert!((empty - p0).abs() < 4.0 * (p0 * (1.0 - p0) / reps as f64).sqrt(), "void {empty}");
}
