mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use xorlab::ensemble::{
    gen_base, gen_interpolated, gen_pinned, max_pins, pin, trial_rng, CoefficientScheme,
    EnsembleParams,
};
use xorlab::spmat::nullity;
use xorlab::theory::poisson_pmf;

fn chi2_p(counts: &[usize], expected: f64) -> f64 {
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64)
        .unwrap()
        .cdf(stat)
}

#[test]
fn column_degrees_are_close_to_poisson() {
    let params = EnsembleParams::with_density(10_000, 3, 2.5, 2);
    let a = gen_base(&params, &mut trial_rng(1, 0)).unwrap();
    let degs = a.col_degrees();
    let mut hist = vec![0usize; 40];
    for d in degs {
        hist[d.min(39)] += 1;
    }
    let tv: f64 = 0.5
        * hist
            .iter()
            .enumerate()
            .map(|(j, &c)| (c as f64 / 1e4 - poisson_pmf(2.5, j as u64)).abs())
            .sum::<f64>();
    assert!(tv < 0.03, "total variation {tv}");
}

#[test]
fn row_supports_are_uniform() {
    let params = EnsembleParams::with_rows(6, 3, 100_000, 2);
    let a = gen_base(&params, &mut trial_rng(2, 0)).unwrap();
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for row in a.rows() {
        assert_eq!(row.len(), 3);
        *counts
            .entry(row.iter().map(|&(j, _)| j).collect())
            .or_default() += 1;
    }
    assert_eq!(counts.len(), 20);
    let counts: Vec<usize> = counts.into_values().collect();
    assert!(chi2_p(&counts, 5000.0) > 1e-3);
}

#[test]
fn seeded_coefficients_are_uniform_nonzero() {
    let mut params = EnsembleParams::with_rows(50, 3, 20_000, 5);
    params.scheme = CoefficientScheme::SeededNonzero(99);
    let a = gen_base(&params, &mut trial_rng(3, 0)).unwrap();
    let mut counts = vec![0usize; 4];
    for row in a.rows() {
        for &(_, c) in row {
            counts[c.0 as usize - 1] += 1;
        }
    }
    assert!(chi2_p(&counts, 15_000.0) > 1e-3);
}

#[test]
fn pins_hit_uniform_columns() {
    let n = 30;
    let base = EnsembleParams::with_rows(n, 3, 0, 2);
    let empty = gen_base(&base, &mut trial_rng(4, 0)).unwrap();
    let pinned = pin(&empty, 30_000, &mut ChaCha8Rng::seed_from_u64(4));
    let mut counts = vec![0usize; n];
    for row in pinned.rows() {
        assert_eq!(row.len(), 1);
        assert_eq!(row[0].1 .0, 1);
        counts[row[0].0] += 1;
    }
    assert!(chi2_p(&counts, 1000.0) > 1e-3);
}

#[test]
fn pin_count_covers_its_range() {
    let params = EnsembleParams::with_density(1000, 3, 2.0, 2);
    let cap = max_pins(1000);
    assert_eq!(cap, 7);
    let mut seen = vec![false; cap + 1];
    for i in 0..200 {
        let (a, t) = gen_pinned(&params, &mut trial_rng(5, i)).unwrap();
        assert!((1..=cap).contains(&t));
        assert_eq!(a.n_rows(), params.rows() + t);
        seen[t] = true;
    }
    assert!(seen[1..].iter().all(|&s| s));
}

#[test]
fn theta_one_nullity_counts_empty_columns() {
    let params = EnsembleParams::with_density(2000, 3, 3.0, 3);
    for i in 0..5 {
        let a = gen_interpolated(&params, 1.0, 0.9, &mut trial_rng(6, i)).unwrap();
        assert!(a.rows().iter().all(|r| r.len() == 1));
        let empty = a.col_degrees().iter().filter(|&&d| d == 0).count();
        assert_eq!(nullity(&a), empty);
    }
}

proptest! {
    #[test]
    fn fewer_rows_is_a_prefix(seed in any::<u64>(), n in 3usize..60, m in 0usize..40, extra in 0usize..20) {
        let small = gen_base(&EnsembleParams::with_rows(n, 3, m, 3), &mut trial_rng(seed, 0)).unwrap();
        let large = gen_base(&EnsembleParams::with_rows(n, 3, m + extra, 3), &mut trial_rng(seed, 0)).unwrap();
        prop_assert_eq!(small.rows(), &large.rows()[..m]);
    }
}
