//! Random instance generators.
//!
//! RNG stream consumption is part of the contract (streams are reproducible
//! across implementations given the same generator):
//! - a k-subset costs exactly k `gen_range` draws (Floyd's algorithm);
//! - a pinning row costs one `gen_range(0..n)` draw;
//! - the pin count `t` costs one `gen_range(1..=T)` draw, `T = ceil(ln n)`;
//! - a Poisson variate with mean <= 30 is drawn by inversion from a single
//!   uniform; larger means use PTRS rejection (two uniforms per attempt).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{FieldElement, FieldSpec};
use crate::spmat::{rank, Entry, SparseMatrix};
use crate::theory::ln_factorial;

/// Nonzero coefficients `𝔄_ij` copied into the support positions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientScheme {
    #[default]
    AllOnes,
    /// Independent uniform nonzero values, a pure function of `(seed, row, column)`.
    SeededNonzero(u64),
    /// Row `i` uses `table[i % len]`, column `j` reads entry `j % row_len`.
    ExplicitTable(Vec<Vec<u32>>),
}

impl CoefficientScheme {
    pub fn coefficient(&self, field: &FieldSpec, row: usize, col: usize) -> FieldElement {
        match self {
            CoefficientScheme::AllOnes => FieldElement::ONE,
            CoefficientScheme::SeededNonzero(seed) => {
                let h = splitmix64(
                    splitmix64(*seed)
                        ^ (row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                        ^ col as u64,
                );
                FieldElement(1 + (h % (field.q() as u64 - 1)) as u32)
            }
            CoefficientScheme::ExplicitTable(table) => {
                let r = &table[row % table.len()];
                FieldElement(r[col % r.len()])
            }
        }
    }

    fn validate(&self, field: &FieldSpec) -> Result<()> {
        if let CoefficientScheme::ExplicitTable(table) = self {
            if table.is_empty() || table.iter().any(Vec::is_empty) {
                return Err(Error::InvalidParams(
                    "explicit coefficient table must be non-empty".into(),
                ));
            }
            if table.iter().flatten().any(|&v| v == 0 || v >= field.q()) {
                return Err(Error::InvalidParams(
                    "explicit coefficients must be nonzero field elements".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Ensemble description. Exactly one of `m` (row count) and `d` (density,
/// `m = round(d n / k)`) is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default = "default_q")]
    pub q: u64,
    #[serde(default)]
    pub scheme: CoefficientScheme,
    #[serde(default)]
    pub seed: u64,
}

fn default_q() -> u64 {
    2
}

impl EnsembleParams {
    pub fn with_rows(n: usize, k: usize, m: usize, q: u64) -> Self {
        EnsembleParams {
            n,
            k,
            m: Some(m),
            d: None,
            q,
            scheme: CoefficientScheme::AllOnes,
            seed: 0,
        }
    }

    pub fn with_density(n: usize, k: usize, d: f64, q: u64) -> Self {
        EnsembleParams {
            n,
            k,
            m: None,
            d: Some(d),
            q,
            scheme: CoefficientScheme::AllOnes,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidParams(format!(
                "row weight k = {} must be >= 3",
                self.k
            )));
        }
        if self.k > self.n {
            return Err(Error::InvalidParams(format!(
                "row weight k = {} exceeds n = {}",
                self.k, self.n
            )));
        }
        match (self.m, self.d) {
            (Some(_), None) => {}
            (None, Some(d)) if d > 0.0 && d.is_finite() => {}
            (None, Some(d)) => {
                return Err(Error::InvalidParams(format!(
                    "density d = {d} must be positive"
                )))
            }
            _ => return Err(Error::InvalidParams("give exactly one of m and d".into())),
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        match (self.m, self.d) {
            (Some(m), _) => m,
            (None, Some(d)) => (d * self.n as f64 / self.k as f64).round() as usize,
            _ => 0,
        }
    }

    /// `d = k m / n`.
    pub fn density(&self) -> f64 {
        match (self.m, self.d) {
            (_, Some(d)) => d,
            (Some(m), None) => self.k as f64 * m as f64 / self.n as f64,
            _ => 0.0,
        }
    }

    pub fn field(&self) -> Result<Arc<FieldSpec>> {
        let field = FieldSpec::new(self.q)?;
        self.scheme.validate(&field)?;
        Ok(Arc::new(field))
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: `splitmix64(master ^ splitmix64(index))`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(master, index))
}

/// Uniform k-subset of `0..n` by Floyd's algorithm, sorted ascending.
pub fn k_subset<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for j in n - k..n {
        let t = rng.gen_range(0..=j);
        if chosen.contains(&t) {
            chosen.push(j);
        } else {
            chosen.push(t);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Poisson variate: inversion for `mean <= 30`, PTRS otherwise.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean <= 30.0 {
        let u: f64 = rng.gen();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut x = 0u64;
        while u > cdf && x < 10_000 {
            x += 1;
            p *= mean / x as f64;
            cdf += p;
            if p == 0.0 {
                break;
            }
        }
        return x;
    }
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -mean + k * loglam - ln_factorial(k as u64)
        {
            return k as u64;
        }
    }
}

fn weight_k_rows<R: Rng + ?Sized>(
    field: &FieldSpec,
    params: &EnsembleParams,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<Entry>> {
    (0..count)
        .map(|i| {
            k_subset(params.n, params.k, rng)
                .into_iter()
                .map(|j| (j, params.scheme.coefficient(field, i, j)))
                .collect()
        })
        .collect()
}

fn unary_rows<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<Vec<Entry>> {
    (0..count)
        .map(|_| vec![(rng.gen_range(0..n), FieldElement::ONE)])
        .collect()
}

/// Base ensemble: `m` independent rows, each supported on a uniform k-subset.
/// Rows are drawn in order, so a smaller `m` with the same stream yields a
/// prefix of the larger matrix.
pub fn gen_base<R: Rng + ?Sized>(params: &EnsembleParams, rng: &mut R) -> Result<SparseMatrix> {
    params.validate()?;
    let field = params.field()?;
    let rows = weight_k_rows(&field, params, params.rows(), rng);
    Ok(SparseMatrix::from_rows_unchecked(field, params.n, rows))
}

/// Appends `t` rows holding a single one in an independent uniform column.
pub fn pin<R: Rng + ?Sized>(a: &SparseMatrix, t: usize, rng: &mut R) -> SparseMatrix {
    if a.n_cols() == 0 {
        return a.clone();
    }
    let extra = unary_rows(a.n_cols(), t, rng);
    a.stack_rows(extra).expect("pinning rows are in range")
}

/// `T = ceil(ln n)` (natural logarithm), at least 1.
pub fn max_pins(n: usize) -> usize {
    ((n as f64).ln().ceil() as usize).max(1)
}

/// Base matrix followed by `t` pinning rows, `t` uniform in `1..=ceil(ln n)`.
pub fn gen_pinned<R: Rng + ?Sized>(
    params: &EnsembleParams,
    rng: &mut R,
) -> Result<(SparseMatrix, usize)> {
    if params.n < 2 {
        return Err(Error::InvalidParams("pinned ensemble needs n >= 2".into()));
    }
    let a = gen_base(params, rng)?;
    let t = rng.gen_range(1..=max_pins(params.n));
    Ok((pin(&a, t, rng), t))
}

/// Interpolating family: `Po((1-θ) d n / k)` weight-k rows, then
/// `Po(d θ α_f^{k-1} n)` unary rows, then pinning as in [`gen_pinned`].
pub fn gen_interpolated<R: Rng + ?Sized>(
    params: &EnsembleParams,
    theta: f64,
    alpha_f: f64,
    rng: &mut R,
) -> Result<SparseMatrix> {
    params.validate()?;
    if !(0.0..=1.0).contains(&theta) || !(0.0..=1.0).contains(&alpha_f) {
        return Err(Error::InvalidParams(format!(
            "theta = {theta} and alpha_f = {alpha_f} must lie in [0, 1]"
        )));
    }
    let field = params.field()?;
    let (n, k, d) = (params.n as f64, params.k as i32, params.density());
    let m_theta = poisson((1.0 - theta) * d * n / k as f64, rng) as usize;
    let m_unary = poisson(d * theta * alpha_f.powi(k - 1) * n, rng) as usize;
    let mut rows = weight_k_rows(&field, params, m_theta, rng);
    rows.extend(unary_rows(params.n, m_unary, rng));
    let a = SparseMatrix::from_rows_unchecked(field, params.n, rows);
    let t = rng.gen_range(1..=max_pins(params.n));
    Ok(pin(&a, t, rng))
}

/// Base matrix plus an independent uniform right-hand side.
pub fn xorsat_instance<R: Rng + ?Sized>(
    params: &EnsembleParams,
    rng: &mut R,
) -> Result<(SparseMatrix, Vec<FieldElement>)> {
    let a = gen_base(params, rng)?;
    let q = a.field().q();
    let y = (0..a.n_rows())
        .map(|_| FieldElement(rng.gen_range(0..q)))
        .collect();
    Ok((a, y))
}

/// `A σ = y` is solvable iff `rank(A) = rank(A | y)`.
pub fn is_solvable(a: &SparseMatrix, y: &[FieldElement]) -> Result<bool> {
    if y.len() != a.n_rows() {
        return Err(Error::InvalidParams(format!(
            "rhs has length {}, expected {}",
            y.len(),
            a.n_rows()
        )));
    }
    let n = a.n_cols();
    let rows = a
        .rows()
        .iter()
        .zip(y)
        .map(|(row, &v)| {
            let mut r = row.clone();
            if !v.is_zero() {
                r.push((n, v));
            }
            r
        })
        .collect();
    let augmented = SparseMatrix::from_rows_unchecked(a.field().clone(), n + 1, rows);
    Ok(rank(a) == rank(&augmented))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_rows_have_k_distinct_entries() {
        let mut rng = trial_rng(3, 0);
        let a = gen_base(&EnsembleParams::with_rows(5, 3, 2, 2), &mut rng).unwrap();
        assert_eq!(a.n_rows(), 2);
        for row in a.rows() {
            assert_eq!(row.len(), 3);
            assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            assert!(row.iter().all(|e| e.1 == FieldElement::ONE));
        }
    }

    #[test]
    fn empty_base_matrix() {
        let mut rng = trial_rng(3, 0);
        let a = gen_base(&EnsembleParams::with_rows(6, 3, 0, 2), &mut rng).unwrap();
        assert_eq!((a.n_rows(), a.n_cols()), (0, 6));
        assert_eq!(crate::spmat::nullity(&a), 6);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut rng = trial_rng(0, 0);
        assert!(gen_base(&EnsembleParams::with_rows(2, 3, 1, 2), &mut rng).is_err());
        assert!(gen_base(&EnsembleParams::with_rows(9, 2, 1, 2), &mut rng).is_err());
        assert!(gen_base(&EnsembleParams::with_rows(9, 3, 1, 6), &mut rng).is_err());
        let mut p = EnsembleParams::with_rows(9, 3, 1, 2);
        p.d = Some(1.0);
        assert!(p.validate().is_err());
        let mut p = EnsembleParams::with_rows(9, 3, 1, 3);
        p.scheme = CoefficientScheme::ExplicitTable(vec![vec![1, 0]]);
        assert!(gen_base(&p, &mut rng).is_err());
    }

    #[test]
    fn density_to_rows() {
        let p = EnsembleParams::with_density(2000, 3, 3.0 * 0.85, 2);
        assert_eq!(p.rows(), 1700);
        assert!((EnsembleParams::with_rows(100, 3, 50, 2).density() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn pinning_examples() {
        let mut rng = trial_rng(1, 1);
        let a = gen_base(&EnsembleParams::with_rows(10, 3, 4, 2), &mut rng).unwrap();
        assert_eq!(pin(&a, 0, &mut rng), a);
        let p = pin(&a, 5, &mut rng);
        assert_eq!(p.n_rows(), 9);
        assert!(p.rows()[4..]
            .iter()
            .all(|r| r.len() == 1 && r[0].1 == FieldElement::ONE));
    }

    #[test]
    fn pinned_counts() {
        assert_eq!(max_pins(2), 1);
        assert_eq!(max_pins(10_000), 10);
        assert!(gen_pinned(&EnsembleParams::with_rows(1, 3, 0, 2), &mut trial_rng(0, 0)).is_err());
    }

    #[test]
    fn pinned_matrix_row_count() {
        for s in 0..20 {
            let mut rng = trial_rng(s, 7);
            let params = EnsembleParams::with_rows(50, 3, 20, 3);
            let (a, t) = gen_pinned(&params, &mut rng).unwrap();
            assert!((1..=4).contains(&t));
            assert_eq!(a.n_rows(), 20 + t);
        }
    }

    #[test]
    fn seeded_nonzero_coefficients() {
        let f = FieldSpec::new(5).unwrap();
        let s = CoefficientScheme::SeededNonzero(11);
        let mut seen = [false; 5];
        for i in 0..50 {
            for j in 0..10 {
                let c = s.coefficient(&f, i, j);
                assert!(!c.is_zero() && c.0 < 5);
                assert_eq!(c, s.coefficient(&f, i, j));
                seen[c.0 as usize] = true;
            }
        }
        assert_eq!(seen, [false, true, true, true, true]);
    }

    #[test]
    fn determinism() {
        let mut p = EnsembleParams::with_density(300, 4, 2.0, 4);
        p.scheme = CoefficientScheme::SeededNonzero(5);
        let a = gen_base(&p, &mut trial_rng(9, 2)).unwrap();
        let b = gen_base(&p, &mut trial_rng(9, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_base(&p, &mut trial_rng(9, 3)).unwrap());
    }

    #[test]
    fn prefix_sharing() {
        let big = gen_base(
            &EnsembleParams::with_rows(100, 3, 80, 2),
            &mut trial_rng(4, 4),
        )
        .unwrap();
        let small = gen_base(
            &EnsembleParams::with_rows(100, 3, 50, 2),
            &mut trial_rng(4, 4),
        )
        .unwrap();
        assert_eq!(&big.rows()[..50], small.rows());
    }

    #[test]
    fn xorsat_rhs() {
        let (a, y) = xorsat_instance(
            &EnsembleParams::with_rows(10, 3, 0, 2),
            &mut trial_rng(0, 0),
        )
        .unwrap();
        assert!(y.is_empty());
        assert!(is_solvable(&a, &y).unwrap());
        let (a, y) = xorsat_instance(
            &EnsembleParams::with_rows(40, 3, 10, 3),
            &mut trial_rng(0, 1),
        )
        .unwrap();
        assert_eq!(y.len(), 10);
        if rank(&a) == 10 {
            assert!(is_solvable(&a, &y).unwrap());
        }
        assert!(is_solvable(&a, &[FieldElement(1)]).is_err());
    }

    #[test]
    fn poisson_means() {
        let mut rng = trial_rng(5, 5);
        for mean in [0.5, 3.0, 25.0, 40.0, 500.0] {
            let draws = 20_000;
            let s: u64 = (0..draws).map(|_| poisson(mean, &mut rng)).sum();
            let avg = s as f64 / draws as f64;
            assert!(
                (avg - mean).abs() < 4.0 * (mean / draws as f64).sqrt() + 1e-9,
                "mean {mean}: {avg}"
            );
        }
        assert_eq!(poisson(0.0, &mut rng), 0);
    }
}
