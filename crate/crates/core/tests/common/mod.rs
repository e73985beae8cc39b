#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use xorlab::{FieldElement, FieldSpec, SparseMatrix};

pub fn gf(q: u64) -> Arc<FieldSpec> {
    Arc::new(FieldSpec::new(q).unwrap())
}

/// Dense random matrix; each entry nonzero with probability `fill`.
pub fn random_matrix<R: Rng>(
    field: &Arc<FieldSpec>,
    rows: usize,
    cols: usize,
    fill: f64,
    rng: &mut R,
) -> SparseMatrix {
    let q = field.q();
    let dense: Vec<Vec<u32>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.gen_bool(fill) {
                        rng.gen_range(1..q)
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    SparseMatrix::from_rows(field.clone(), cols, to_rows(&dense)).unwrap()
}

fn to_rows(dense: &[Vec<u32>]) -> Vec<Vec<(usize, FieldElement)>> {
    dense
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(|(j, &v)| (j, FieldElement(v)))
                .collect()
        })
        .collect()
}

/// Every vector of `F_q^n`, in odometer order.
pub fn all_vectors(q: u32, n: usize) -> Vec<Vec<FieldElement>> {
    let total = (q as usize).pow(n as u32);
    (0..total)
        .map(|mut x| {
            (0..n)
                .map(|_| {
                    let v = (x % q as usize) as u32;
                    x /= q as usize;
                    FieldElement(v)
                })
                .collect()
        })
        .collect()
}

pub fn dot(f: &FieldSpec, row: &[(usize, FieldElement)], v: &[FieldElement]) -> FieldElement {
    row.iter().fold(FieldElement::ZERO, |acc, &(j, c)| {
        f.add(acc, f.mul(c, v[j]))
    })
}

pub fn in_kernel(a: &SparseMatrix, v: &[FieldElement]) -> bool {
    a.rows().iter().all(|r| dot(a.field(), r, v).is_zero())
}

/// The kernel by exhaustive enumeration.
pub fn brute_kernel(a: &SparseMatrix) -> Vec<Vec<FieldElement>> {
    all_vectors(a.field().q(), a.n_cols())
        .into_iter()
        .filter(|v| in_kernel(a, v))
        .collect()
}

pub fn brute_frozen(a: &SparseMatrix) -> Vec<usize> {
    let ker = brute_kernel(a);
    (0..a.n_cols())
        .filter(|&j| ker.iter().all(|v| v[j].is_zero()))
        .collect()
}

/// Some `y` gives `y^T A` with non-empty support inside `cols`.
pub fn brute_is_relation(a: &SparseMatrix, cols: &[usize]) -> bool {
    let f = a.field();
    let mut inside = vec![false; a.n_cols()];
    for &c in cols {
        inside[c] = true;
    }
    all_vectors(f.q(), a.n_rows()).into_iter().any(|y| {
        let mut comb = vec![FieldElement::ZERO; a.n_cols()];
        for (i, row) in a.rows().iter().enumerate() {
            for &(j, c) in row {
                comb[j] = f.add(comb[j], f.mul(y[i], c));
            }
        }
        let support: Vec<usize> = (0..a.n_cols()).filter(|&j| !comb[j].is_zero()).collect();
        !support.is_empty() && support.iter().all(|&j| inside[j])
    })
}

/// Rank by plain Gaussian elimination on a dense copy.
pub fn naive_rank(a: &SparseMatrix) -> usize {
    let f = a.field();
    let mut m: Vec<Vec<FieldElement>> = a
        .to_dense()
        .into_iter()
        .map(|r| r.into_iter().map(FieldElement).collect())
        .collect();
    let mut rank = 0;
    for c in 0..a.n_cols() {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = f.inv(m[rank][c]).unwrap();
        for r in 0..m.len() {
            if r != rank && !m[r][c].is_zero() {
                let factor = f.mul(m[r][c], inv);
                for j in 0..a.n_cols() {
                    let sub = f.mul(factor, m[rank][j]);
                    m[r][j] = f.sub(m[r][j], sub);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// A matrix whose Tanner graph is a forest: every check joins variables from
/// distinct components. Unary pinning rows are appended.
pub fn random_tree_instance<R: Rng>(field: &Arc<FieldSpec>, n: usize, rng: &mut R) -> SparseMatrix {
    let mut comp: Vec<usize> = (0..n).collect();
    fn root(comp: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while comp[r] != r {
            r = comp[r];
        }
        comp[x] = r;
        r
    }
    let q = field.q();
    let mut rows = Vec::new();
    let checks = rng.gen_range(0..n);
    for _ in 0..checks {
        let w = rng.gen_range(2..=4usize);
        let mut chosen: Vec<usize> = Vec::new();
        let mut roots: Vec<usize> = Vec::new();
        for _ in 0..4 * w {
            let v = rng.gen_range(0..n);
            let r = root(&mut comp, v);
            if !roots.contains(&r) {
                roots.push(r);
                chosen.push(v);
            }
            if chosen.len() == w {
                break;
            }
        }
        if chosen.len() < 2 {
            continue;
        }
        for &r in &roots[1..] {
            comp[r] = roots[0];
        }
        chosen.sort_unstable();
        rows.push(
            chosen
                .into_iter()
                .map(|j| (j, FieldElement(rng.gen_range(1..q))))
                .collect(),
        );
    }
    for _ in 0..rng.gen_range(0..=3) {
        rows.push(vec![(rng.gen_range(0..n), FieldElement::ONE)]);
    }
    SparseMatrix::from_rows(field.clone(), n, rows).unwrap()
}

/// `Φ_{d,k}(α) − Φ_{d,k}(0)` written out independently of the library.
fn potential_excess(d: f64, k: i32, a: f64) -> f64 {
    let kf = k as f64;
    (-d * a.powi(k - 1)).exp() - 1.0 + d * a.powi(k - 1) - d * (kf - 1.0) / kf * a.powi(k)
}

/// `d_k` by bisection on a dense-grid maximum of `Φ` over `α ∈ [0.01, 1]`.
pub fn oracle_dk(k: i32) -> f64 {
    let grid: Vec<f64> = (0..=200_000)
        .map(|i| 0.01 + 0.99 * i as f64 / 200_000.0)
        .collect();
    let above = |d: f64| grid.iter().any(|&a| potential_excess(d, k, a) > 0.0);
    let (mut lo, mut hi) = (1.0, k as f64);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `d_k* = min_α −ln(1−α)/α^{k−1}` on a dense grid refined by ternary search.
pub fn oracle_dk_star(k: i32) -> f64 {
    let g = |a: f64| -(1.0 - a).ln() / a.powi(k - 1);
    let steps = 100_000;
    let best = (1..steps)
        .min_by(|&i, &j| g(i as f64 / steps as f64).total_cmp(&g(j as f64 / steps as f64)))
        .unwrap();
    let (mut lo, mut hi) = (
        (best - 1) as f64 / steps as f64,
        (best + 1) as f64 / steps as f64,
    );
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) < g(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    g(0.5 * (lo + hi))
}

/// Zero-sum perturbation of the uniform distribution on `F_q`.
pub fn perturbed_uniform(q: usize, eps: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..q).map(|s| s as f64 - (q as f64 - 1.0) / 2.0).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    (0..q)
        .map(|s| 1.0 / q as f64 + eps * dir[s] / norm)
        .collect()
}
