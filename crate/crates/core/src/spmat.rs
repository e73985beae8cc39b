//! Row-sparse matrices over GF(q) and exact elimination on top of them.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;
use statrs::function::factorial::binomial;

use crate::dense::{dense_for, DenseRows};
use crate::error::{Error, Result};
use crate::galois::{FieldElement, FieldSpec};

pub type Entry = (usize, FieldElement);

/// Row-sparse matrix: each row is a strictly increasing list of
/// `(column, nonzero value)` pairs.
#[derive(Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    n_cols: usize,
    rows: Vec<Vec<Entry>>,
    field: Arc<FieldSpec>,
}

impl fmt::Debug for SparseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SparseMatrix({}x{} over GF({}))",
            self.n_rows(),
            self.n_cols,
            self.field.q()
        )?;
        if self.n_rows() <= 16 && self.n_cols <= 32 {
            for row in &self.rows {
                write!(
                    f,
                    "\n  {:?}",
                    row.iter().map(|&(c, v)| (c, v.0)).collect::<Vec<_>>()
                )?;
            }
        }
        Ok(())
    }
}

impl SparseMatrix {
    pub fn zeros(field: Arc<FieldSpec>, n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            rows: vec![Vec::new(); n_rows],
            field,
        }
    }

    pub fn identity(field: Arc<FieldSpec>, n: usize) -> Self {
        let rows = (0..n).map(|i| vec![(i, FieldElement::ONE)]).collect();
        SparseMatrix {
            n_cols: n,
            rows,
            field,
        }
    }

    /// Validates and normalises rows: entries are sorted, zero values dropped,
    /// repeated columns rejected.
    pub fn from_rows(field: Arc<FieldSpec>, n_cols: usize, rows: Vec<Vec<Entry>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|row| normalize_row(&field, n_cols, row))
            .collect::<Result<Vec<_>>>()?;
        Ok(SparseMatrix {
            n_cols,
            rows,
            field,
        })
    }

    /// Dense constructor for small matrices and tests; values are canonical integers.
    pub fn from_dense(field: Arc<FieldSpec>, dense: &[Vec<u32>]) -> Result<Self> {
        let n_cols = dense.first().map_or(0, Vec::len);
        let rows = dense
            .iter()
            .map(|r| {
                if r.len() != n_cols {
                    return Err(Error::InvalidParams("ragged dense matrix".into()));
                }
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(c, &v)| Ok((c, field.element(v)?)))
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SparseMatrix {
            n_cols,
            rows,
            field,
        })
    }

    pub(crate) fn from_rows_unchecked(
        field: Arc<FieldSpec>,
        n_cols: usize,
        rows: Vec<Vec<Entry>>,
    ) -> Self {
        debug_assert!(rows.iter().all(|r| r.windows(2).all(|w| w[0].0 < w[1].0)));
        debug_assert!(rows
            .iter()
            .flatten()
            .all(|&(c, v)| c < n_cols && !v.is_zero()));
        SparseMatrix {
            n_cols,
            rows,
            field,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn field(&self) -> &Arc<FieldSpec> {
        &self.field
    }

    pub fn row(&self, i: usize) -> &[Entry] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<Entry>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> FieldElement {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(FieldElement::ZERO, |k| self.rows[i][k].1)
    }

    pub fn col_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_cols];
        for &(c, _) in self.rows.iter().flatten() {
            deg[c] += 1;
        }
        deg
    }

    pub fn push_row(&mut self, row: Vec<Entry>) -> Result<()> {
        let row = normalize_row(&self.field, self.n_cols, row)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Vec<u32>> {
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0; self.n_cols];
                for &(c, v) in row {
                    d[c] = v.0;
                }
                d
            })
            .collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut rows = vec![Vec::new(); self.n_cols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                rows[c].push((i, v));
            }
        }
        SparseMatrix {
            n_cols: self.n_rows(),
            rows,
            field: self.field.clone(),
        }
    }

    /// `A * sigma`.
    pub fn mul_vec(&self, sigma: &[FieldElement]) -> Vec<FieldElement> {
        let f = &self.field;
        self.rows
            .iter()
            .map(|row| {
                row.iter().fold(FieldElement::ZERO, |acc, &(c, v)| {
                    f.add(acc, f.mul(v, sigma[c]))
                })
            })
            .collect()
    }

    /// Appends rows below `self`.
    pub fn stack_rows(&self, extra: Vec<Vec<Entry>>) -> Result<SparseMatrix> {
        let mut out = self.clone();
        for row in extra {
            out.push_row(row)?;
        }
        Ok(out)
    }

    /// Deletes the given rows and columns. Returns the minor together with the
    /// map from new column index to original column index.
    pub fn minor(
        &self,
        removed_rows: &[usize],
        removed_cols: &[usize],
    ) -> Result<(SparseMatrix, Vec<usize>)> {
        let mut drop_row = vec![false; self.n_rows()];
        for &r in removed_rows {
            *drop_row.get_mut(r).ok_or(Error::IndexOutOfRange {
                index: r,
                bound: self.n_rows(),
            })? = true;
        }
        let mut new_index = vec![Some(0usize); self.n_cols];
        for &c in removed_cols {
            *new_index.get_mut(c).ok_or(Error::IndexOutOfRange {
                index: c,
                bound: self.n_cols,
            })? = None;
        }
        let mut col_map = Vec::with_capacity(self.n_cols);
        for (c, slot) in new_index.iter_mut().enumerate() {
            if slot.is_some() {
                *slot = Some(col_map.len());
                col_map.push(c);
            }
        }
        let rows = self
            .rows
            .iter()
            .zip(&drop_row)
            .filter(|(_, &d)| !d)
            .map(|(row, _)| {
                row.iter()
                    .filter_map(|&(c, v)| new_index[c].map(|nc| (nc, v)))
                    .collect()
            })
            .collect();
        Ok((
            SparseMatrix {
                n_cols: col_map.len(),
                rows,
                field: self.field.clone(),
            },
            col_map,
        ))
    }

    /// Text dump: header `M N q`, then one `row col value` line per nonzero.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.n_rows(), self.n_cols, self.field.q())?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                writeln!(w, "{i} {c} {}", v.0)?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<SparseMatrix> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.as_ref().is_ok_and(|s| s.trim().is_empty()));
        let parse_err = |n: usize, msg: &str| Error::Parse(format!("line {}: {msg}", n + 1));
        let (hn, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let header = header?;
        let nums: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(hn, "expected integers")))
            .collect::<Result<_>>()?;
        let [m, n, q] = nums[..] else {
            return Err(parse_err(hn, "header must be `M N q`"));
        };
        let field = Arc::new(FieldSpec::new(q)?);
        let mut rows: Vec<Vec<Entry>> = vec![Vec::new(); m as usize];
        let mut last: Option<(usize, usize)> = None;
        for (ln, line) in lines {
            let line = line?;
            let nums: Vec<u64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(ln, "expected integers")))
                .collect::<Result<_>>()?;
            let [i, j, v] = nums[..] else {
                return Err(parse_err(ln, "entry must be `row col value`"));
            };
            let (i, j) = (i as usize, j as usize);
            if i >= m as usize || j >= n as usize {
                return Err(parse_err(ln, "index out of range"));
            }
            if v == 0 || v >= q {
                return Err(parse_err(ln, "value must be a nonzero field element"));
            }
            if last.is_some_and(|l| l >= (i, j)) {
                return Err(parse_err(ln, "entries must be sorted by row, then column"));
            }
            last = Some((i, j));
            rows[i].push((j, FieldElement(v as u32)));
        }
        Ok(SparseMatrix {
            n_cols: n as usize,
            rows,
            field,
        })
    }

    pub(crate) fn load_dense<'a>(&self, field: &'a FieldSpec) -> Box<dyn DenseRows + 'a> {
        let mut d = dense_for(field, self.n_rows(), self.n_cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                d.set(i, c, v.0);
            }
        }
        d
    }
}

fn normalize_row(field: &FieldSpec, n_cols: usize, mut row: Vec<Entry>) -> Result<Vec<Entry>> {
    row.retain(|e| !e.1.is_zero());
    row.sort_by_key(|e| e.0);
    for w in row.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::InvalidParams(format!(
                "column {} repeated within a row",
                w[0].0
            )));
        }
    }
    for &(c, v) in &row {
        if c >= n_cols {
            return Err(Error::IndexOutOfRange {
                index: c,
                bound: n_cols,
            });
        }
        field.element(v.0)?;
    }
    Ok(row)
}

/// Reduced row echelon form with unit pivots.
#[derive(Clone, Debug)]
pub struct Rref {
    /// The `rank` nonzero rows of the reduced matrix.
    pub reduced: SparseMatrix,
    pub rank: usize,
    pub pivot_cols: Vec<usize>,
}

impl Rref {
    pub fn n_cols(&self) -> usize {
        self.reduced.n_cols()
    }

    pub fn nullity(&self) -> usize {
        self.n_cols() - self.rank
    }

    pub fn free_cols(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.n_cols()];
        for &c in &self.pivot_cols {
            is_pivot[c] = true;
        }
        (0..self.n_cols()).filter(|&c| !is_pivot[c]).collect()
    }

    /// Row index of the pivot in each column, if any.
    pub fn pivot_row_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_cols()];
        for (r, &c) in self.pivot_cols.iter().enumerate() {
            out[c] = Some(r);
        }
        out
    }

    /// Frozen columns: pivots whose reduced row is the unit vector.
    pub fn frozen_cols(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .pivot_cols
            .iter()
            .enumerate()
            .filter(|&(r, _)| self.reduced.row(r).len() == 1)
            .map(|(_, &c)| c)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn kernel_basis(&self) -> KernelBasis {
        let n = self.n_cols();
        let f = self.reduced.field().clone();
        let free_cols = self.free_cols();
        let mut slot = vec![usize::MAX; n];
        for (i, &c) in free_cols.iter().enumerate() {
            slot[c] = i;
        }
        let mut basis: Vec<Vec<FieldElement>> = free_cols
            .iter()
            .map(|&c| {
                let mut v = vec![FieldElement::ZERO; n];
                v[c] = FieldElement::ONE;
                v
            })
            .collect();
        for (r, &p) in self.pivot_cols.iter().enumerate() {
            for &(c, val) in self.reduced.row(r) {
                if c != p {
                    basis[slot[c]][p] = f.neg(val);
                }
            }
        }
        KernelBasis {
            dimension: free_cols.len(),
            basis,
            pivot_cols: self.pivot_cols.clone(),
            free_cols,
        }
    }

    /// Uniform element of the kernel: one `gen_range(0..q)` draw per free
    /// column in increasing column order, then back-substitution.
    pub fn sample_kernel<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<FieldElement> {
        let f = self.reduced.field();
        let q = f.q();
        let n = self.n_cols();
        let mut sigma = vec![FieldElement::ZERO; n];
        for c in self.free_cols() {
            sigma[c] = FieldElement(rng.gen_range(0..q));
        }
        for (r, &p) in self.pivot_cols.iter().enumerate() {
            let s = self
                .reduced
                .row(r)
                .iter()
                .filter(|&&(c, _)| c != p)
                .fold(FieldElement::ZERO, |acc, &(c, v)| {
                    f.add(acc, f.mul(v, sigma[c]))
                });
            sigma[p] = f.neg(s);
        }
        sigma
    }

    /// Relation test on the reduced form: `J` is a relation iff the rows
    /// pivoting inside `J`, restricted to free columns outside `J`, are
    /// linearly dependent.
    pub fn is_relation_with(&self, pivot_row_of: &[Option<usize>], cols: &[usize]) -> bool {
        if cols.is_empty() {
            return false;
        }
        let f = self.reduced.field();
        let mut vecs: Vec<Vec<Entry>> = Vec::new();
        for &c in cols {
            if let Some(r) = pivot_row_of[c] {
                let v: Vec<Entry> = self
                    .reduced
                    .row(r)
                    .iter()
                    .filter(|&&(col, _)| pivot_row_of[col].is_none() && !cols.contains(&col))
                    .copied()
                    .collect();
                vecs.push(v);
            }
        }
        let needed = vecs.len();
        small_rank(f, vecs) < needed
    }
}

/// Rank of a handful of sparse vectors.
fn small_rank(f: &FieldSpec, mut vecs: Vec<Vec<Entry>>) -> usize {
    let mut rank = 0;
    while let Some(pos) = vecs.iter().position(|v| !v.is_empty()) {
        let piv = vecs.swap_remove(pos);
        rank += 1;
        let (pc, pv) = piv[0];
        let pinv = f.inv(pv).expect("nonzero");
        for v in vecs.iter_mut() {
            if let Ok(k) = v.binary_search_by_key(&pc, |e| e.0) {
                let coef = f.neg(f.mul(v[k].1, pinv));
                *v = sparse_axpy(f, v, &piv, coef);
            }
        }
    }
    rank
}

/// `x + coef * y` for sorted sparse vectors.
pub(crate) fn sparse_axpy(
    f: &FieldSpec,
    x: &[Entry],
    y: &[Entry],
    coef: FieldElement,
) -> Vec<Entry> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        let take_x = j == y.len() || (i < x.len() && x[i].0 < y[j].0);
        let take_y = i == x.len() || (j < y.len() && y[j].0 < x[i].0);
        if take_x {
            out.push(x[i]);
            i += 1;
        } else if take_y {
            out.push((y[j].0, f.mul(coef, y[j].1)));
            j += 1;
        } else {
            let v = f.add(x[i].1, f.mul(coef, y[j].1));
            if !v.is_zero() {
                out.push((x[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub dimension: usize,
    pub basis: Vec<Vec<FieldElement>>,
    pub pivot_cols: Vec<usize>,
    pub free_cols: Vec<usize>,
}

pub fn rref(a: &SparseMatrix) -> Rref {
    let field = a.field().clone();
    let mut d = a.load_dense(&field);
    let pivot_cols = d.eliminate(true);
    let rank = pivot_cols.len();
    let rows = (0..rank).map(|r| d.row_entries(r)).collect();
    Rref {
        reduced: SparseMatrix::from_rows_unchecked(field.clone(), a.n_cols(), rows),
        rank,
        pivot_cols,
    }
}

/// Rank by forward elimination of the whole matrix.
pub fn rank_dense(a: &SparseMatrix) -> usize {
    let field = a.field().clone();
    let mut d = a.load_dense(&field);
    d.eliminate(false).len()
}

/// Rank. Degree-<=1 columns are peeled first (each removal with a row adds
/// exactly one to the rank), then the 2-core is eliminated densely.
pub fn rank(a: &SparseMatrix) -> usize {
    let peeled = crate::peel::two_core(a);
    peeled.removed_rows.len() + rank_dense(&peeled.core)
}

pub fn nullity(a: &SparseMatrix) -> usize {
    a.n_cols() - rank(a)
}

pub fn kernel_basis(a: &SparseMatrix) -> KernelBasis {
    rref(a).kernel_basis()
}

/// Columns `j` with `sigma_j = 0` for every `sigma` in the kernel, ascending.
pub fn frozen_set(a: &SparseMatrix) -> Vec<usize> {
    rref(a).frozen_cols()
}

fn check_cols(a: &SparseMatrix, cols: &[usize]) -> Result<()> {
    if cols.is_empty() {
        return Err(Error::EmptyColumnSet);
    }
    match cols.iter().find(|&&c| c >= a.n_cols()) {
        Some(&c) => Err(Error::IndexOutOfRange {
            index: c,
            bound: a.n_cols(),
        }),
        None => Ok(()),
    }
}

/// `J` is a relation iff some `y` has `supp(y^T A)` a non-empty subset of `J`.
/// Evaluated as a left-kernel comparison: deleting the columns of `J` must
/// enlarge `{y : y^T A = 0}`, i.e. drop the rank.
pub fn is_relation(a: &SparseMatrix, cols: &[usize]) -> Result<bool> {
    check_cols(a, cols)?;
    let (outside, _) = a.minor(&[], cols)?;
    Ok(rank(&outside) < rank(a))
}

/// `J` is a proper relation iff `J \ F(A)` is a relation (the empty set never is).
pub fn is_proper_relation(a: &SparseMatrix, cols: &[usize]) -> Result<bool> {
    check_cols(a, cols)?;
    let frozen = frozen_set(a);
    let rest: Vec<usize> = cols
        .iter()
        .copied()
        .filter(|c| frozen.binary_search(c).is_err())
        .collect();
    if rest.is_empty() {
        return Ok(false);
    }
    is_relation(a, &rest)
}

pub const DEFAULT_AUDIT_BUDGET: u128 = 20_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct FreenessCount {
    pub size: usize,
    pub proper_relations: u64,
    /// `delta * C(N, size)`
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreenessAudit {
    pub is_free: bool,
    pub counts: Vec<FreenessCount>,
}

/// Exhaustive count of proper relations of every size `2..=ell`.
pub fn freeness_audit(
    a: &SparseMatrix,
    delta: f64,
    ell: usize,
    budget: u128,
) -> Result<FreenessAudit> {
    if ell < 2 {
        return Err(Error::InvalidParams("freeness audit needs ell >= 2".into()));
    }
    let n = a.n_cols();
    let needed = (n as u128).saturating_pow(ell as u32);
    if needed > budget {
        return Err(Error::BudgetExceeded {
            what: "freeness audit",
            needed,
            budget,
        });
    }
    let reduced = rref(a);
    let pivot_row_of = reduced.pivot_row_of();
    let mut frozen = vec![false; n];
    for c in reduced.frozen_cols() {
        frozen[c] = true;
    }
    let mut counts = Vec::new();
    for h in 2..=ell.min(n) {
        let mut count = 0u64;
        let mut subset: Vec<usize> = (0..h).collect();
        let mut rest = Vec::with_capacity(h);
        loop {
            rest.clear();
            rest.extend(subset.iter().copied().filter(|&c| !frozen[c]));
            if reduced.is_relation_with(&pivot_row_of, &rest) {
                count += 1;
            }
            // next combination in lexicographic order
            let Some(i) = (0..h).rev().find(|&i| subset[i] < n - h + i) else {
                break;
            };
            subset[i] += 1;
            for j in i + 1..h {
                subset[j] = subset[j - 1] + 1;
            }
        }
        counts.push(FreenessCount {
            size: h,
            proper_relations: count,
            bound: delta * binomial(n as u64, h as u64),
        });
    }
    let is_free = counts.iter().all(|c| (c.proper_relations as f64) < c.bound);
    Ok(FreenessAudit { is_free, counts })
}

pub fn sample_kernel<R: Rng + ?Sized>(a: &SparseMatrix, rng: &mut R) -> Vec<FieldElement> {
    rref(a).sample_kernel(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalanceProfile {
    /// `counts[s]` is the fraction of coordinates equal to `s`.
    pub counts: Vec<f64>,
    pub n: usize,
}

impl BalanceProfile {
    pub fn distance(&self, norm: Norm) -> f64 {
        let u = 1.0 / self.counts.len() as f64;
        match norm {
            Norm::L1 => self.counts.iter().map(|&r| (r - u).abs()).sum(),
            Norm::L2 => self
                .counts
                .iter()
                .map(|&r| (r - u) * (r - u))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

pub fn balance_profile(field: &FieldSpec, sigma: &[FieldElement]) -> Result<BalanceProfile> {
    if sigma.is_empty() {
        return Err(Error::InvalidParams(
            "balance profile of an empty vector".into(),
        ));
    }
    let mut counts = vec![0usize; field.q() as usize];
    for s in sigma {
        counts[s.0 as usize] += 1;
    }
    let n = sigma.len();
    Ok(BalanceProfile {
        counts: counts.into_iter().map(|c| c as f64 / n as f64).collect(),
        n,
    })
}

pub fn balance_distance(field: &FieldSpec, sigma: &[FieldElement], norm: Norm) -> Result<f64> {
    Ok(balance_profile(field, sigma)?.distance(norm))
}
