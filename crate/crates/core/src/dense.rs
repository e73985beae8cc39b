//! Packed dense row storage used behind exact elimination.
//!
//! GF(2) rows are plain bitsets, GF(2^e) rows are stored as e bit planes,
//! GF(3) rows as two bit planes (indicator of 1 and indicator of 2). Every
//! other field falls back to one `u32` per entry.

use crate::galois::{FieldElement, FieldSpec};

pub(crate) trait DenseRows {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn get(&self, r: usize, c: usize) -> u32;
    fn set(&mut self, r: usize, c: usize, v: u32);
    fn swap_rows(&mut self, a: usize, b: usize);
    fn scale_row(&mut self, r: usize, coef: FieldElement);
    /// `row[dst] += coef * row[src]`, touching columns `>= from_col` only.
    fn add_scaled(&mut self, dst: usize, src: usize, coef: FieldElement, from_col: usize);
    fn field(&self) -> &FieldSpec;

    fn row_entries(&self, r: usize) -> Vec<(usize, FieldElement)> {
        (0..self.ncols())
            .filter_map(|c| {
                let v = self.get(r, c);
                (v != 0).then_some((c, FieldElement(v)))
            })
            .collect()
    }

    /// Gaussian elimination with unit pivots. Pivot = smallest column with a
    /// nonzero at or below the current row, then the smallest such row.
    /// With `reduce_above` the result is the reduced row echelon form.
    fn eliminate(&mut self, reduce_above: bool) -> Vec<usize> {
        let (m, n) = (self.nrows(), self.ncols());
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..n {
            if rank == m {
                break;
            }
            let Some(r) = (rank..m).find(|&r| self.get(r, c) != 0) else {
                continue;
            };
            self.swap_rows(rank, r);
            let lead = self.get(rank, c);
            if lead != 1 {
                let inv = self.field().inv(FieldElement(lead)).expect("nonzero pivot");
                self.scale_row(rank, inv);
            }
            let start = if reduce_above { 0 } else { rank + 1 };
            for r2 in start..m {
                if r2 == rank {
                    continue;
                }
                let x = self.get(r2, c);
                if x != 0 {
                    let coef = self.field().neg(FieldElement(x));
                    self.add_scaled(r2, rank, coef, c);
                }
            }
            pivots.push(c);
            rank += 1;
        }
        pivots
    }
}

pub(crate) fn dense_for(field: &FieldSpec, nrows: usize, ncols: usize) -> Box<dyn DenseRows + '_> {
    match (field.p(), field.e()) {
        (2, 1) => Box::new(Gf2Rows::new(field, nrows, ncols)),
        (2, _) => Box::new(Bin2eRows::new(field, nrows, ncols)),
        (3, 1) => Box::new(Gf3Rows::new(field, nrows, ncols)),
        _ => Box::new(GenericRows::new(field, nrows, ncols)),
    }
}

#[inline]
fn words_for(ncols: usize) -> usize {
    ncols.div_ceil(64)
}

pub(crate) struct Gf2Rows<'f> {
    field: &'f FieldSpec,
    m: usize,
    n: usize,
    w: usize,
    bits: Vec<u64>,
}

impl<'f> Gf2Rows<'f> {
    fn new(field: &'f FieldSpec, m: usize, n: usize) -> Self {
        let w = words_for(n);
        Gf2Rows {
            field,
            m,
            n,
            w,
            bits: vec![0; m * w],
        }
    }
}

impl DenseRows for Gf2Rows<'_> {
    fn nrows(&self) -> usize {
        self.m
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn field(&self) -> &FieldSpec {
        self.field
    }
    #[inline]
    fn get(&self, r: usize, c: usize) -> u32 {
        ((self.bits[r * self.w + c / 64] >> (c % 64)) & 1) as u32
    }
    fn set(&mut self, r: usize, c: usize, v: u32) {
        let word = &mut self.bits[r * self.w + c / 64];
        if v & 1 == 1 {
            *word |= 1 << (c % 64);
        } else {
            *word &= !(1 << (c % 64));
        }
    }
    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.w {
                self.bits.swap(a * self.w + i, b * self.w + i);
            }
        }
    }
    fn scale_row(&mut self, _r: usize, _coef: FieldElement) {}
    fn add_scaled(&mut self, dst: usize, src: usize, _coef: FieldElement, from_col: usize) {
        let start = from_col / 64;
        let (d, s) = two_rows(&mut self.bits, self.w, dst, src);
        for (x, y) in d[start..].iter_mut().zip(&s[start..]) {
            *x ^= *y;
        }
    }
    fn row_entries(&self, r: usize) -> Vec<(usize, FieldElement)> {
        let mut out = Vec::new();
        for (i, &word) in self.bits[r * self.w..(r + 1) * self.w].iter().enumerate() {
            let mut x = word;
            while x != 0 {
                let b = x.trailing_zeros() as usize;
                out.push((i * 64 + b, FieldElement::ONE));
                x &= x - 1;
            }
        }
        out
    }
}

/// Split two distinct row slices out of a row-major buffer.
fn two_rows(buf: &mut [u64], stride: usize, dst: usize, src: usize) -> (&mut [u64], &[u64]) {
    debug_assert_ne!(dst, src);
    if dst < src {
        let (lo, hi) = buf.split_at_mut(src * stride);
        (&mut lo[dst * stride..(dst + 1) * stride], &hi[..stride])
    } else {
        let (lo, hi) = buf.split_at_mut(dst * stride);
        (&mut hi[..stride], &lo[src * stride..(src + 1) * stride])
    }
}

pub(crate) struct Bin2eRows<'f> {
    field: &'f FieldSpec,
    m: usize,
    n: usize,
    w: usize,
    e: usize,
    // mul_masks[c][i] has bit j set iff bit i of c * x^j is set
    mul_masks: Vec<Vec<u32>>,
    bits: Vec<u64>,
}

impl<'f> Bin2eRows<'f> {
    fn new(field: &'f FieldSpec, m: usize, n: usize) -> Self {
        let e = field.e() as usize;
        let w = words_for(n);
        let mul_masks = field
            .elements()
            .map(|c| {
                let mut masks = vec![0u32; e];
                for j in 0..e {
                    let v = field.mul(c, FieldElement(1 << j)).0;
                    for (i, mask) in masks.iter_mut().enumerate() {
                        if (v >> i) & 1 == 1 {
                            *mask |= 1 << j;
                        }
                    }
                }
                masks
            })
            .collect();
        Bin2eRows {
            field,
            m,
            n,
            w,
            e,
            mul_masks,
            bits: vec![0; m * w * e],
        }
    }

    #[inline]
    fn stride(&self) -> usize {
        self.w * self.e
    }
}

impl DenseRows for Bin2eRows<'_> {
    fn nrows(&self) -> usize {
        self.m
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn field(&self) -> &FieldSpec {
        self.field
    }
    #[inline]
    fn get(&self, r: usize, c: usize) -> u32 {
        let base = r * self.stride() + c / 64;
        let mut v = 0;
        for b in 0..self.e {
            v |= (((self.bits[base + b * self.w] >> (c % 64)) & 1) as u32) << b;
        }
        v
    }
    fn set(&mut self, r: usize, c: usize, v: u32) {
        let base = r * self.stride() + c / 64;
        for b in 0..self.e {
            let word = &mut self.bits[base + b * self.w];
            if (v >> b) & 1 == 1 {
                *word |= 1 << (c % 64);
            } else {
                *word &= !(1 << (c % 64));
            }
        }
    }
    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            let s = self.stride();
            for i in 0..s {
                self.bits.swap(a * s + i, b * s + i);
            }
        }
    }
    fn scale_row(&mut self, r: usize, coef: FieldElement) {
        let s = self.stride();
        let old = self.bits[r * s..(r + 1) * s].to_vec();
        let masks = &self.mul_masks[coef.0 as usize];
        let row = &mut self.bits[r * s..(r + 1) * s];
        row.fill(0);
        for (i, &mask) in masks.iter().enumerate() {
            for j in 0..self.e {
                if (mask >> j) & 1 == 1 {
                    for k in 0..self.w {
                        row[i * self.w + k] ^= old[j * self.w + k];
                    }
                }
            }
        }
    }
    fn add_scaled(&mut self, dst: usize, src: usize, coef: FieldElement, from_col: usize) {
        let (w, e) = (self.w, self.e);
        let start = from_col / 64;
        let stride = self.stride();
        let masks = &self.mul_masks[coef.0 as usize];
        let (d, s) = two_rows(&mut self.bits, stride, dst, src);
        for (i, &mask) in masks.iter().enumerate() {
            for j in 0..e {
                if (mask >> j) & 1 == 1 {
                    let dp = &mut d[i * w + start..(i + 1) * w];
                    let sp = &s[j * w + start..(j + 1) * w];
                    for (x, y) in dp.iter_mut().zip(sp) {
                        *x ^= *y;
                    }
                }
            }
        }
    }
}

pub(crate) struct Gf3Rows<'f> {
    field: &'f FieldSpec,
    m: usize,
    n: usize,
    w: usize,
    // row layout: [ones plane | twos plane]
    bits: Vec<u64>,
}

impl<'f> Gf3Rows<'f> {
    fn new(field: &'f FieldSpec, m: usize, n: usize) -> Self {
        let w = words_for(n);
        Gf3Rows {
            field,
            m,
            n,
            w,
            bits: vec![0; m * 2 * w],
        }
    }
}

/// Bit-sliced GF(3) addition on (is-one, is-two) planes.
#[inline(always)]
fn gf3_add(a1: u64, a2: u64, b1: u64, b2: u64) -> (u64, u64) {
    let t = (a1 | b2) ^ (a2 | b1);
    ((a2 | b2) ^ t, (a1 | b1) ^ t)
}

impl DenseRows for Gf3Rows<'_> {
    fn nrows(&self) -> usize {
        self.m
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn field(&self) -> &FieldSpec {
        self.field
    }
    #[inline]
    fn get(&self, r: usize, c: usize) -> u32 {
        let base = r * 2 * self.w + c / 64;
        let one = (self.bits[base] >> (c % 64)) & 1;
        let two = (self.bits[base + self.w] >> (c % 64)) & 1;
        (one | (two << 1)) as u32
    }
    fn set(&mut self, r: usize, c: usize, v: u32) {
        let base = r * 2 * self.w + c / 64;
        let bit = 1u64 << (c % 64);
        self.bits[base] &= !bit;
        self.bits[base + self.w] &= !bit;
        match v {
            1 => self.bits[base] |= bit,
            2 => self.bits[base + self.w] |= bit,
            _ => {}
        }
    }
    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            let s = 2 * self.w;
            for i in 0..s {
                self.bits.swap(a * s + i, b * s + i);
            }
        }
    }
    fn scale_row(&mut self, r: usize, coef: FieldElement) {
        if coef.0 == 2 {
            let s = 2 * self.w;
            let row = &mut self.bits[r * s..(r + 1) * s];
            let (ones, twos) = row.split_at_mut(self.w);
            ones.swap_with_slice(twos);
        }
    }
    fn add_scaled(&mut self, dst: usize, src: usize, coef: FieldElement, from_col: usize) {
        let w = self.w;
        let start = from_col / 64;
        let (d, s) = two_rows(&mut self.bits, 2 * w, dst, src);
        let (d1, d2) = d.split_at_mut(w);
        let (s1, s2) = if coef.0 == 1 {
            s.split_at(w)
        } else {
            let (a, b) = s.split_at(w);
            (b, a)
        };
        for i in start..w {
            let (x1, x2) = gf3_add(d1[i], d2[i], s1[i], s2[i]);
            d1[i] = x1;
            d2[i] = x2;
        }
    }
}

pub(crate) struct GenericRows<'f> {
    field: &'f FieldSpec,
    m: usize,
    n: usize,
    vals: Vec<u32>,
}

impl<'f> GenericRows<'f> {
    fn new(field: &'f FieldSpec, m: usize, n: usize) -> Self {
        GenericRows {
            field,
            m,
            n,
            vals: vec![0; m * n],
        }
    }
}

impl DenseRows for GenericRows<'_> {
    fn nrows(&self) -> usize {
        self.m
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn field(&self) -> &FieldSpec {
        self.field
    }
    #[inline]
    fn get(&self, r: usize, c: usize) -> u32 {
        self.vals[r * self.n + c]
    }
    fn set(&mut self, r: usize, c: usize, v: u32) {
        self.vals[r * self.n + c] = v;
    }
    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.n {
                self.vals.swap(a * self.n + i, b * self.n + i);
            }
        }
    }
    fn scale_row(&mut self, r: usize, coef: FieldElement) {
        let f = self.field;
        for x in &mut self.vals[r * self.n..(r + 1) * self.n] {
            *x = f.mul(FieldElement(*x), coef).0;
        }
    }
    fn add_scaled(&mut self, dst: usize, src: usize, coef: FieldElement, from_col: usize) {
        let f = self.field;
        let n = self.n;
        for c in from_col..n {
            let s = self.vals[src * n + c];
            if s != 0 {
                let d = &mut self.vals[dst * n + c];
                *d = f.add(FieldElement(*d), f.mul(coef, FieldElement(s))).0;
            }
        }
    }
}
