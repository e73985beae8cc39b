//! 2-core pruning: repeatedly delete a column with at most one nonzero entry,
//! together with that entry's row.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::spmat::SparseMatrix;

#[derive(Clone, Debug)]
pub struct PeelResult {
    /// The minor left once every column has degree >= 2.
    pub core: SparseMatrix,
    /// Removed columns in removal order.
    pub removed_cols: Vec<usize>,
    /// Removed rows in removal order (one per degree-1 column removal).
    pub removed_rows: Vec<usize>,
    pub core_rows: usize,
    pub core_cols: usize,
    /// Original index of every core row / column.
    pub row_map: Vec<usize>,
    pub col_map: Vec<usize>,
}

impl PeelResult {
    pub fn excess(&self) -> i64 {
        self.core_rows as i64 - self.core_cols as i64
    }

    pub fn is_empty(&self) -> bool {
        self.core_rows == 0 && self.core_cols == 0
    }
}

struct PeelState<'a> {
    a: &'a SparseMatrix,
    col_rows: Vec<Vec<usize>>,
    deg: Vec<usize>,
    row_alive: Vec<bool>,
    col_alive: Vec<bool>,
    removed_cols: Vec<usize>,
    removed_rows: Vec<usize>,
}

impl<'a> PeelState<'a> {
    fn new(a: &'a SparseMatrix) -> Self {
        let mut col_rows = vec![Vec::new(); a.n_cols()];
        for (i, row) in a.rows().iter().enumerate() {
            for &(c, _) in row {
                col_rows[c].push(i);
            }
        }
        let deg = col_rows.iter().map(Vec::len).collect();
        PeelState {
            a,
            col_rows,
            deg,
            row_alive: vec![true; a.n_rows()],
            col_alive: vec![true; a.n_cols()],
            removed_cols: Vec::new(),
            removed_rows: Vec::new(),
        }
    }

    /// Removes column `c` (degree <= 1) and its row; calls `touched` on every
    /// live column whose degree dropped to <= 1.
    fn remove(&mut self, c: usize, mut touched: impl FnMut(usize)) {
        debug_assert!(self.col_alive[c] && self.deg[c] <= 1);
        self.col_alive[c] = false;
        self.removed_cols.push(c);
        if self.deg[c] == 1 {
            let r = *self.col_rows[c]
                .iter()
                .find(|&&r| self.row_alive[r])
                .expect("degree-1 column has a live row");
            self.row_alive[r] = false;
            self.removed_rows.push(r);
            for &(c2, _) in self.a.row(r) {
                if self.col_alive[c2] {
                    self.deg[c2] -= 1;
                    if self.deg[c2] <= 1 {
                        touched(c2);
                    }
                }
            }
        }
        self.deg[c] = 0;
    }

    fn finish(self) -> PeelResult {
        let (core, col_map) = self
            .a
            .minor(&self.removed_rows, &self.removed_cols)
            .expect("peeled indices are in range");
        let row_map: Vec<usize> = (0..self.a.n_rows())
            .filter(|&r| self.row_alive[r])
            .collect();
        PeelResult {
            core_rows: core.n_rows(),
            core_cols: core.n_cols(),
            core,
            removed_cols: self.removed_cols,
            removed_rows: self.removed_rows,
            row_map,
            col_map,
        }
    }
}

/// Canonical peeling: always removes the smallest-index eligible column.
pub fn two_core(a: &SparseMatrix) -> PeelResult {
    let mut st = PeelState::new(a);
    let mut heap: BinaryHeap<Reverse<usize>> = (0..a.n_cols())
        .filter(|&c| st.deg[c] <= 1)
        .map(Reverse)
        .collect();
    while let Some(Reverse(c)) = heap.pop() {
        if st.col_alive[c] {
            st.remove(c, |c2| heap.push(Reverse(c2)));
        }
    }
    st.finish()
}

/// Peeling with a uniformly random eligible column at every step. The core
/// does not depend on the order; only the traces do.
pub fn two_core_random_order<R: Rng + ?Sized>(a: &SparseMatrix, rng: &mut R) -> PeelResult {
    let mut st = PeelState::new(a);
    let mut pending: Vec<usize> = (0..a.n_cols()).filter(|&c| st.deg[c] <= 1).collect();
    while !pending.is_empty() {
        let c = pending.swap_remove(rng.gen_range(0..pending.len()));
        if st.col_alive[c] {
            st.remove(c, |c2| pending.push(c2));
        }
    }
    st.finish()
}

/// `core_rows - core_cols`; a positive value certifies `rank(A) < n_rows`.
pub fn core_excess(a: &SparseMatrix) -> i64 {
    two_core(a).excess()
}
