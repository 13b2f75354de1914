//! Compensated and deterministic-parallel summation.
//!
//! All large reductions in this crate go through [`det_par_sum`]: terms are
//! accumulated per fixed-size block with Neumaier compensation and the block
//! results are combined in block order, so the value is independent of the
//! number of worker threads.

use rayon::prelude::*;

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accum {
    sum: f64,
    comp: f64,
}

impl Accum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: Accum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sequential sum of `f(i)` for `i in 0..n`.
pub fn comp_sum<F: FnMut(usize) -> f64>(n: usize, mut f: F) -> f64 {
    let mut acc = Accum::default();
    for i in 0..n {
        acc.add(f(i));
    }
    acc.value()
}

/// Block size for deterministic parallel reductions. Fixed (never derived
/// from the thread count) so results are reproducible across pool sizes.
const BLOCK: usize = 256;

/// Deterministic parallel sum of `f(i)` for `i in 0..n`.
pub fn det_par_sum<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nblocks = n.div_ceil(BLOCK);
    let blocks: Vec<Accum> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Accum::default();
            let end = ((b + 1) * BLOCK).min(n);
            for i in b * BLOCK..end {
                acc.add(f(i));
            }
            acc
        })
        .collect();
    let mut total = Accum::default();
    for b in blocks {
        total.merge(b);
    }
    total.value()
}
