//! One-dimensional Gauss rules, cached by refinement level.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};

const MAX_LEVEL: usize = 14;

/// Gauss-Legendre node/weight pairs on `[-1, 1]` with `4 * 2^level` nodes.
pub(crate) fn legendre_level(level: usize) -> &'static [(f64, f64)] {
    static CACHE: [OnceLock<Vec<(f64, f64)>>; MAX_LEVEL + 1] = [const { OnceLock::new() }; MAX_LEVEL + 1];
    assert!(level <= MAX_LEVEL, "Gauss-Legendre level {level} too deep");
    CACHE[level].get_or_init(|| legendre(4usize << level))
}

pub(crate) fn legendre(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n).expect("rule with zero nodes");
    GaussLegendre::new(n).as_node_weight_pairs().to_vec()
}

/// Symmetric Gauss-Jacobi rule for the weight `(1 - t^2)^a` on `[-1, 1]`.
pub(crate) fn jacobi_symmetric(n: usize, a: f64) -> Vec<(f64, f64)> {
    if a == 0.0 {
        return legendre(n);
    }
    let n = NonZeroUsize::new(n).expect("rule with zero nodes");
    let e = FiniteAboveNegOneF64::new(a).expect("Jacobi exponent must exceed -1");
    GaussJacobi::new(n, e, e).as_node_weight_pairs().to_vec()
}
