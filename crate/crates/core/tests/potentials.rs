//! Cross-checks between the potential routines on small measures.

use std::sync::Arc;

use cantor_sio::{
    annulus_integral, make_example_kernel, make_monomial_kernel, potential_direct,
    potential_treecode, truncated_sio, ConstructionSchedule, LevelMeasure, PhiProfile,
    QuadratureSpec, TreecodeConfig,
};

fn measure(level: usize) -> LevelMeasure {
    let s = ConstructionSchedule::new(3, vec![1.0, 2f64.powi(-6), 2f64.powi(-13)]).unwrap();
    LevelMeasure::new(Arc::new(s), level).unwrap()
}

#[test]
fn distant_probe_uses_the_root_alone() {
    let mu = measure(2);
    let spec = QuadratureSpec::default();
    let kern = make_monomial_kernel(3, 1, 2).unwrap();
    let x = [60.0, 80.0, 0.0];
    let tc = potential_treecode(&kern, &mu, &x, &TreecodeConfig::default(), &spec).unwrap();
    assert_eq!(tc.exact_leaves, 0);
    assert!(tc.surrogate_nodes <= 1 + 64, "{} surrogates", tc.surrogate_nodes);
    // far from a unit mass the potential is K(x) up to the bound
    let kx = kern.eval(&x).unwrap();
    assert!((tc.value - kx).abs() <= tc.error_bound + 1e-15);
    // the bound shrinks like |x|^-alpha relative to K(x)
    assert!(tc.error_bound < 0.1 * kx.abs(), "bound {} vs K(x) = {kx}", tc.error_bound);
}

#[test]
fn truncations_telescope_into_annuli() {
    let mu = measure(1);
    let spec = QuadratureSpec::default();
    let kern = make_example_kernel(3, PhiProfile::default()).unwrap();
    let x = [0.21, -0.13, 0.4];
    let eps = [0.5, 0.1, 0.02];
    for w in eps.windows(2) {
        let outer = truncated_sio(&kern, &mu, &x, w[0], &spec).unwrap();
        let inner = truncated_sio(&kern, &mu, &x, w[1], &spec).unwrap();
        let ring = annulus_integral(&kern, &mu, &x, w[1], w[0], &spec).unwrap();
        let tol = outer.error_bound + inner.error_bound + ring.error_bound + 1e-12;
        assert!((inner.value - outer.value - ring.value).abs() <= tol);
    }
}

#[test]
fn truncation_converges_to_the_potential_off_support() {
    let mu = measure(2);
    let spec = QuadratureSpec::default();
    let kern = make_monomial_kernel(3, 1, 3).unwrap();
    let x = [1.3, 0.2, -0.4];
    let full = potential_direct(&kern, &mu, &x, &spec).unwrap();
    let mut prev_gap = f64::INFINITY;
    for eps in [1.0, 0.5, 0.3, 0.1] {
        let t = truncated_sio(&kern, &mu, &x, eps, &spec).unwrap();
        let gap = (t.value - full.value).abs();
        assert!(gap <= prev_gap + t.error_bound + full.error_bound);
        prev_gap = gap;
    }
    // below the distance to the support nothing is cut away
    assert!(prev_gap <= 1e-9, "gap {prev_gap}");
}
