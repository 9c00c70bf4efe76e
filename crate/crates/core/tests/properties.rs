use proptest::prelude::*;

use volfunc::estimators::{
    estimate_corrected_nonoverlapping, estimate_corrected_overlapping, estimate_raw,
};
use volfunc::matcore::{is_psd, psd_tolerance, SymMatrix};
use volfunc::spotvol::{spot_estimates, ObservationGrid};
use volfunc::testfn::{check_derivatives, parse_function, FunctionRef, TestFunction};

fn increments(d: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = (usize, Vec<f64>)> {
    n.prop_flat_map(move |n| (Just(n), prop::collection::vec(-1.0f64..1.0, n * d)))
}

fn psd_matrix(d: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |a| {
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|j| (0..d).map(|k| (0..d).map(|p| a[j * d + p] * a[k * d + p]).sum()).collect())
            .collect();
        SymMatrix::from_rows(&rows).unwrap()
    })
}

fn builtins(d: usize) -> Vec<FunctionRef> {
    let mut specs = vec![
        "trace_power:q=2".to_string(),
        "trace_power:q=3".to_string(),
        format!("identity:a=0,b={}", d - 1),
        format!("entry_product:a=0,b={},e={},f=0", d - 1, d - 1),
    ];
    if d == 1 {
        specs.extend(["power:p=2", "power:p=3", "power:p=1.5"].map(String::from));
    }
    specs.iter().map(|s| parse_function(s, d).unwrap()).collect()
}

fn direct_window(inc: &[f64], d: usize, start: usize, k: usize, u: f64, mesh: f64) -> SymMatrix {
    let mut m = SymMatrix::zeros(d);
    for w in start..start + k {
        let x = &inc[w * d..(w + 1) * d];
        if x.iter().map(|v| v * v).sum::<f64>().sqrt() <= u {
            m.add_outer(x, 1.0);
        }
    }
    m.scaled(1.0 / (k as f64 * mesh))
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn spot_estimates_are_psd(d in 1usize..4, (n, inc) in increments(3, 5..120), k in 2usize..5, u in 0.1f64..3.0) {
        let inc = &inc[..n * d];
        let grid = ObservationGrid::from_increments(d, 0.01, inc).unwrap();
        let spots = spot_estimates(&grid, k, u).unwrap();
        for c in spots.estimates() {
            prop_assert!(is_psd(c, psd_tolerance(d)));
        }
    }

    #[test]
    fn rolling_matches_direct_windows(d in 1usize..4, (n, inc) in increments(3, 10..150), k in 2usize..9, u in 0.2f64..2.0) {
        let inc = &inc[..n * d];
        let grid = ObservationGrid::from_increments(d, 0.01, inc).unwrap();
        let diffs = grid.increments();
        let spots = spot_estimates(&grid, k, u).unwrap();
        prop_assert_eq!(spots.len(), n - k + 1);
        for (i, c) in spots.estimates().iter().enumerate() {
            let direct = direct_window(&diffs, d, i, k, u, grid.mesh());
            for (a, b) in c.as_slice().iter().zip(direct.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn tighter_truncation_never_increases_the_diagonal((n, inc) in increments(2, 10..100), k in 2usize..6, u in 0.05f64..1.5, shrink in 0.1f64..1.0) {
        let grid = ObservationGrid::from_increments(2, 0.01, &inc[..n * 2]).unwrap();
        let loose = spot_estimates(&grid, k, u).unwrap();
        let tight = spot_estimates(&grid, k, u * shrink).unwrap();
        for (a, b) in loose.estimates().iter().zip(tight.estimates()) {
            prop_assert!(b.trace() <= a.trace() + 1e-12);
            for j in 0..2 {
                prop_assert!(b.get(j, j) <= a.get(j, j) + 1e-12);
            }
        }
        prop_assert!(tight.truncated_fraction() >= loose.truncated_fraction());
    }

    #[test]
    fn power_estimates_scale_homogeneously((n, inc) in increments(1, 20..150), k in 2usize..8, lambda in 0.1f64..5.0, p in prop::sample::select(vec![1.0, 2.0, 3.0, 2.5])) {
        let grid = ObservationGrid::from_increments(1, 0.01, &inc[..n]).unwrap();
        let scaled = ObservationGrid::from_increments(1, 0.01, &inc[..n].iter().map(|x| x * lambda).collect::<Vec<_>>()).unwrap();
        let g = parse_function(&format!("power:p={p}"), 1).unwrap();
        let s0 = spot_estimates(&grid, k, f64::INFINITY).unwrap();
        let s1 = spot_estimates(&scaled, k, f64::INFINITY).unwrap();
        let factor = lambda.powf(2.0 * p);
        // differencing the cumulated path costs a few ulps of the largest level
        let peak = inc[..n].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let scale = factor * (peak * peak / 0.01).powf(p) * n as f64 * 0.01;
        type Est = fn(&dyn TestFunction, &volfunc::SpotSeries) -> volfunc::Result<f64>;
        let estimators: [Est; 3] = [estimate_raw, estimate_corrected_overlapping, estimate_corrected_nonoverlapping];
        for est in estimators {
            let v0 = est(g.as_ref(), &s0).unwrap();
            let v1 = est(g.as_ref(), &s1).unwrap();
            prop_assert!((v1 - factor * v0).abs() <= 1e-10 * scale, "{} vs {}", v1, factor * v0);
        }
    }

    #[test]
    fn identity_collapses(d in 1usize..4, (n, inc) in increments(3, 10..100), k in 2usize..8) {
        let grid = ObservationGrid::from_increments(d, 0.01, &inc[..n * d]).unwrap();
        let spots = spot_estimates(&grid, k, f64::INFINITY).unwrap();
        for a in 0..d {
            for b in a..d {
                let g = parse_function(&format!("identity:a={a},b={b}"), d).unwrap();
                let raw = estimate_raw(g.as_ref(), &spots).unwrap();
                let corrected = estimate_corrected_overlapping(g.as_ref(), &spots).unwrap();
                prop_assert_eq!(raw, corrected);
            }
        }
    }

    #[test]
    fn avar_integrand_is_nonnegative(d in 1usize..4, seed in psd_matrix(3)) {
        let x = SymMatrix::from_rows(&seed.rows()[..d].iter().map(|r| r[..d].to_vec()).collect::<Vec<_>>()).unwrap();
        for g in builtins(d) {
            if !g.smooth_on_boundary() && x.min_eigenvalue() <= 0.0 {
                continue;
            }
            let h = g.avar_integrand(&x).unwrap();
            prop_assert!(h >= -1e-12 * (1.0 + x.frobenius_norm()).powi(6), "{}: {}", g.name(), h);
        }
    }

    #[test]
    fn closed_form_corrections_match_hessian_contraction(d in 1usize..4, seed in psd_matrix(3)) {
        let x = SymMatrix::from_rows(&seed.rows()[..d].iter().map(|r| r[..d].to_vec()).collect::<Vec<_>>()).unwrap();
        for g in builtins(d) {
            if !g.smooth_on_boundary() && x.min_eigenvalue() <= 0.0 {
                continue;
            }
            let closed = g.correction_form(&x).unwrap();
            let brute = g.hessian(&x).unwrap().contract_covariance_form(&x);
            prop_assert!((closed - brute).abs() <= 1e-12 * closed.abs().max(1.0), "{}: {} vs {}", g.name(), closed, brute);
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences(d in 1usize..4, seed in psd_matrix(3)) {
        let mut x = SymMatrix::from_rows(&seed.rows()[..d].iter().map(|r| r[..d].to_vec()).collect::<Vec<_>>()).unwrap();
        for j in 0..d {
            x.set(j, j, x.get(j, j) + 0.5);
        }
        for g in builtins(d) {
            let err = check_derivatives(g.as_ref(), &x, 1e-4).unwrap();
            prop_assert!(err < 1e-6, "{}: {}", g.name(), err);
        }
    }

    #[test]
    fn estimates_are_permutation_equivariant((n, inc) in increments(3, 20..100), k in 2usize..8) {
        // relabel coordinates (0,1,2) -> (2,0,1)
        let perm = [2usize, 0, 1];
        let mut permuted = vec![0.0; n * 3];
        for i in 0..n {
            for j in 0..3 {
                permuted[i * 3 + perm[j]] = inc[i * 3 + j];
            }
        }
        let g0 = ObservationGrid::from_increments(3, 0.01, &inc[..n * 3]).unwrap();
        let g1 = ObservationGrid::from_increments(3, 0.01, &permuted).unwrap();
        let s0 = spot_estimates(&g0, k, 1.5).unwrap();
        let s1 = spot_estimates(&g1, k, 1.5).unwrap();
        let pairs = [
            ("trace_power:q=2".to_string(), "trace_power:q=2".to_string()),
            ("identity:a=0,b=1".to_string(), format!("identity:a={},b={}", perm[0].min(perm[1]), perm[0].max(perm[1]))),
            ("entry_product:a=0,b=2,e=1,f=1".to_string(), format!("entry_product:a={},b={},e={},f={}", perm[0], perm[2], perm[1], perm[1])),
        ];
        for (f0, f1) in pairs {
            let a = parse_function(&f0, 3).unwrap();
            let b = parse_function(&f1, 3).unwrap();
            let va = estimate_corrected_overlapping(a.as_ref(), &s0).unwrap();
            let vb = estimate_corrected_overlapping(b.as_ref(), &s1).unwrap();
            prop_assert!((va - vb).abs() <= 1e-10 * va.abs().max(1.0), "{}: {} vs {}", f0, va, vb);
        }
    }
}
