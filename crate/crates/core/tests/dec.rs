use ldpc_replica::dec::*;
use ldpc_replica::ensemble::Ensemble;
use proptest::prelude::*;

const ENSEMBLES: [(usize, usize); 5] = [(2, 4), (3, 6), (4, 8), (5, 10), (6, 12)];

/// Eliminates `e_rv`, `e_ls` and `e_vf` in favour of `x = e_fv`, returning the
/// image of `x` under one round of the saddle equations together with the
/// full parameter vector.
fn scalar_map(l: usize, r: usize, eps: f64, x: f64) -> (f64, [f64; 4]) {
    let xl = x.powi(l as i32);
    let half = 0.5 * (1.0 - eps);
    let rv = eps / (1.0 - half * xl);
    let ls = xl * eps / (1.0 - half * xl);
    let vf = x.powi(l as i32 - 1) * rv * (eps + half * ls);
    (1.0 - (1.0 - vf).powi(r as i32 - 1), [x, vf, rv, ls])
}

/// Largest fixed point of the scalar map, found by scanning down from one.
fn largest_fixed_point(l: usize, r: usize, eps: f64) -> Option<[f64; 4]> {
    const GRID: usize = 20_000;
    let g = |x: f64| scalar_map(l, r, eps, x).0 - x;
    let mut hi = 1.0;
    for k in (1..GRID).rev() {
        let lo = k as f64 / GRID as f64;
        if g(lo) >= 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if g(m) >= 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Some(scalar_map(l, r, eps, a).1);
        }
        hi = lo;
    }
    None
}

fn oracle_bp_threshold(l: usize, r: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if largest_fixed_point(l, r, mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn entropy(l: usize, r: usize, eps: f64, p: [f64; 4]) -> f64 {
    let fp = DecFixedPoint::at(p[0], p[1], p[2], p[3]);
    dec_conditional_entropy(&Ensemble::new(l, r).unwrap(), eps, &fp)
}

#[test]
fn bp_thresholds_match_scalar_oracle() {
    for (l, r) in ENSEMBLES {
        let t = dec_bp_threshold(&Ensemble::new(l, r).unwrap(), 1e-7).unwrap();
        let o = oracle_bp_threshold(l, r);
        assert!((t - o).abs() < 1e-4, "({l},{r}): {t} vs {o}");
    }
}

#[test]
fn map_threshold_entropy_changes_sign_on_oracle_branch() {
    for (l, r) in [(3, 6), (4, 8), (5, 10), (6, 12)] {
        let t = dec_map_threshold(&Ensemble::new(l, r).unwrap(), 1e-7).unwrap();
        assert!(!t.degenerate);
        let below = largest_fixed_point(l, r, t.value - 1e-4).unwrap();
        let above = largest_fixed_point(l, r, t.value + 1e-4).unwrap();
        assert!(entropy(l, r, t.value - 1e-4, below) < 0.0, "({l},{r})");
        assert!(entropy(l, r, t.value + 1e-4, above) > 0.0, "({l},{r})");
    }
}

#[test]
fn quoted_thresholds_for_3_6() {
    let e = Ensemble::new(3, 6).unwrap();
    let bp = dec_bp_threshold(&e, 1e-7).unwrap();
    let map = dec_map_threshold(&e, 1e-7).unwrap();
    assert!((bp - 0.56891).abs() < 5e-4, "{bp}");
    assert!((map.value - 0.63865).abs() < 5e-4, "{map:?}");
}

#[test]
fn two_four_transition_is_degenerate() {
    let e = Ensemble::new(2, 4).unwrap();
    let bp = dec_bp_threshold(&e, 1e-7).unwrap();
    let map = dec_map_threshold(&e, 1e-7).unwrap();
    assert!(map.degenerate);
    assert!((map.value - bp).abs() < 1e-3);
}

#[test]
fn free_energy_route_agrees_with_entropy_formula() {
    let e = Ensemble::new(3, 6).unwrap();
    for eps in [0.3, 0.6, 0.64, 0.7, 0.9] {
        let fp = dec_forward_de(&e, eps, &SolverConfig::default()).unwrap();
        let chan = eps * eps.ln() + (1.0 - eps) * (1.0 - eps).ln();
        let via_f = (dec_free_energy(&e, eps, &fp) - chan) / std::f64::consts::LN_2;
        let h = dec_conditional_entropy(&e, eps, &fp);
        assert!((via_f - h).abs() < 1e-9, "{eps}: {via_f} vs {h}");
    }
}

#[test]
fn curve_examples() {
    let e = Ensemble::new(3, 6).unwrap();
    let pts = dec_entropy_curve(&e, &[0.5, 0.6, 0.66, 1.0]).unwrap();
    assert_eq!(pts[0].h_reported, 0.0);
    assert_eq!(pts[1].h_reported, 0.0);
    assert!(pts[1].h_nontrivial < 0.0);
    assert!(pts[2].h_reported > 0.0);
    assert!((pts[3].h_reported - 0.5).abs() < 1e-9);
}

#[test]
fn two_four_curve_has_no_suppressed_interval() {
    let e = Ensemble::new(2, 4).unwrap();
    let grid: Vec<f64> = (0..=400).map(|k| k as f64 / 400.0).collect();
    let pts = dec_entropy_curve(&e, &grid).unwrap();
    assert!(pts.iter().all(|p| p.h_nontrivial >= -1e-9), "{:?}", pts.iter().map(|p| p.h_nontrivial).fold(0.0, f64::min));
}

#[test]
fn halving_the_tolerance_stays_inside_the_old_one() {
    let e = Ensemble::new(4, 8).unwrap();
    for tol in [1e-3, 1e-5] {
        let a = dec_bp_threshold(&e, tol).unwrap();
        let b = dec_bp_threshold(&e, tol / 2.0).unwrap();
        assert!((a - b).abs() < tol);
        let a = dec_map_threshold(&e, tol).unwrap().value;
        let b = dec_map_threshold(&e, tol / 2.0).unwrap().value;
        assert!((a - b).abs() < tol);
    }
}

fn ensembles() -> impl Strategy<Value = (usize, usize)> {
    prop::sample::select(ENSEMBLES.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fixed_point_is_monotone_in_eps((l, r) in ensembles(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let e = Ensemble::new(l, r).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let cfg = SolverConfig::default();
        let p = dec_forward_de(&e, lo, &cfg).unwrap();
        let q = dec_forward_de(&e, hi, &cfg).unwrap();
        for (x, y) in p.params().iter().zip(q.params()) {
            prop_assert!(*x <= y + 1e-9, "{lo}: {p:?} / {hi}: {q:?}");
        }
        let (hp, hq) = (
            dec_conditional_entropy(&e, lo, &p).max(0.0),
            dec_conditional_entropy(&e, hi, &q).max(0.0),
        );
        prop_assert!(hp <= hq + 1e-9);
    }

    #[test]
    fn entropy_is_bounded_by_rate((l, r) in ensembles(), eps in 0.0f64..=1.0) {
        let e = Ensemble::new(l, r).unwrap();
        let pts = dec_entropy_curve(&e, &[eps]).unwrap();
        let p = pts[0];
        prop_assert!(p.fp.converged);
        prop_assert!(p.h_nontrivial <= e.design_rate() + 1e-9);
        prop_assert!(p.h_reported >= 0.0 && p.h_reported <= e.design_rate() + 1e-9);
        if p.h_nontrivial > 0.0 {
            prop_assert_eq!(p.h_reported, p.h_nontrivial);
        }
        let fv = 1.0 - (1.0 - p.fp.e_vf).powi(r as i32 - 1);
        prop_assert!((p.fp.e_fv - fv).abs() < 1e-9);
    }

    #[test]
    fn trivial_point_solves_the_saddle_equations((l, r) in ensembles(), eps in 0.0f64..=1.0) {
        let e = Ensemble::new(l, r).unwrap();
        let fp = dec_trivial_fixed_point(eps).unwrap();
        prop_assert!(dec_saddle_residual(&e, eps, &fp) <= 1e-15);
        prop_assert_eq!(dec_conditional_entropy(&e, eps, &fp), 0.0);
    }
}
