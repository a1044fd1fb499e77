//! Qualitative properties of the risk difference, the bracketing constants
//! and the perturbed-spectrum bound.

use approx::assert_abs_diff_eq;
use hbrisk::bounds::{
    alpha_d, compute_bounds, compute_perturbed_bounds, find_crossover, DEFAULT_SOLVER_TOL,
};
use hbrisk::domain::{make_compound_symmetry, perturb_spectrum, ModelConfig, PerturbedSpectrum};
use hbrisk::quad::QuadratureSettings;
use hbrisk::risk::{
    i_of_rho, j_of_d, lim_i_at_one, risk_bound_k, risk_diff_h, risk_hb_cs, risk_hb_general,
    risk_phb_cs, risk_phb_general,
};

const UNIFORM_J_BOUND: f64 = 0.8323381;

fn cfg(d: usize, n: usize) -> ModelConfig {
    ModelConfig::new(d, n).unwrap()
}

fn s() -> QuadratureSettings {
    QuadratureSettings::default()
}

#[test]
fn h_increases_and_i_decreases_on_unit_interval() {
    for &(d, n) in &[(5, 1), (10, 2), (30, 4), (100, 20)] {
        let mut prev_h = f64::NEG_INFINITY;
        let mut prev_i = f64::INFINITY;
        for k in 1..60 {
            let cs = make_compound_symmetry(d, n, k as f64 / 60.0).unwrap();
            let h = risk_diff_h(&cs, &s()).unwrap().value;
            let i = i_of_rho(&cs, &s()).unwrap().value;
            assert!(h > prev_h, "H not increasing at d={d} n={n} k={k}");
            assert!(i < prev_i && i > 0.0 && i < 1.0);
            prev_h = h;
            prev_i = i;
        }
    }
}

#[test]
fn h_negative_at_and_below_rho_l() {
    for &(d, n) in &[(5, 1), (10, 2), (50, 5), (200, 20)] {
        let b = compute_bounds(cfg(d, n), &s()).unwrap();
        let lo = -1.0 / (d as f64 - 1.0) + 1e-3;
        for k in 0..=10 {
            let rho = lo + (b.rho_l - lo) * k as f64 / 10.0;
            let h = risk_diff_h(&make_compound_symmetry(d, n, rho).unwrap(), &s()).unwrap();
            assert!(h.value < 0.0, "H({rho}) = {} at d={d} n={n}", h.value);
        }
    }
}

#[test]
fn b_positive_across_sizes() {
    for d in 5..=200 {
        for n in [1, 2, 5, 20] {
            let b = compute_bounds(cfg(d, n), &s()).unwrap();
            assert!(b.b > 0.0 && b.delta_star > 0.0 && b.delta_star < 1.0);
            assert!(0.0 < b.rho_l && b.rho_l < b.rho_u && b.rho_u < 1.0);
        }
    }
}

#[test]
fn bound_chain_on_j() {
    for d in 5..=200 {
        let j = j_of_d(d, &s()).unwrap().value;
        assert!(j < alpha_d(d).sqrt(), "J({d}) = {j}");
        assert!(j < UNIFORM_J_BOUND);
    }
    assert_abs_diff_eq!(alpha_d(8).sqrt(), 0.8333333, epsilon = 1e-7);
    assert!(lim_i_at_one(cfg(8, 1), &s()).unwrap().value < 0.8333333);
}

#[test]
fn lim_i_decreases_in_n() {
    for d in [5, 20, 100] {
        let mut prev = f64::INFINITY;
        for n in 1..=30 {
            let v = lim_i_at_one(cfg(d, n), &s()).unwrap().value;
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }
}

#[test]
fn hb_limit_independent_of_d() {
    for &(d, n) in &[(5, 1), (17, 3), (100, 20)] {
        let r = risk_hb_cs(&make_compound_symmetry(d, n, 1.0 - 1e-9).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, 3.0 / n as f64, epsilon = 1e-6);
    }
}

#[test]
fn phb_beats_hb_at_zero_correlation() {
    let cs = make_compound_symmetry(100, 20, 0.0).unwrap();
    assert!(risk_phb_cs(&cs, &s()).unwrap().value < risk_hb_cs(&cs).unwrap().value);
}

#[test]
fn crossover_decreases_with_d() {
    let mut roots = Vec::new();
    for d in [25, 50, 100, 200] {
        let c = find_crossover(cfg(d, 20), &s(), DEFAULT_SOLVER_TOL).unwrap();
        assert!(c.rho_star > c.bounds.rho_l);
        roots.push((d, c.rho_star));
    }
    assert!(roots.windows(2).all(|w| w[1].1 < w[0].1));
    let scaled: Vec<f64> = roots.iter().map(|(d, r)| r * (*d as f64 - 1.0)).collect();
    for v in &scaled[1..] {
        assert!(*v < 3.0 * scaled[0] && *v > scaled[0] / 3.0, "{scaled:?}");
    }
}

#[test]
fn crossover_tolerance_costs_about_one_step_per_bit() {
    let a = find_crossover(cfg(10, 2), &s(), 1e-6).unwrap();
    let b = find_crossover(cfg(10, 2), &s(), 0.5e-6).unwrap();
    assert!(b.iterations <= a.iterations + 2);
    assert!(b.residual <= 0.5e-6);
}

#[test]
fn k_bounds_the_perturbed_difference() {
    for &(d, n) in &[(10, 2), (20, 5)] {
        let bounds = compute_bounds(cfg(d, n), &s()).unwrap();
        for frac in [0.25, 0.5, 0.75] {
            for k in 1..=9 {
                let base = make_compound_symmetry(d, n, k as f64 / 10.0).unwrap();
                let ps = PerturbedSpectrum::with_bound(base, frac * bounds.b, bounds.b).unwrap();
                let spec = perturb_spectrum(&ps);
                let hb = risk_hb_general(&spec, &s()).unwrap();
                let phb = risk_phb_general(&spec, &s()).unwrap();
                let kb = risk_bound_k(&ps, &s()).unwrap();
                let slack = 2.0 * (hb.err_estimate + phb.err_estimate + kb.err_estimate);
                assert!(hb.value - phb.value <= kb.value + slack);
            }
        }
    }
}

#[test]
fn k_examples() {
    let bounds = compute_bounds(cfg(10, 2), &s()).unwrap();
    let at = |rho: f64| {
        let base = make_compound_symmetry(10, 2, rho).unwrap();
        PerturbedSpectrum::with_bound(base, bounds.b / 2.0, bounds.b).unwrap()
    };
    let ps = at(0.8);
    let spec = perturb_spectrum(&ps);
    assert!(risk_bound_k(&ps, &s()).unwrap().value < 0.0);
    assert!(
        risk_hb_general(&spec, &s()).unwrap().value < risk_phb_general(&spec, &s()).unwrap().value
    );
    assert!(risk_bound_k(&at(0.01), &s()).unwrap().value > 0.0);
}

#[test]
fn k_tends_to_minus_h_without_perturbation() {
    let base = make_compound_symmetry(10, 2, 0.4).unwrap();
    let ps = PerturbedSpectrum::with_bound(base, 1e-12, 1.0).unwrap();
    let k = risk_bound_k(&ps, &s()).unwrap().value;
    let h = risk_diff_h(&base, &s()).unwrap().value;
    assert_abs_diff_eq!(k, -h, epsilon = 1e-9);
}

#[test]
fn perturbed_bounds_ordered() {
    for &(d, n) in &[(5, 1), (10, 2), (50, 20)] {
        let b = compute_bounds(cfg(d, n), &s()).unwrap().b;
        for frac in [0.01, 0.5, 0.99] {
            let p = compute_perturbed_bounds(cfg(d, n), frac * b, &s()).unwrap();
            assert!(0.0 < p.rho_tilde_l && p.rho_tilde_l < p.rho_tilde_u && p.rho_tilde_u < 1.0);
            assert_abs_diff_eq!(
                p.alpha_star_d,
                p.beta_star.powi(2) * p.base.alpha_d,
                epsilon = 1e-15
            );
        }
    }
}

#[test]
fn perturbed_general_risk_below_mle() {
    let b = compute_bounds(cfg(5, 1), &s()).unwrap().b;
    let ps =
        PerturbedSpectrum::new(make_compound_symmetry(5, 1, 0.5).unwrap(), b / 2.0, &s()).unwrap();
    let spec = perturb_spectrum(&ps);
    assert_abs_diff_eq!(spec.lambdas()[4], 3.0 + b / 2.0, epsilon = 1e-15);
    assert!(risk_hb_general(&spec, &s()).unwrap().value < 5.0);
}
