//! Cross-checks of the quadrature kernels and risks against independent
//! linear-algebra and series computations.

use approx::assert_abs_diff_eq;
use hbrisk::domain::{
    compound_symmetry_eigenvectors, make_compound_symmetry, spectrum_of, ModelConfig, SpectrumSpec,
};
use hbrisk::quad::{xi1_general, xi2_general, xi_cs, QuadratureSettings};
use hbrisk::risk::{risk_hb_general, risk_phb_general};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn cs_matrix(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
}

fn spd(d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |i, j| {
        ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.5 + 0.1 * j as f64
    });
    &a * a.transpose() + DMatrix::identity(d, d) * 0.4
}

fn spec_from(sigma: &DMatrix<f64>, n: usize) -> SpectrumSpec {
    let d = sigma.nrows();
    let eig = SymmetricEigen::new(sigma.clone());
    let z = eig.eigenvectors.transpose() * DVector::from_element(d, 1.0);
    SpectrumSpec::new(
        ModelConfig::new(d, n).unwrap(),
        eig.eigenvalues.iter().copied().collect(),
        z.iter().copied().collect(),
    )
    .unwrap()
}

/// `det(I + sΣ)` and `det(I + sΣ)·(1 − (s/d) 1ᵀ Σ (I + sΣ)⁻¹ 1)` with `s = n(1−u)`.
fn xi_oracle(sigma: &DMatrix<f64>, n: usize, u: f64) -> (f64, f64) {
    let d = sigma.nrows();
    let s = n as f64 * (1.0 - u);
    let m = DMatrix::identity(d, d) + sigma * s;
    let det = m.determinant();
    let ones = DVector::from_element(d, 1.0);
    let inv = m.try_inverse().unwrap();
    let quad = (ones.transpose() * sigma * inv * &ones)[(0, 0)];
    (det, det * (1.0 - s / d as f64 * quad))
}

#[test]
fn cs_eigenvalues_match_dense_decomposition() {
    for &(d, rho) in &[(5, 0.5), (8, -0.1), (12, 0.9)] {
        let cs = make_compound_symmetry(d, 1, rho).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(cs_matrix(d, rho))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        let mut want = spectrum_of(&cs).lambdas().to_vec();
        want.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let m = cs.matrix();
        for i in 0..d {
            for j in 0..d {
                assert_eq!(m[i * d + j], cs_matrix(d, rho)[(i, j)]);
            }
        }
    }
}

#[test]
fn eigenvectors_diagonalise_compound_symmetry() {
    let d = 7;
    let cols = compound_symmetry_eigenvectors(d);
    let p = DMatrix::from_fn(d, d, |i, j| cols[j][i]);
    let cs = make_compound_symmetry(d, 1, 0.35).unwrap();
    let lambda = p.transpose() * cs_matrix(d, 0.35) * &p;
    let spec = spectrum_of(&cs);
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { spec.lambdas()[i] } else { 0.0 };
            assert_abs_diff_eq!(lambda[(i, j)], want, epsilon = 1e-12);
        }
    }
}

#[test]
fn xi_cs_is_a_determinant() {
    for &(d, n, rho) in &[(5, 1, 0.0), (5, 3, 0.5), (10, 2, -0.1), (20, 1, 0.8)] {
        let cs = make_compound_symmetry(d, n, rho).unwrap();
        for u in [0.0, 0.2, 0.7, 1.0] {
            let (det, _) = xi_oracle(&cs_matrix(d, rho), n, u);
            assert_abs_diff_eq!(xi_cs(u, &cs).unwrap(), det, epsilon = 1e-9 * det);
        }
    }
}

#[test]
fn general_xi_match_determinant_lemma() {
    for d in [4, 6, 9] {
        let sigma = spd(d);
        let spec = spec_from(&sigma, 2);
        for u in [0.0, 0.3, 0.9] {
            let (det, det1) = xi_oracle(&sigma, 2, u);
            assert_abs_diff_eq!(xi2_general(u, &spec).unwrap(), det, epsilon = 1e-9 * det);
            assert_abs_diff_eq!(xi1_general(u, &spec).unwrap(), det1, epsilon = 1e-9 * det);
        }
    }
}

#[test]
fn general_risks_below_mle_for_dense_covariance() {
    let s = QuadratureSettings::default();
    for d in [4, 6, 9] {
        let spec = spec_from(&spd(d), 3);
        let hb = risk_hb_general(&spec, &s).unwrap();
        let phb = risk_phb_general(&spec, &s).unwrap();
        let bound = d as f64 / 3.0;
        assert!(hb.value > 0.0 && hb.value < bound - hb.err_estimate);
        assert!(phb.value > 0.0 && phb.value < bound - phb.err_estimate);
    }
}

#[test]
fn hb_risk_ignores_variance_along_ones() {
    // HB is equivariant under shifts along 1, so extra variance there is invisible.
    let s = QuadratureSettings::default();
    let cs = make_compound_symmetry(8, 2, 0.3).unwrap();
    let base = spectrum_of(&cs);
    let mut l = base.lambdas().to_vec();
    l[7] += 5.0;
    let bumped = SpectrumSpec::new(cs.config(), l, base.z().to_vec()).unwrap();
    let a = risk_hb_general(&base, &s).unwrap().value;
    let b = risk_hb_general(&bumped, &s).unwrap().value;
    assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    assert!(
        risk_phb_general(&bumped, &s).unwrap().value > risk_phb_general(&base, &s).unwrap().value
    );
}
