mod common;

use std::f64::consts::PI;

use riga_core::assembly::{apply_dirichlet, assemble_1d, dof_count, DiscreteSystem};
use riga_core::bspline::SplineSpace;

use common::{dense, generalized_eig, oracle, separable_oracle};

#[test]
fn linear_elements_match_closed_form_spectrum() {
    // p = 1: λ_k^h = (6/h²)(1 − cos kπh)/(2 + cos kπh).
    let ne = 16;
    let sys = DiscreteSystem::new(1, ne, 1, 0).unwrap();
    let (values, _) = oracle(&sys);
    let h = 1.0 / ne as f64;
    for (k, v) in values.iter().enumerate() {
        let c = ((k + 1) as f64 * PI * h).cos();
        let expected = 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
        assert!((v - expected).abs() < 1e-10 * expected, "mode {}: {v} vs {expected}", k + 1);
    }
}

#[test]
fn tensor_spectrum_is_sum_of_one_dimensional_spectra() {
    for (d, ne, p, l) in [(2, 8, 2, 1), (2, 4, 3, 2), (3, 4, 2, 1)] {
        let sys = DiscreteSystem::new(d, ne, p, l).unwrap();
        let (full, _) = oracle(&sys);
        let (sep, _) = separable_oracle(&sys);
        for (a, b) in full.iter().zip(&sep) {
            assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
        }
    }
}

#[test]
fn discrete_eigenvalues_bound_exact_ones_from_above() {
    for p in 1..=5 {
        for l in 0..=3 {
            let sys = DiscreteSystem::new(1, 8, p, l).unwrap();
            let (values, _) = oracle(&sys);
            for (k, v) in values.iter().enumerate() {
                let exact = PI * PI * ((k + 1) * (k + 1)) as f64;
                assert!(*v >= exact * (1.0 - 1e-12), "p {p} level {l} mode {}", k + 1);
            }
        }
    }
}

#[test]
fn refined_space_has_smaller_eigenvalues() {
    // The rIGA space contains the IGA space, so by min–max every λ_k decreases.
    for p in 2..=4 {
        let (iga, _) = oracle(&DiscreteSystem::new(1, 16, p, 0).unwrap());
        for l in 1..=4 {
            let (riga, _) = oracle(&DiscreteSystem::new(1, 16, p, l).unwrap());
            assert_eq!(riga.len(), dof_count(16, p, l, 1));
            for (a, b) in riga.iter().zip(&iga) {
                assert!(*a <= b * (1.0 + 1e-12), "p {p} level {l}");
            }
        }
    }
}

#[test]
fn mass_reproduces_integrals_of_products() {
    // 1ᵀ M 1 over the full basis is ∫1 = 1 and 1ᵀ K 1 = 0 (partition of unity).
    for (ne, p, l) in [(8, 1, 0), (8, 3, 2), (16, 5, 4)] {
        let space = SplineSpace::riga(ne, p, l).unwrap();
        let (k, m) = assemble_1d(&space);
        let ones = vec![1.0; k.dim()];
        let mass: f64 = m.matvec(&ones).unwrap().iter().sum();
        let stiff: f64 = k.matvec(&ones).unwrap().iter().map(|v| v.abs()).sum();
        assert!((mass - 1.0).abs() < 1e-13);
        assert!(stiff < 1e-10);
        let (kd, md) = apply_dirichlet(&k, &m).unwrap();
        let (values, _) = generalized_eig(&dense(&kd), &dense(&md));
        assert!((values[0] / (PI * PI) - 1.0).abs() < 0.05);
    }
}
