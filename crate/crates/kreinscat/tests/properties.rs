use std::f64::consts::PI;

use kreinscat::c64;
use kreinscat::interface_models::{InterfaceModel, Strength};
use kreinscat::layer_ops::{LimitSide, SpectralParam};
use kreinscat::mesh::direction_quadrature;
use kreinscat::operator_core::{identity_report, KreinSystem};
use kreinscat::oracle::{born_amplitude, closed_form_free, partial_wave_model, sphere_layer_eigenvalues};
use kreinscat::potential_ops::PotentialSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_systems_satisfy_identities(seed in any::<u64>(), n in 2usize..10, m1 in 0usize..4, m2 in 0usize..4, inv in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = KreinSystem::random(&mut rng, n, m1, m2, inv);
        let zs = [c64::new(0.3, 1.1), c64::new(-0.7, 0.6), c64::new(1.4, -0.9)];
        let rep = identity_report(&sys, zs).unwrap();
        prop_assert!(rep.max() < 1e-8, "{rep:?}");
    }

    #[test]
    fn free_interface_models_are_unitary(alpha in -5.0f64..5.0, theta in -5.0f64..5.0, k in 0.2f64..4.0, a in 0.5f64..1.5) {
        let lambda = -k * k;
        for model in [InterfaceModel::Delta(Strength::Constant(alpha)), InterfaceModel::DeltaPrime(Strength::Constant(theta)), InterfaceModel::Dirichlet, InterfaceModel::Neumann] {
            let s = closed_form_free(a, &model, lambda, 6).unwrap();
            for (l, sl) in s.iter().enumerate() {
                prop_assert!((sl.norm() - 1.0).abs() < 1e-10, "{model:?} l = {l}: |S_l| = {}", sl.norm());
            }
        }
    }

    #[test]
    fn potential_phase_shifts_are_unitary(depth in -2.0f64..2.0, k in 0.3f64..3.0, alpha in -2.0f64..2.0) {
        let v = PotentialSpec::gaussian(depth, 0.5, 1.5, [0.0; 3]).unwrap();
        let s = partial_wave_model(1.0, &InterfaceModel::Delta(Strength::Constant(alpha)), Some(&v), -k * k, 4).unwrap();
        for sl in s {
            prop_assert!((sl.norm() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn born_amplitude_is_linear_in_depth(depth in 0.05f64..3.0, k in 0.2f64..3.0, theta in 0.0f64..PI) {
        let one = born_amplitude(&PotentialSpec::gaussian(depth, 0.5, 1.5, [0.0; 3]).unwrap(), -k * k, theta).unwrap();
        let two = born_amplitude(&PotentialSpec::gaussian(2.0 * depth, 0.5, 1.5, [0.0; 3]).unwrap(), -k * k, theta).unwrap();
        prop_assert!((two - one * 2.0).norm() <= 1e-12 * two.norm().max(1e-300));
    }

    #[test]
    fn layer_eigenvalues_conjugate_across_the_cut(lambda in -9.0f64..-0.01, a in 0.3f64..2.0) {
        let plus = sphere_layer_eigenvalues(a, SpectralParam::boundary(lambda, LimitSide::Plus).unwrap(), 5).unwrap();
        let minus = sphere_layer_eigenvalues(a, SpectralParam::boundary(lambda, LimitSide::Minus).unwrap(), 5).unwrap();
        for (p, m) in plus.iter().zip(&minus) {
            prop_assert!((p.s - m.s.conj()).norm() <= 1e-12 * p.s.norm());
            prop_assert!((p.d - m.d.conj()).norm() <= 1e-12 * p.d.norm());
        }
    }

    #[test]
    fn layer_eigenvalues_off_axis(re in -4.0f64..4.0, im in 0.1f64..4.0, a in 0.5f64..1.5) {
        let z = c64::new(re, im);
        let up = sphere_layer_eigenvalues(a, SpectralParam::interior(z).unwrap(), 4).unwrap();
        let down = sphere_layer_eigenvalues(a, SpectralParam::interior(z.conj()).unwrap(), 4).unwrap();
        for (u, d) in up.iter().zip(&down) {
            prop_assert!((u.s - d.s.conj()).norm() <= 1e-12 * u.s.norm());
        }
    }

    #[test]
    fn direction_weights_cover_the_sphere(n_polar in 2usize..24) {
        let dirs = direction_quadrature(n_polar).unwrap();
        let total: f64 = dirs.weights.iter().sum();
        prop_assert!((total - 4.0 * PI).abs() < 1e-12);
        for d in &dirs.directions {
            prop_assert!(((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - 1.0).abs() < 1e-14);
        }
    }
}
