use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use rabi_blockade::dissipator::{apply_dissipator, transition_rates};
use rabi_blockade::observables::build_xplus;
use rabi_blockade::spectrum::{atom_lowering, cavity_annihilation, diagonalize_dressed, CMatrix};
use rabi_blockade::{FockTruncation, RabiParams};

const KEEP: usize = 10;

fn basis(g: f64) -> Arc<rabi_blockade::spectrum::DressedBasis> {
    Arc::new(diagonalize_dressed(&RabiParams::resonant(g), FockTruncation::for_coupling(g)).unwrap())
}

fn hermitian(entries: &[(f64, f64)]) -> CMatrix {
    let m = CMatrix::from_fn(KEEP, KEEP, |j, k| {
        let (re, im) = entries[j * KEEP + k];
        Complex64::new(re, im)
    });
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn matrix_entries() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), KEEP * KEEP)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rates_scale_linearly(g in 0.0f64..2.5, gamma in 1e-4f64..1e-1, kappa in 1e-4f64..1e-1, s in 0.1f64..10.0) {
        let b = basis(g);
        let base = transition_rates(&b, gamma, kappa, KEEP).unwrap();
        let scaled = transition_rates(&b, s * gamma, s * kappa, KEEP).unwrap();
        prop_assert_eq!(base.channels.len(), scaled.channels.len());
        for (c, d) in base.channels.iter().zip(&scaled.channels) {
            prop_assert!((d.rate_cavity - s * c.rate_cavity).abs() <= 1e-12 * d.rate_cavity.max(1e-300));
            prop_assert!((d.rate_atom - s * c.rate_atom).abs() <= 1e-12 * d.rate_atom.max(1e-300));
        }
    }

    #[test]
    fn channels_lower_energy_between_opposite_parities(g in 0.0f64..3.0) {
        let spec = transition_rates(&basis(g), 1e-2, 1e-2, KEEP).unwrap();
        for c in &spec.channels {
            prop_assert!(c.delta > 0.0);
            prop_assert_ne!(c.from.parity, c.to.parity);
            prop_assert!(c.rate_cavity >= 0.0 && c.rate_atom >= 0.0);
        }
    }

    #[test]
    fn same_parity_elements_vanish(g in 0.0f64..3.0) {
        let b = basis(g);
        let a = cavity_annihilation(b.truncation);
        let s = atom_lowering(b.truncation);
        for op in [&a - a.adjoint(), &s - s.adjoint()] {
            let m = b.project(&op, KEEP).unwrap();
            for j in 0..KEEP {
                for k in 0..KEEP {
                    if b.states[j].parity == b.states[k].parity {
                        prop_assert!(m[(j, k)].norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn dissipator_is_linear_and_trace_free(
        g in 0.0f64..2.0,
        x in matrix_entries(),
        y in matrix_entries(),
        alpha in -2.0f64..2.0,
    ) {
        let spec = transition_rates(&basis(g), 1e-2, 2e-2, KEEP).unwrap();
        let (rx, ry) = (hermitian(&x), hermitian(&y));
        let combo = &rx * Complex64::new(alpha, 0.0) + &ry;
        let lhs = apply_dissipator(&spec, &combo).unwrap();
        let rhs = apply_dissipator(&spec, &rx).unwrap() * Complex64::new(alpha, 0.0) + apply_dissipator(&spec, &ry).unwrap();
        prop_assert!((&lhs - &rhs).camax() < 1e-12);
        prop_assert!(lhs.trace().norm() < 1e-12);
        prop_assert!((&lhs - lhs.adjoint()).camax() < 1e-14);
    }

    #[test]
    fn output_operator_only_lowers(g in 0.0f64..3.0) {
        let b = basis(g);
        let out = build_xplus(&b, KEEP).unwrap();
        for j in 0..KEEP {
            for k in 0..KEEP {
                if out.xplus[(j, k)].norm() > 0.0 {
                    prop_assert!(b.states[j].energy < b.states[k].energy);
                }
            }
        }
    }
}
