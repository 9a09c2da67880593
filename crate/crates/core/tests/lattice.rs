use nltzm::lattice::{build_hamiltonian, position_operator, LatticeSpec, StateVector, C64};
use nltzm::linalg::symmetric_eigenvalues;
use proptest::prelude::*;

fn state_strategy(n: usize) -> impl Strategy<Value = StateVector> {
    proptest::collection::vec((-8.0f64..8.0, -8.0f64..8.0), n)
        .prop_map(|v| StateVector::new(v.into_iter().map(|(re, im)| C64::new(re, im)).collect()))
}

#[test]
fn reference_chain_layout() {
    let spec = LatticeSpec::default();
    assert_eq!(spec.n_sites(), 161);
    let x = position_operator(&spec);
    assert_eq!((x[0], x[160]), (1.0, 161.0));
    let (left, right) = spec.interface_sites();
    assert_eq!((x[left], x[right]), (82.0, 83.0));
}

#[test]
fn four_site_position_operator() {
    let spec = LatticeSpec::uniform(1, 2.5, 1.0, 0.05, 2.0, 2.5, 2.5, 1, 1);
    assert_eq!(position_operator(&spec), vec![1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn plateau_amplitude_on_one_bond_doubles_its_coupling() {
    let spec = LatticeSpec::default();
    let mut amps = vec![C64::new(0.0, 0.0); 161];
    // bond b_3 -- a_4: storage indices 5 and 6
    amps[6] = C64::new(30f64.sqrt(), 0.0);
    let h = build_hamiltonian(&spec, &StateVector::new(amps)).unwrap();
    assert!((h.bonds()[5] - 2.5).abs() < 1e-14);
    assert_eq!(h.bonds()[3], 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_symmetric_with_zero_diagonal(state in state_strategy(161)) {
        let h = build_hamiltonian(&LatticeSpec::default(), &state).unwrap().to_dense();
        prop_assert_eq!((&h - h.transpose()).amax(), 0.0);
        prop_assert!(h.diagonal().iter().all(|&d| d == 0.0));
        for i in 0..161usize {
            for j in 0..161usize {
                if i.abs_diff(j) > 1 {
                    prop_assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn spectrum_is_paired_about_zero(state in state_strategy(161)) {
        let h = build_hamiltonian(&LatticeSpec::default(), &state).unwrap();
        let e = symmetric_eigenvalues(&h.to_dense());
        let n = e.len();
        for k in 0..n {
            prop_assert!((e[k] + e[n - 1 - k]).abs() < 1e-10, "{} vs {}", e[k], e[n - 1 - k]);
        }
    }

    #[test]
    fn kerr_coupling_grows_with_amplitude(cell in 0usize..40, a in 0.0f64..10.0, extra in 1e-3f64..5.0) {
        let spec = LatticeSpec::default();
        let site = 2 * cell + 2;
        let mut lo = vec![C64::new(0.0, 0.0); 161];
        lo[site] = C64::new(a, 0.0);
        let mut hi = lo.clone();
        hi[site] = C64::new(a + extra, 0.0);
        let bond = site - 1;
        let k_lo = build_hamiltonian(&spec, &StateVector::new(lo)).unwrap().bonds()[bond];
        let k_hi = build_hamiltonian(&spec, &StateVector::new(hi)).unwrap().bonds()[bond];
        prop_assert!(k_hi > k_lo);
    }

    #[test]
    fn construction_is_pure(state in state_strategy(161)) {
        let spec = LatticeSpec::default();
        let a = build_hamiltonian(&spec, &state).unwrap();
        let b = build_hamiltonian(&spec, &state).unwrap();
        prop_assert!(a.bonds().iter().zip(b.bonds()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
