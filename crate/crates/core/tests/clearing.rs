use proptest::prelude::*;
use synrisk_core::clearing::{
    clear_eisenberg_noe, clear_fictitious_default, clear_rogers_veraart, total_obligations, FinancialSystem,
};

fn system() -> impl Strategy<Value = FinancialSystem> {
    (2usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), 0.0..3.0f64], n), n),
            prop::collection::vec(0.0..2.0f64, n),
        )
            .prop_map(|(mut l, e)| {
                for (i, row) in l.iter_mut().enumerate() {
                    row[i] = 0.0;
                }
                FinancialSystem::new(l, e).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn payments_are_feasible_and_classified(s in system()) {
        let r = clear_eisenberg_noe(&s).unwrap();
        let p_bar = total_obligations(&s);
        for i in 0..s.len() {
            prop_assert!(r.p[i] >= 0.0 && r.p[i] <= p_bar[i]);
            let short = r.p[i] < p_bar[i] - 1e-9 * p_bar[i].max(1.0);
            prop_assert_eq!(short, r.defaults.contains(&i));
            if !short {
                prop_assert!(r.net_positions[i] >= -1e-9);
            }
        }
    }

    #[test]
    fn fictitious_default_matches_iteration(s in system()) {
        let a = clear_eisenberg_noe(&s).unwrap();
        let b = clear_fictitious_default(&s).unwrap();
        for (x, y) in a.p.iter().zip(&b.p) {
            prop_assert!((x - y).abs() < 1e-8, "{:?} vs {:?}", a.p, b.p);
        }
    }

    #[test]
    fn discounts_never_raise_payments(s in system(), alpha in 0.0..=1.0f64, beta in 0.0..=1.0f64) {
        let en = clear_eisenberg_noe(&s).unwrap();
        let rv = clear_rogers_veraart(&s, alpha, beta).unwrap();
        for (x, y) in rv.p.iter().zip(&en.p) {
            prop_assert!(*x <= y + 1e-9);
        }
    }

    #[test]
    fn more_cash_never_lowers_payments(s in system(), bump in 0.0..1.0f64) {
        let base = clear_eisenberg_noe(&s).unwrap();
        let richer_e: Vec<f64> = s.external().iter().map(|e| e + bump).collect();
        let richer = FinancialSystem::new(s.liabilities().clone(), richer_e).unwrap();
        let r = clear_eisenberg_noe(&richer).unwrap();
        for (x, y) in r.p.iter().zip(&base.p) {
            prop_assert!(*x >= y - 1e-9);
        }
    }
}

#[test]
fn strictly_positive_cash_gives_a_unique_vector() {
    // A ring draining into bank 3, which owes nothing.
    let l = vec![
        vec![0.0, 4.0, 0.0, 0.0],
        vec![0.0, 0.0, 4.0, 0.0],
        vec![2.0, 0.0, 0.0, 2.0],
        vec![0.0; 4],
    ];
    let r = clear_eisenberg_noe(&FinancialSystem::new(l, vec![0.1, 0.2, 0.3, 0.1]).unwrap()).unwrap();
    assert_eq!(r.unique, Some(true));
    assert_eq!(r.defaults, vec![0, 1, 2]);
    // Defaulted banks pay out everything they hold.
    for i in 0..3 {
        assert!(r.net_positions[i].abs() < 1e-9);
    }
    // Bank 2 pays 0.6 + p2 / 2 = p2.
    assert!((r.p[2] - 1.2).abs() < 1e-12);
}

#[test]
fn zero_cash_ring_has_many_clearing_vectors() {
    let l = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let r = clear_eisenberg_noe(&FinancialSystem::new(l, vec![0.0, 0.0]).unwrap()).unwrap();
    assert_eq!(r.p, vec![1.0, 1.0]);
    assert_eq!(r.unique, Some(false));
}

#[test]
fn rejects_bad_input() {
    assert!(FinancialSystem::new(vec![vec![0.0, -1.0], vec![0.0, 0.0]], vec![0.0; 2]).is_err());
    assert!(FinancialSystem::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![0.0; 2]).is_err());
    assert!(FinancialSystem::new(vec![vec![0.0; 2]; 2], vec![0.0]).is_err());
}
