use proptest::prelude::*;
use synrisk_core::debtrank::{debtrank_iterated, debtrank_nonlinear, debtrank_original, ExposureSystem};

fn system() -> impl Strategy<Value = (ExposureSystem, Vec<f64>)> {
    (2usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), 0.0..2.0f64], n), n),
            prop::collection::vec(0.2..3.0f64, n),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0..0.5f64], n),
        )
            .prop_map(|(mut w, e, shock)| {
                for (i, row) in w.iter_mut().enumerate() {
                    row[i] = 0.0;
                }
                (ExposureSystem::new(w, e).unwrap(), shock)
            })
    })
}

proptest! {
    #[test]
    fn distress_rises_and_stays_bounded((s, shock) in system()) {
        for t in [debtrank_original(&s, &shock).unwrap(), debtrank_iterated(&s, &shock).unwrap()] {
            for w in t.h.windows(2) {
                for i in 0..s.len() {
                    prop_assert!(w[1][i] >= w[0][i] - 1e-15);
                    prop_assert!((0.0..=1.0).contains(&w[1][i]));
                }
            }
        }
    }

    #[test]
    fn original_active_sets_are_disjoint((s, shock) in system()) {
        let t = debtrank_original(&s, &shock).unwrap();
        let mut all: Vec<usize> = t.active_sets.concat();
        let len = all.len();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), len);
    }

    #[test]
    fn reverberation_adds_distress((s, shock) in system()) {
        let once = debtrank_original(&s, &shock).unwrap();
        let iterated = debtrank_iterated(&s, &shock).unwrap();
        for (a, b) in once.final_h().iter().zip(iterated.final_h()) {
            prop_assert!(b >= &(a - 1e-9));
        }
    }

    #[test]
    fn nonlinear_family_is_ordered((s, shock) in system(), alpha in 0.0..5.0f64) {
        let linear = debtrank_iterated(&s, &shock).unwrap();
        let zero = debtrank_nonlinear(&s, &shock, 0.0).unwrap();
        let steep = debtrank_nonlinear(&s, &shock, alpha).unwrap();
        for i in 0..s.len() {
            prop_assert!((zero.final_h()[i] - linear.final_h()[i]).abs() < 1e-9);
            prop_assert!(steep.final_h()[i] <= linear.final_h()[i] + 1e-9);
        }
    }
}

#[test]
fn rejects_bad_equity_and_shock() {
    assert!(ExposureSystem::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![1.0, 0.0]).is_err());
    let s = ExposureSystem::from_leverage(vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
    assert!(debtrank_original(&s, &[1.5, 0.0]).is_err());
    assert!(debtrank_original(&s, &[0.1]).is_err());
}
