mod common;

use ccbs_core::haarstats::{histogram_overlap, similarity, Histogram};
use ccbs_core::interference::permanent;
use ccbs_core::lattice::{build_lattice, coupling_coefficient, heater_detunings, CouplingModel, HeaterBank, LatticeSpec};
use ccbs_core::linalg::CMatrix;
use ccbs_core::stats::ols_slope;
use num_complex::Complex64;
use proptest::prelude::*;

fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-9 * (1.0 + a.norm().max(b.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permanent_symmetries(n in 1usize..6, seed in any::<u64>(), shift in 0usize..6) {
        let a = common::random_complex(n, seed);
        let p = permanent(&a).unwrap();
        prop_assert!(close(permanent(&a.transpose()).unwrap(), p));
        let rows = CMatrix::from_fn(n, n, |i, j| a[((i + shift) % n, j)]);
        prop_assert!(close(permanent(&rows).unwrap(), p));
        let cols = CMatrix::from_fn(n, n, |i, j| a[(i, (j + shift) % n)]);
        prop_assert!(close(permanent(&cols).unwrap(), p));
        let mut scaled = a.clone();
        let lambda = Complex64::new(0.3, -1.2);
        for z in scaled.row_mut(0).iter_mut() {
            *z *= lambda;
        }
        prop_assert!(close(permanent(&scaled).unwrap(), p * lambda));
    }

    #[test]
    fn similarity_properties(p in prop::collection::vec(0.0f64..1.0, 8), q in prop::collection::vec(0.0f64..1.0, 8)) {
        prop_assume!(p.iter().sum::<f64>() > 1e-6 && q.iter().sum::<f64>() > 1e-6);
        let s = similarity(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((s - similarity(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert!((similarity(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        let (mut pr, mut qr) = (p.clone(), q.clone());
        pr.reverse();
        qr.reverse();
        prop_assert!((similarity(&pr, &qr).unwrap() - s).abs() < 1e-12);
    }

    #[test]
    fn overlap_properties(a in prop::collection::vec(0.0f64..1.0, 1..50), b in prop::collection::vec(0.0f64..1.0, 1..50)) {
        let edges = Histogram::uniform_edges(0.0, 1.0, 10);
        let ha = Histogram::from_samples(&a, edges.clone()).unwrap();
        let hb = Histogram::from_samples(&b, edges).unwrap();
        let o = histogram_overlap(&ha, &hb).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&o));
        prop_assert_eq!(o, histogram_overlap(&hb, &ha).unwrap());
        prop_assert!((histogram_overlap(&ha, &ha).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_decreases_with_distance(d1 in 1.0f64..40.0, gap in 1e-3f64..10.0) {
        let model = CouplingModel::default();
        prop_assert!(coupling_coefficient(d1 + gap, &model).unwrap() < coupling_coefficient(d1, &model).unwrap());
    }

    #[test]
    fn detunings_are_linear_in_power(powers in prop::collection::vec(0.0f64..500.0, 16), k in 0.0f64..3.0, z in 0.0f64..36.0) {
        let layout = build_lattice(&LatticeSpec::default()).unwrap();
        let base = HeaterBank::device(&layout).unwrap();
        let a = base.clone().with_powers(powers.clone()).unwrap();
        let b = base.with_powers(powers.iter().map(|p| p * k).collect()).unwrap();
        let da = heater_detunings(&a, &layout, z).unwrap();
        let db = heater_detunings(&b, &layout, z).unwrap();
        for (x, y) in da.iter().zip(&db) {
            prop_assert!((x * k - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn slope_of_a_line(a in -5.0f64..5.0, b in -5.0f64..5.0, n in 2usize..200) {
        let ys: Vec<f64> = (1..=n).map(|k| a * k as f64 + b).collect();
        prop_assert!((ols_slope(&ys).unwrap() - a).abs() < 1e-9);
    }
}
