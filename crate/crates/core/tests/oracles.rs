mod common;

use ccbs_core::haarstats::haar_unitary;
use ccbs_core::interference::{distribution, enumerate_patterns, output_probability, permanent, FockPattern, Statistics};
use common::{distinguishable_brute, fock_evolve, naive_permanent, random_complex};

#[test]
fn glynn_matches_permutation_sum() {
    for n in 1..=7 {
        for s in 0..5 {
            let a = random_complex(n, 100 * n as u64 + s);
            let fast = permanent(&a).unwrap();
            let slow = naive_permanent(&a);
            assert!((fast - slow).norm() <= 1e-10 * slow.norm().max(1e-300), "n={n}: {fast} vs {slow}");
        }
    }
}

#[test]
fn permanent_distribution_matches_fock_evolution() {
    let u = haar_unitary(6, 17).unwrap();
    for input_modes in [[0usize, 1, 2], [0, 0, 4], [1, 3, 5]] {
        let input = FockPattern::from_modes(6, &input_modes).unwrap();
        let state = fock_evolve(&u, &input);
        let table = distribution(&u, &input, Statistics::Indistinguishable, false).unwrap();
        assert_eq!(table.len(), 56);
        assert_eq!(state.len(), 56);
        for (pattern, p) in table.patterns.iter().zip(&table.probabilities) {
            let want = state[pattern.occupations()].norm_sqr();
            assert!((p - want).abs() < 1e-12, "{pattern:?}: {p} vs {want}");
        }
        assert!((table.total_mass - 1.0).abs() < 1e-12);
    }
}

#[test]
fn distinguishable_probabilities_match_assignment_sum() {
    let u = haar_unitary(5, 3).unwrap();
    let input = FockPattern::from_modes(5, &[0, 2, 2]).unwrap();
    let mut total = 0.0;
    for output in enumerate_patterns(5, 3, false) {
        let p = output_probability(&u, &input, &output, Statistics::Distinguishable).unwrap();
        let want = distinguishable_brute(&u, &input, &output);
        assert!((p - want).abs() < 1e-12, "{output:?}");
        total += p;
    }
    assert!((total - 1.0).abs() < 1e-12);
}
