use gasket::address::vertex_count;
use gasket::harmonic::GraphFunction;
use gasket::scalar::{Rational, Scalar};
use gasket::sobolev::*;
use num_traits::Zero;
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Rational> {
    (-30i64..=30, 1i64..=12).prop_map(|(n, d)| Rational::ratio(n, d))
}

fn graph_function(m: usize) -> impl Strategy<Value = GraphFunction<Rational>> {
    proptest::collection::vec(rational(), vertex_count(m)).prop_map(move |v| GraphFunction::new(m, v).unwrap())
}

/// Per-level sums of squared coefficients, exactly.
fn level_sums(e: &TentExpansion<Rational>) -> Vec<Rational> {
    e.coefficients
        .iter()
        .map(|row| row.iter().fold(Rational::zero(), |a, c| a + c.clone() * c.clone()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn expansion_round_trip(m in 1usize..=5, seed in any::<u64>()) {
        let u = GraphFunction::from_fn(m, |i| {
            let h = (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ seed;
            Rational::ratio((h % 41) as i64 - 20, 1 + (h >> 40) as i64 % 7)
        }).unwrap();
        let e = tent_coefficients(&u);
        prop_assert_eq!(e.level(), m);
        prop_assert_eq!(reconstruct(&e).unwrap(), u);
    }

    #[test]
    fn coefficients_are_linear(u in graph_function(3), v in graph_function(3), a in rational(), b in rational()) {
        let w = u.scaled(&a).plus(&v.scaled(&b)).unwrap();
        let (eu, ev, ew) = (tent_coefficients(&u), tent_coefficients(&v), tent_coefficients(&w));
        for n in 0..3 {
            for i in 0..ew.coefficients[n].len() {
                let want = a.clone() * eu.coefficients[n][i].clone() + b.clone() * ev.coefficients[n][i].clone();
                prop_assert_eq!(&ew.coefficients[n][i], &want);
            }
        }
        for i in 0..3 {
            let want = a.clone() * eu.harmonic.boundary[i].clone() + b.clone() * ev.harmonic.boundary[i].clone();
            prop_assert_eq!(&ew.harmonic.boundary[i], &want);
        }
    }

    #[test]
    fn partial_sums_are_nondecreasing(u in graph_function(4), sigma in 0.7f64..1.3) {
        let norm = sobolev_norm(&tent_coefficients(&u), sigma).unwrap();
        prop_assert!(norm.partials.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(norm.partials[0] >= norm.base);
        // Truncating the data truncates the partial sums.
        let short = sobolev_norm_at(&tent_coefficients(&u.truncate(2).unwrap()), sigma, 4).unwrap();
        prop_assert_eq!(&short.partials[..], &norm.partials[..2]);
    }

    #[test]
    fn cell_scaling_law(u in graph_function(3), cell in 0usize..3, sigma in 0.7f64..1.3) {
        let mut u = u;
        for i in 0..3 {
            u.values_mut()[i] = Rational::zero();
        }
        let placed = GraphFunction::placed_in_cell(&u, 1, cell).unwrap();
        let (e, p) = (tent_coefficients(&u), tent_coefficients(&placed));
        let (se, sp) = (level_sums(&e), level_sums(&p));
        prop_assert!(sp[0].is_zero());
        prop_assert_eq!(&sp[1..], &se[..]);

        let w = 5f64.powf(sigma) / 3.0;
        let weighted = |n: &SobolevNorm| n.partials.last().unwrap() - n.base;
        let (a, b) = (sobolev_norm(&e, sigma).unwrap(), sobolev_norm(&p, sigma).unwrap());
        let (a, b) = (weighted(&a), weighted(&b));
        prop_assert!((b - w * a).abs() <= 1e-12 * (1.0 + b.abs()), "{} vs {}", b, w * a);
    }
}
