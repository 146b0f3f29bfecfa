use gasket::address::{bottom_vertex_index, neighbors};
use gasket::harmonic::{extend_to, GraphFunction, HarmonicFunction};
use gasket::scalar::{Rational, Scalar};
use gasket::traceops::*;
use num_traits::Zero;
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Rational> {
    (-30i64..=30, 1i64..=12).prop_map(|(n, d)| Rational::ratio(n, d))
}

fn triple() -> impl Strategy<Value = [Rational; 3]> {
    [rational(), rational(), rational()]
}

fn line(m: usize) -> impl Strategy<Value = LineFunction<Rational>> {
    proptest::collection::vec(rational(), (1usize << m) + 1).prop_map(move |v| LineFunction::new(m, v).unwrap())
}

/// Sample minus the prediction of a function harmonic on the parent cell,
/// whose top corner is fixed by the parent's bottom midpoint.
fn dtilde_oracle(f: &LineFunction<Rational>, n: usize, k: usize) -> Rational {
    let g = |j: usize| f.sample(n, j).unwrap();
    let x = f.sample(n + 1, 2 * k - 1).unwrap();
    let (near, mid, far) = if k % 2 == 1 { (g(k - 1), g(k), g(k + 1)) } else { (g(k), g(k - 1), g(k - 2)) };
    x - (Rational::int(8) * near + Rational::int(20) * mid - Rational::int(3) * far) / Rational::int(25)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dtilde_matches_oracle(f in line(5), seed in any::<u64>()) {
        let n = 1 + (seed as usize) % 4;
        let k = 1 + (seed as usize >> 8) % (1usize << n);
        prop_assert_eq!(diff_dtilde(&f, n, k).unwrap(), dtilde_oracle(&f, n, k));
    }

    #[test]
    fn dtilde_annihilates_harmonic(b in triple(), seed in any::<u64>()) {
        let m = 9;
        let f = HarmonicFunction { boundary: b }.trace(m).unwrap();
        for s in 0..8u64 {
            let h = seed.wrapping_add(s.wrapping_mul(0x9e37_79b9));
            let n = 1 + (h as usize) % (m - 1);
            let k = 1 + (h as usize >> 16) % (1usize << n);
            prop_assert!(diff_dtilde(&f, n, k).unwrap().is_zero());
        }
    }

    #[test]
    fn odd_d_entries_are_coarser_dtilde(f in line(6), seed in any::<u64>()) {
        let n = 2 + (seed as usize) % 4;
        let k = 2 * ((seed as usize >> 8) % (1usize << (n - 1))) + 1;
        prop_assert_eq!(diff_d(&f, n, k).unwrap(), dtilde_oracle(&f, n - 1, k.div_ceil(2)));
    }

    #[test]
    fn differences_are_linear(f in line(5), g in line(5), a in rational(), seed in any::<u64>()) {
        let h = LineFunction::new(5, f.samples().iter().zip(g.samples()).map(|(x, y)| a.clone() * x.clone() + y.clone()).collect()).unwrap();
        let n = 2 + (seed as usize) % 3;
        let k = 1 + (seed as usize >> 8) % ((1usize << n) - 1);
        let lin = |op: &dyn Fn(&LineFunction<Rational>) -> Rational| {
            op(&h) == a.clone() * op(&f) + op(&g)
        };
        prop_assert!(lin(&|u| diff_dtilde(u, n, k).unwrap()));
        prop_assert!(lin(&|u| diff_d(u, n, k).unwrap()));
        prop_assert!(lin(&|u| diff_a(u, n).unwrap()[k - 1].clone()));
    }

    #[test]
    fn even_d_vanishes_when_matching_holds(b in proptest::collection::vec(rational(), 6)) {
        // Level-1 data harmonic at the junction 1/2, extended harmonically.
        let mut u = GraphFunction::new(1, b).unwrap();
        let j = bottom_vertex_index(1, 1);
        let nb = neighbors(j, 1);
        let avg = nb.iter().fold(Rational::zero(), |a, &y| a + u.at(y).clone()) / Rational::int(nb.len() as i64);
        u.values_mut()[j] = avg;
        let m = 7;
        let f = restrict(&extend_to(&u, m).unwrap()).unwrap();
        for n in 2..m {
            for k in (2..(1usize << n)).step_by(2) {
                prop_assert!(diff_d(&f, n, k).unwrap().is_zero(), "D({}, {}) nonzero", n, k);
            }
        }
    }

    #[test]
    fn norm_partials_are_monotone(f in line(7), sigma in 0.7f64..1.3, alpha in 0.55f64..0.99) {
        for r in [ttilde_norm(&f, sigma).unwrap(), t_norm(&f, sigma).unwrap(), besov_norm(&f, alpha).unwrap(), tinf_norm(&f).unwrap()] {
            prop_assert!(r.terms.iter().all(|t| *t >= 0.0));
            prop_assert!(r.partials.windows(2).all(|w| w[1] >= w[0]));
        }
        let short = besov_norm(&f.downsample(4).unwrap(), alpha).unwrap();
        let long = besov_norm(&f, alpha).unwrap();
        prop_assert_eq!(&short.terms[..], &long.terms[..short.terms.len()]);
    }
}
