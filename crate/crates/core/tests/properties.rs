use proptest::prelude::*;

use momentbound::measure::{ExtremeMeasure, Interval};
use momentbound::param::{canonical_to_moments, moments_to_canonical, simplex_map, CanonicalSeq};

fn unit_weights(raw: &[f64]) -> Vec<f64> {
    let t: f64 = raw.iter().sum();
    raw.iter().map(|w| w / t).collect()
}

proptest! {
    #[test]
    fn canonical_round_trip(p in prop::collection::vec(0.05..0.95f64, 1..=5), lo in -2.0..2.0f64, w in 0.5..4.0f64) {
        let iv = Interval::new(lo, lo + w).unwrap();
        let m = canonical_to_moments(&CanonicalSeq::new(p.clone(), iv).unwrap());
        let back = moments_to_canonical(&m, iv).unwrap();
        prop_assert_eq!(back.p.len(), p.len());
        for (a, b) in back.p.iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn simplex_map_gives_probability_vectors(u in prop::collection::vec(0.0..=1.0f64, 0..8)) {
        let w = simplex_map(&u);
        prop_assert_eq!(w.len(), u.len() + 1);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixing_is_linear_in_moments(
        a in prop::collection::vec((0.1..1.0f64, -1.0..1.0f64), 1..4),
        b in prop::collection::vec((0.1..1.0f64, -1.0..1.0f64), 1..4),
        lambda in 0.0..=1.0f64,
        order in 1u32..5,
    ) {
        let dirac = |v: &[(f64, f64)]| {
            let w = unit_weights(&v.iter().map(|x| x.0).collect::<Vec<_>>());
            ExtremeMeasure::dirac(w.into_iter().zip(v.iter().map(|x| x.1))).unwrap()
        };
        let (ma, mb) = (dirac(&a), dirac(&b));
        let mixed = ma.mix(lambda, &mb).unwrap();
        let expect = lambda * ma.raw_moment(order) + (1.0 - lambda) * mb.raw_moment(order);
        prop_assert!((mixed.raw_moment(order) - expect).abs() < 1e-12);
    }

    #[test]
    fn cdf_is_monotone(
        atoms in prop::collection::vec((0.1..1.0f64, -3.0..3.0f64), 1..6),
        ts in prop::collection::vec(-4.0..4.0f64, 2..30),
    ) {
        let w = unit_weights(&atoms.iter().map(|x| x.0).collect::<Vec<_>>());
        let m = ExtremeMeasure::dirac(w.into_iter().zip(atoms.iter().map(|x| x.1))).unwrap();
        let mut ts = ts;
        ts.sort_by(f64::total_cmp);
        let f: Vec<f64> = ts.iter().map(|&t| m.cdf(t)).collect();
        prop_assert!(f.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn unimodal_cdf_is_convex_then_concave(
        comps in prop::collection::vec((0.1..1.0f64, -3.0..3.0f64), 1..5),
        mode in -1.0..1.0f64,
    ) {
        let w = unit_weights(&comps.iter().map(|x| x.0).collect::<Vec<_>>());
        let m = ExtremeMeasure::uniform(mode, w.into_iter().zip(comps.iter().map(|x| x.1))).unwrap();
        let (lo, hi) = m.hull();
        let check = |a: f64, b: f64, convex: bool| -> bool {
            let n = 40;
            let xs: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
            xs.windows(3).all(|t| {
                let mid = 0.5 * (m.cdf(t[0]) + m.cdf(t[2]));
                let f = m.cdf(t[1]);
                if convex { f <= mid + 1e-12 } else { f >= mid - 1e-12 }
            })
        };
        prop_assert!(check(lo.min(mode), mode, true));
        prop_assert!(check(mode, hi.max(mode), false));
    }
}
