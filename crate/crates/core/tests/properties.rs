use std::collections::BTreeSet;

use leafcert::bsp::{build_tree, leaf_member_indices, BuildConfig, MaskedLeafStream, NodeKind, SplitStrategy};
use leafcert::engines::{alpha_certify, alpha_threshold, krawczyk_certify};
use leafcert::interval::{div_enclose, mul_enclose, sqrt_enclose, RealInterval};
use leafcert::poly::{parse_system, Polynomial, PolynomialSystem};
use leafcert::stream::{InMemoryStream, SolutionStream};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn finite() -> impl Strategy<Value = f64> {
    (-1.0f64..1.0, -60i32..60).prop_map(|(m, e)| m * 2f64.powi(e))
}

fn interval() -> impl Strategy<Value = (RealInterval, f64)> {
    (finite(), finite(), 0.0f64..=1.0).prop_map(|(a, b, t)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = (lo + (hi - lo) * t).clamp(lo, hi);
        (RealInterval::new(lo, hi).unwrap(), x)
    })
}

fn holds(r: &RealInterval, v: &BigRational) -> bool {
    exact(r.lo()) <= *v && *v <= exact(r.hi())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn interval_ops_enclose_exact_results((a, x) in interval(), (b, y) in interval()) {
        let (ex, ey) = (exact(x), exact(y));
        prop_assert!(holds(&(a + b), &(&ex + &ey)));
        prop_assert!(holds(&(a - b), &(&ex - &ey)));
        prop_assert!(holds(&(a * b), &(&ex * &ey)));
        if let Ok(q) = a.checked_div(&b) {
            prop_assert!(holds(&q, &(&ex / &ey)));
        }
    }

    #[test]
    fn primitive_enclosures(x in finite(), y in finite()) {
        let (lo, hi) = mul_enclose(x, y);
        let p = exact(x) * exact(y);
        prop_assert!(exact(lo) <= p && p <= exact(hi));
        if y != 0.0 {
            let (lo, hi) = div_enclose(x, y);
            let q = exact(x) / exact(y);
            prop_assert!(exact(lo) <= q && q <= exact(hi));
        }
        let (lo, hi) = sqrt_enclose(x.abs());
        let ax = exact(x.abs());
        prop_assert!(lo >= 0.0 && exact(lo) * exact(lo) <= ax && ax <= exact(hi) * exact(hi));
    }
}

fn rational() -> impl Strategy<Value = BigRational> {
    (-50i64..50, 1i64..12).prop_map(|(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
}

fn polynomial(n: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0u32..4, n), rational()), 0..6).prop_map(move |terms| {
        let mut p = Polynomial::zero(n);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    })
}

fn system() -> impl Strategy<Value = PolynomialSystem> {
    (1usize..4).prop_flat_map(|n| {
        prop::collection::vec(polynomial(n), n).prop_map(move |ps| PolynomialSystem::new(n, ps).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn print_parse_round_trip(f in system()) {
        let text = f.to_string();
        let g = parse_system(&text).unwrap();
        prop_assert_eq!(&g, &f, "{}", text);
        prop_assert_eq!(g.to_string(), text);
    }
}

fn points() -> impl Strategy<Value = Vec<Vec<Complex64>>> {
    prop::collection::vec((-20i32..20, -5i32..5), 0..300).prop_map(|v| {
        v.into_iter()
            .map(|(r, i)| vec![Complex64::new(r as f64 * 0.25, i as f64)])
            .collect()
    })
}

fn strategy() -> impl Strategy<Value = SplitStrategy> {
    prop_oneof![
        Just(SplitStrategy::Mean),
        Just(SplitStrategy::Median),
        (0u64..100).prop_map(|seed| SplitStrategy::Random { seed }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn leaves_partition_the_candidates(pts in points(), k in 1u64..40, strat in strategy(), bitmask: bool) {
        let d = pts.len() as u64;
        let mut s = InMemoryStream::new(1, pts.clone()).unwrap();
        let cfg = BuildConfig { k, strategy: strat, bitmask, ..BuildConfig::default() };
        let tree = build_tree(&mut s, &cfg).unwrap();
        let members = tree.members(&mut s).unwrap();
        let mut seen = BTreeSet::new();
        for leaf in tree.leaf_ids() {
            let m = &members[leaf.0];
            prop_assert_eq!(m.len() as u64, tree.leaf_count(leaf));
            let slab = tree.slab(leaf);
            for &i in m {
                let x = pts[i as usize][0].re;
                prop_assert!(slab.lo <= x && x < slab.hi);
                prop_assert!(seen.insert(i));
            }
        }
        prop_assert_eq!(seen.len() as u64, d);
        // slabs tile the line in leaf order
        let ids: Vec<_> = tree.leaf_ids().collect();
        for w in ids.windows(2) {
            prop_assert_eq!(tree.slab(w[0]).hi, tree.slab(w[1]).lo);
        }
    }

    #[test]
    fn bits_and_thresholds_route_alike(pts in points(), k in 1u64..40, strat in strategy()) {
        let mut s = InMemoryStream::new(1, pts.clone()).unwrap();
        let tree = build_tree(&mut s, &BuildConfig { k, strategy: strat, ..BuildConfig::default() }).unwrap();
        for leaf in tree.leaf_ids() {
            let by_bits = leaf_member_indices(&tree, leaf).unwrap();
            for &i in &by_bits {
                prop_assert_eq!(tree.locate_leaf(&pts[i as usize]), leaf);
            }
            let mut m = MaskedLeafStream::new(&mut s, &tree, leaf).unwrap();
            let mut j = 0;
            while let Some(p) = m.next_point().unwrap() {
                prop_assert_eq!(p, &pts[by_bits[j] as usize][..]);
                j += 1;
            }
            prop_assert_eq!(j, by_bits.len());
        }
    }

    #[test]
    fn median_splits_are_balanced(n in 2usize..400, k in 1u64..20, seed in 0u64..1000) {
        // distinct, well separated real parts in a shuffled order
        let mut xs: Vec<u64> = (0..n as u64).collect();
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        for i in (1..xs.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            xs.swap(i, (state >> 33) as usize % (i + 1));
        }
        let pts = xs.iter().map(|&x| vec![Complex64::new(x as f64, 0.0)]).collect();
        let mut s = InMemoryStream::new(1, pts).unwrap();
        let tree = build_tree(&mut s, &BuildConfig { k, strategy: SplitStrategy::Median, ..BuildConfig::default() }).unwrap();
        let nodes = tree.nodes();
        for node in nodes {
            if let NodeKind::Internal { left, right, .. } = node.kind {
                let (l, r) = (nodes[left].count, nodes[right].count);
                prop_assert!(l.abs_diff(r) <= 1, "{} vs {}", l, r);
            }
        }
        let st = tree.stats();
        prop_assert!(st.max_leaf_count <= k);
        prop_assert!(st.height as f64 <= ((n as f64) / k as f64).log2().ceil().max(0.0) + 1.0);
    }
}

/// `Π (x − r_i)` over distinct rationals.
fn univariate(roots: &[BigRational]) -> PolynomialSystem {
    let mut p = Polynomial::constant(1, BigRational::from_integer(1.into()));
    for r in roots {
        p = p.mul(&Polynomial::var(1, 0).sub(&Polynomial::constant(1, r.clone())));
    }
    PolynomialSystem::new(1, vec![p]).unwrap()
}

fn region_holds(region: &leafcert::interval::IntervalBox, r: &BigRational) -> bool {
    let c = &region.coords[0];
    holds(&c.re, r) && exact(c.im.lo()) <= BigRational::from_integer(0.into()) && exact(c.im.hi()) >= BigRational::from_integer(0.into())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn certified_regions_hold_exactly_one_root(
        raw in prop::collection::btree_set(-40i64..40, 1..6),
        pick in 0usize..6,
        offset in -1e-3f64..1e-3,
        im in -1e-3f64..1e-3,
    ) {
        let roots: Vec<BigRational> = raw.iter().map(|&v| BigRational::new(BigInt::from(v), BigInt::from(4))).collect();
        let f = univariate(&roots);
        let target = &roots[pick % roots.len()];
        let s = [Complex64::new(leafcert::poly::rational_to_f64(target) + offset, im)];
        for cert in [alpha_certify(&f, &s).unwrap(), krawczyk_certify(&f, &s).unwrap()] {
            if !cert.success {
                continue;
            }
            if let Some(a) = cert.alpha_value {
                prop_assert!(a.hi() < alpha_threshold());
            }
            let inside: Vec<_> = roots.iter().filter(|r| region_holds(&cert.region, r)).collect();
            prop_assert_eq!(inside.len(), 1, "{:?}", cert.engine);
        }
    }
}

#[test]
fn stream_counters_reset_between_leaves() {
    let pts: Vec<Vec<Complex64>> = (0..50).map(|i| vec![Complex64::new(i as f64, 0.0)]).collect();
    let mut s = InMemoryStream::new(1, pts).unwrap();
    let tree = build_tree(&mut s, &BuildConfig { k: 5, ..BuildConfig::default() }).unwrap();
    let before = s.counters().next_calls;
    let mut total = 0;
    for leaf in tree.leaf_ids() {
        let mut m = MaskedLeafStream::new(&mut s, &tree, leaf).unwrap();
        while m.next_point().unwrap().is_some() {
            total += 1;
        }
    }
    assert_eq!(total, 50);
    assert_eq!(s.counters().next_calls - before, 50);
}
