mod common;

use common::*;
use proptest::prelude::*;
use softcap::capacity::{Flow, Network};
use softcap::chain::CoverPair;
use softcap::killed::{self, Rate};
use softcap::sim::{simulate_stream, Clocks, Start};

fn chain_and_cover() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 2usize..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn detailed_balance_everywhere((seed, n) in chain_and_cover()) {
        let mut g = rng(seed);
        let c = random_chain(n, &mut g);
        let cv = random_cover(&c, &mut g);
        for a in [cv.r(), cv.s()] {
            let t = c.trace_chain(a).unwrap();
            for (x, y, w) in t.edges() {
                let lhs = t.mu()[x] * w;
                let rhs = t.mu()[y] * t.rate(y, x);
                prop_assert!(rel(lhs, rhs) < 1e-9);
            }
            if c.is_irreducible_on(a) {
                let r = c.restricted(a).unwrap();
                for (x, y, w) in r.edges() {
                    prop_assert!(rel(r.mu()[x] * w, r.mu()[y] * r.rate(y, x)) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn poincare_inequality((seed, n) in chain_and_cover(), f in prop::collection::vec(-5.0f64..5.0, 10)) {
        let c = random_chain(n, &mut rng(seed));
        let gamma = c.spectral_gap().unwrap();
        let f = &f[..n];
        let d = c.dirichlet_form(f).unwrap();
        let v = c.variance(f).unwrap();
        prop_assert!(d >= gamma * v * (1.0 - 1e-9) - 1e-14);
    }

    #[test]
    fn capacity_sandwich((seed, n) in chain_and_cover(), k in 0.01f64..10.0, l in 0.01f64..10.0,
                         f in prop::collection::vec(-0.5f64..1.5, 10)) {
        let mut g = rng(seed);
        let c = random_chain(n, &mut g);
        let cv = random_cover(&c, &mut g);
        let net = Network::new(&c, &cv, Rate::Finite(k), Rate::Finite(l));
        let cert = net.capacity().unwrap();
        prop_assert!(cert.potential.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(cert.duality_gap <= 1e-9 * cert.value.max(1e-300));
        prop_assert!(net.dirichlet_upper(&f[..n]).unwrap() >= cert.value * (1.0 - 1e-12));
        let mixed = cert.current.combine(0.5, &cert.current, 0.5);
        prop_assert!(net.thomson_lower(&mixed).unwrap() <= cert.value * (1.0 + 1e-9));
        // exchanging the roles of the two sets and intensities leaves C unchanged
        let swapped = CoverPair::new(&c, cv.s().clone(), cv.r().clone()).unwrap();
        let back = Network::new(&c, &swapped, Rate::Finite(l), Rate::Finite(k)).capacity().unwrap();
        prop_assert!(rel(back.value, cert.value) < 1e-9);
    }

    #[test]
    fn capacity_monotone_in_intensities((seed, n) in chain_and_cover(), k in 0.01f64..10.0, l in 0.01f64..10.0, t in 1.0f64..10.0) {
        let mut g = rng(seed);
        let c = random_chain(n, &mut g);
        let cv = random_cover(&c, &mut g);
        let cap = |k: f64, l: f64| Network::new(&c, &cv, Rate::Finite(k), Rate::Finite(l)).capacity().unwrap().value;
        let base = cap(k, l);
        prop_assert!(cap(k * t, l) >= base * (1.0 - 1e-10));
        prop_assert!(cap(k, l * t) >= base * (1.0 - 1e-10));
        prop_assert!(cap(k, l) <= Network::new(&c, &cv, Rate::Infinite, Rate::Finite(l)).capacity().unwrap().value * (1.0 + 1e-10));
    }

    #[test]
    fn soft_rate_monotone_and_below_hard((seed, n) in chain_and_cover(), l in 0.01f64..100.0) {
        let mut g = rng(seed);
        let c = random_chain(n, &mut g);
        let cv = random_cover(&c, &mut g);
        let phi = |l: f64| killed::soft_qsm(&c, cv.r(), cv.s(), Rate::Finite(l)).unwrap();
        let (a, b) = (phi(l), phi(2.0 * l));
        prop_assert!(b.rate >= a.rate * (1.0 - 1e-9));
        prop_assert!(a.measure.iter().all(|m| *m >= 0.0));
        prop_assert!((a.measure.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // exit rate equals the mean killing intensity under μ*
        let gen = killed::traced_killed_generator(&c, cv.r(), cv.s(), l).unwrap();
        prop_assert!(rel(a.rate, a.mean_kill(&gen)) < 1e-8);
        if !cv.r_minus_s().is_empty() && c.is_irreducible_on(cv.r_minus_s()) {
            let hard = killed::exit_rate_hard(&c, cv.r(), cv.s()).unwrap().rate;
            prop_assert!(b.rate <= hard * (1.0 + 1e-9));
        }
    }

    #[test]
    fn local_time_identity((seed, n) in chain_and_cover(), k in 0.0f64..2.0, l in 0.0f64..2.0, s in any::<u64>()) {
        let mut g = rng(seed);
        let c = random_chain(n, &mut g);
        let cv = random_cover(&c, &mut g);
        let rec = simulate_stream(&c, &cv, Clocks::new(k, l).unwrap(), &Start::State(0), 50.0, s, 3).unwrap();
        prop_assert!(rec.segments.iter().all(|s| s.1 > 0.0));
        prop_assert!(rec.local_time_defect(&cv).abs() < 1e-9);
        prop_assert!((rec.local_time_r + rec.local_time_s - rec.total_time - rec.local_time_both).abs() < 1e-9);
        let last = rec.segments.last().unwrap().0;
        match rec.termination {
            softcap::sim::Termination::KappaOnR => prop_assert!(cv.r().contains(last) && k > 0.0),
            softcap::sim::Termination::LambdaOnS => prop_assert!(cv.s().contains(last) && l > 0.0),
            softcap::sim::Termination::Horizon => prop_assert!((rec.total_time - 50.0).abs() < 1e-12),
        }
        let again = simulate_stream(&c, &cv, Clocks::new(k, l).unwrap(), &Start::State(0), 50.0, s, 3).unwrap();
        prop_assert_eq!(rec, again);
    }

    #[test]
    fn unit_flow_validation_rejects_scaled((seed, n) in chain_and_cover(), a in 1.1f64..3.0) {
        let mut g = rng(seed);
        let c = random_chain(n, &mut g);
        let cv = random_cover(&c, &mut g);
        let net = Network::new(&c, &cv, Rate::Finite(1.0), Rate::Finite(1.0));
        let cert = net.capacity().unwrap();
        let scaled: Flow = cert.current.scaled(a);
        prop_assert!(net.thomson_lower(&scaled).is_err());
    }
}
