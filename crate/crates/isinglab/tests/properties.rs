//! Randomized structural invariants across the detector and estimator
//! layers, on regions too large for exhaustive checking.

use proptest::prelude::*;

use isinglab::clusters::{Color, Traversal};
use isinglab::estimators::{estimate_prob, fit_exponent, scaling_report, Estimate, SamplingPlan, ValueWithError};
use isinglab::events::{crossing, evaluate, EventSpec, Orientation};
use isinglab::gibbs::{sample_rng, Boundary, Model, Region, Spin, SpinConfig};
use isinglab::lattice::{Annulus, Rect, Site};

fn random_config(region: Region, p: f64, seed: u64) -> SpinConfig {
    let mut cfg = SpinConfig::new(region, Boundary::Free);
    cfg.fill_bernoulli(p, &mut sample_rng(seed, 0));
    cfg
}

proptest! {
    /// Horizontal plus crossing and vertical minus-star crossing partition
    /// every configuration of every box.
    #[test]
    fn crossing_duality_on_random_boxes(
        width in 1i32..=6,
        height in 1i32..=5,
        p in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let rect = Rect::new(0, width - 1, 0, height - 1).unwrap();
        let cfg = random_config(Region::Window(rect), p, seed);
        let mut field: &SpinConfig = &cfg;
        let mut tr = Traversal::new(rect);
        let horizontal = crossing(&mut tr, &mut field, rect, Orientation::Horizontal, Color::Plus);
        let vertical = crossing(&mut tr, &mut field, rect, Orientation::Vertical, Color::MinusStar);
        prop_assert!(horizontal != vertical);
    }

    /// A plus circuit around the hole exists exactly when no minus-star
    /// path joins the inner ring to the outer boundary.
    #[test]
    fn circuit_duality_on_random_annuli(
        inner in 1i32..=2,
        gap in 1i32..=2,
        p in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let ann = Annulus::new(inner, inner + gap).unwrap();
        let region = Region::Window(ann.rect());
        let cfg = random_config(region, p, seed);
        let mut field: &SpinConfig = &cfg;
        let circuit = isinglab::events::has_circuit(&mut field, ann, Color::Plus);
        let ring = ann.inner_ring();
        let mut tr = Traversal::new(ann.rect());
        let outward = tr.reach(
            &mut field,
            Color::MinusStar,
            &ring,
            |s| ann.contains(s),
            |s| s.norm_linf() == ann.outer(),
        );
        prop_assert!(circuit != outward);
    }

    /// Turning one minus site plus can only help a plus crossing.
    #[test]
    fn plus_crossing_is_increasing(
        width in 2i32..=6,
        height in 2i32..=5,
        p in 0.1f64..=0.9,
        seed in any::<u64>(),
        pick in any::<usize>(),
    ) {
        let rect = Rect::new(0, width - 1, 0, height - 1).unwrap();
        let region = Region::Window(rect);
        let sites = region.sites();
        let mut cfg = random_config(region, p, seed);
        let spec = EventSpec::Crossing {
            rect,
            orientation: Orientation::Horizontal,
            color: Color::Plus,
        };
        let before = {
            let mut field: &SpinConfig = &cfg;
            evaluate(&mut field, &spec)
        };
        let site = sites[pick % sites.len()];
        cfg.set_spin(site, Spin::Plus).unwrap();
        let after = {
            let mut field: &SpinConfig = &cfg;
            evaluate(&mut field, &spec)
        };
        prop_assert!(!before || after, "crossing vanished when {site:?} turned plus");
    }

    /// Pivotality is unchanged by flipping the pivot site itself.
    #[test]
    fn pivotality_ignores_the_pivot_spin_on_random_boxes(
        p in 0.2f64..=0.8,
        seed in any::<u64>(),
        pick in any::<usize>(),
    ) {
        let rect = Rect::new(-2, 2, -2, 2).unwrap();
        let region = Region::Window(rect);
        let sites = region.sites();
        let site = sites[pick % sites.len()];
        let spec = EventSpec::Pivotal {
            site,
            inner: Box::new(EventSpec::Crossing {
                rect,
                orientation: Orientation::Vertical,
                color: Color::Plus,
            }),
        };
        let cfg = random_config(region, p, seed);
        let plain = {
            let mut field: &SpinConfig = &cfg;
            evaluate(&mut field, &spec)
        };
        let mut flipped = cfg.clone();
        let turned = flipped.spin(site).unwrap().flipped();
        flipped.set_spin(site, turned).unwrap();
        let mut field: &SpinConfig = &flipped;
        prop_assert_eq!(plain, evaluate(&mut field, &spec));
    }

    /// Noise-free power laws are recovered exactly.
    #[test]
    fn exact_power_laws_fit_exactly(
        slope in -3.0f64..=3.0,
        coeff in 0.1f64..=10.0,
    ) {
        let model = Model::Bernoulli { p: 0.5 };
        let points: Vec<(f64, Estimate)> = [4.0f64, 8.0, 16.0, 32.0]
            .iter()
            .map(|&n| {
                let est = estimate_stub(coeff * n.powf(slope), model);
                (n, est)
            })
            .collect();
        let fit = fit_exponent(&points).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-6, "{} vs {slope}", fit.slope);
        prop_assert!((fit.intercept - coeff.ln()).abs() < 1e-6);
    }

    /// The derived exponents satisfy the classical identities among
    /// themselves for any admissible inputs.
    #[test]
    fn derived_exponents_are_mutually_consistent(
        r in 1.05f64..=20.0,
        v in 0.1f64..=5.0,
    ) {
        let report = scaling_report(
            ValueWithError { value: r, stderr: 0.0 },
            ValueWithError { value: v, stderr: 0.0 },
            &[],
        );
        let beta = report.beta.value;
        let gamma = report.gamma.value;
        let gap = report.gap.value;
        let eta = report.eta.value;
        let delta = report.delta.value;
        prop_assert!((beta + gamma - gap).abs() < 1e-10 * gap.abs().max(1.0));
        prop_assert!((gamma - v * (2.0 - eta)).abs() < 1e-10 * gamma.abs().max(1.0));
        prop_assert!((beta * delta - gap).abs() < 1e-9 * gap.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The same plan gives the same estimate at any worker count.
    #[test]
    fn estimates_do_not_depend_on_worker_count(
        p in 0.0f64..=1.0,
        n_samples in 1u64..=300,
        seed in any::<u64>(),
    ) {
        let rect = Rect::new(-1, 1, -1, 1).unwrap();
        let spec = EventSpec::OneArm { radius: 1, color: Color::Plus };
        let run = |workers: u32| {
            estimate_prob(
                &spec,
                Model::Bernoulli { p },
                &Region::Window(rect),
                &Boundary::Free,
                &SamplingPlan::new(n_samples, seed).with_workers(workers),
            )
            .unwrap()
        };
        let solo = run(1);
        let pooled = run(3);
        prop_assert_eq!(solo.mean.to_bits(), pooled.mean.to_bits());
        prop_assert_eq!(solo.stderr.to_bits(), pooled.stderr.to_bits());
        prop_assert!(solo.mean >= 0.0 && solo.mean <= 1.0);
    }
}

fn estimate_stub(mean: f64, model: Model) -> Estimate {
    Estimate { mean, stderr: 0.0, n_samples: 1, seed: 0, model }
}
