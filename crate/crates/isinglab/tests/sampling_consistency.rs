//! Monte Carlo estimates checked against exact enumeration on regions small
//! enough to enumerate, for both independent-density and thermal sampling.

use isinglab::clusters::Color;
use isinglab::estimators::{estimate_prob, estimate_probs, SamplingPlan};
use isinglab::events::{BoundaryArmKind, EventSpec, Orientation};
use isinglab::gibbs::{sample_rng, Boundary, IsingChain, Model, Region, Spin};
use isinglab::lattice::{Annulus, Rect, Site, SiteSet, Torus, ORIGIN};
use isinglab::oracle::enumerate_measure;

fn s1() -> Rect {
    Rect::new(-1, 1, -1, 1).unwrap()
}

/// The detector battery on the 3x3 box: crossing, one-arm, boundary
/// two-arm, four-arm, and pivotality.
fn box_battery() -> Vec<EventSpec> {
    let crossing = EventSpec::Crossing {
        rect: s1(),
        orientation: Orientation::Horizontal,
        color: Color::Plus,
    };
    vec![
        crossing.clone(),
        EventSpec::OneArm { radius: 1, color: Color::Plus },
        EventSpec::HalfPlaneBoundary { radius: 1, kind: BoundaryArmKind::TwoArm },
        EventSpec::FourArm { site: ORIGIN, radius: 1 },
        EventSpec::Pivotal { site: ORIGIN, inner: Box::new(crossing) },
    ]
}

#[test]
fn independent_density_estimates_match_enumeration_on_the_box() {
    let region = Region::Window(s1());
    let events = box_battery();
    for (p, seed) in [(0.5, 101), (0.35, 102)] {
        let model = Model::Bernoulli { p };
        let exact = enumerate_measure(region.clone(), model, Boundary::Free)
            .unwrap()
            .probabilities(&events)
            .unwrap();
        let plan = SamplingPlan::new(20_000, seed);
        let estimates =
            estimate_probs(&events, model, &region, &Boundary::Free, &plan).unwrap();
        for ((event, est), want) in events.iter().zip(&estimates).zip(&exact) {
            assert!(
                (est.mean - want).abs() <= 4.0 * est.stderr,
                "p={p}: {event:?} estimated {} +- {} against exact {want}",
                est.mean,
                est.stderr
            );
            assert!(est.stderr > 0.0 && est.stderr <= 0.005);
        }
    }
}

#[test]
fn circuit_probability_matches_enumeration_on_the_annulus() {
    let ann = Annulus::new(1, 2).unwrap();
    let region = Region::Masked(SiteSet::from_sites(ann.sites()).unwrap());
    let model = Model::Bernoulli { p: 0.5 };
    let spec = EventSpec::Circuit { annulus: ann, color: Color::Plus };
    let exact = enumerate_measure(region.clone(), model, Boundary::Free)
        .unwrap()
        .probability(&spec)
        .unwrap();
    let est = estimate_prob(
        &spec,
        model,
        &region,
        &Boundary::Free,
        &SamplingPlan::new(20_000, 103),
    )
    .unwrap();
    assert!(
        (est.mean - exact).abs() <= 4.0 * est.stderr,
        "circuit estimated {} +- {} against exact {exact}",
        est.mean,
        est.stderr
    );
}

#[test]
fn thermal_estimates_match_enumeration_on_the_torus() {
    let region = Region::Torus(Torus::new(3).unwrap());
    let rect = Rect::new(0, 2, 0, 2).unwrap();
    let events = vec![
        EventSpec::SpinIs { site: Site::new(0, 0), value: Spin::Plus },
        EventSpec::SpinIs { site: Site::new(2, 1), value: Spin::Minus },
        EventSpec::Crossing {
            rect,
            orientation: Orientation::Horizontal,
            color: Color::Plus,
        },
    ];
    let model = Model::Ising { temperature: 3.0, field: 0.1 };
    let exact = enumerate_measure(region.clone(), model, Boundary::Free)
        .unwrap()
        .probabilities(&events)
        .unwrap();
    let plan = SamplingPlan::new(1_000, 104).with_burn_in(80);
    let estimates = estimate_probs(&events, model, &region, &Boundary::Free, &plan).unwrap();
    for ((event, est), want) in events.iter().zip(&estimates).zip(&exact) {
        assert!(
            (est.mean - want).abs() <= 4.0 * est.stderr.max(1e-3),
            "{event:?} estimated {} +- {} against exact {want}",
            est.mean,
            est.stderr
        );
    }
}

#[test]
fn thermal_estimates_match_enumeration_on_the_free_box() {
    let region = Region::Window(s1());
    let events = box_battery();
    let model = Model::Ising { temperature: 2.5, field: 0.3 };
    let exact = enumerate_measure(region.clone(), model, Boundary::Free)
        .unwrap()
        .probabilities(&events)
        .unwrap();
    let plan = SamplingPlan::new(1_000, 105).with_burn_in(80);
    let estimates = estimate_probs(&events, model, &region, &Boundary::Free, &plan).unwrap();
    for ((event, est), want) in events.iter().zip(&estimates).zip(&exact) {
        assert!(
            (est.mean - want).abs() <= 4.0 * est.stderr.max(1e-3),
            "{event:?} estimated {} +- {} against exact {want}",
            est.mean,
            est.stderr
        );
    }
}

#[test]
fn a_long_chain_reaches_the_exact_stationary_law() {
    // One chain, recorded every few sweeps after burn-in: its time average
    // must land on the enumerated stationary probability. This is the
    // chain-reuse (thinning) consumption pattern.
    let region = Region::Torus(Torus::new(3).unwrap());
    let site = Site::new(1, 1);
    let spec = EventSpec::SpinIs { site, value: Spin::Plus };
    let model = Model::Ising { temperature: 3.0, field: 0.1 };
    let exact = enumerate_measure(region.clone(), model, Boundary::Free)
        .unwrap()
        .probability(&spec)
        .unwrap();

    let mut chain =
        IsingChain::new(region.clone(), Boundary::Free, 3.0, 0.1, sample_rng(77, 0))
            .unwrap()
            .with_wolff();
    chain.run_sweeps(IsingChain::default_burn_in(&region));
    let thinning = 5u64;
    let records = 4_000u64;
    let mut hits = 0u64;
    for _ in 0..records {
        chain.run_sweeps(thinning);
        if chain.config().spin(site) == Some(Spin::Plus) {
            hits += 1;
        }
    }
    let mean = hits as f64 / records as f64;
    let stderr = (mean * (1.0 - mean) / (records as f64 - 1.0)).sqrt();
    assert!(
        (mean - exact).abs() <= 5.0 * stderr,
        "time average {mean} +- {stderr} against exact {exact}"
    );
}
