//! Acceptance gate: one test per criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see the lines on success).

use bperc::analysis::{self, difficulty_brute_force, Budget, Difficulty, Voracity};
use bperc::direction::Direction;
use bperc::droplet::{DirectionFrame, Droplet, FrameTag};
use bperc::engine::{closure, sample_tau, Configuration, Window};
use bperc::hfun::{envelope_feasible, integrate, HFunction};
use bperc::lambda::{minimize_lambda, work, HAssignment, MinimizeOptions};
use bperc::lattice::LatticeVector;
use bperc::oracle;
use bperc::rng::{probability_threshold, stream_id, CounterRng};
use bperc::rules::{
    make_convex_neighbourhood, make_threshold_family, parse_family, two_neighbour, Region,
    UpdateFamily,
};
use bperc::scaling::{
    direction_data, droplet_sites, estimate_h, h_limit_table, prob_a_mc, verify_growth_event,
};
use bperc::{DropletF64, DropletRat};
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Instant;

fn dir(a: i64, b: i64) -> Direction {
    Direction::new(a, b).unwrap()
}

fn pass(n: u32, detail: &str) {
    println!("ACCEPTANCE {n}: PASS — {detail}");
}

#[test]
fn criterion_01_two_neighbour_analysis() {
    let t0 = Instant::now();
    let f = two_neighbour();
    let budget = Budget::default();
    let report = analysis::analyze(&f, &budget);
    assert_eq!(report.alpha, Some(1), "alpha");
    let mut isolated = report.isolated_stable.clone();
    isolated.sort_by_key(|u| (u.vector().x, u.vector().y));
    let mut axes = vec![dir(1, 0), dir(0, 1), dir(-1, 0), dir(0, -1)];
    axes.sort_by_key(|u| (u.vector().x, u.vector().y));
    assert_eq!(isolated, axes, "stable set is the four axes");
    assert!(report.symmetric && report.isotropic);
    assert!(matches!(report.voracious, Voracity::Yes));
    for &u in &axes {
        assert_eq!(
            analysis::difficulty(&f, u, &budget),
            difficulty_brute_force(&f, u, &budget),
            "closed form vs brute force at {u:?}"
        );
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "runtime {dt:?} ≥ 1 s");
    pass(1, &format!("2-neighbour: α=1, axes stable, voracious ({dt:?})"));
}

#[test]
fn criterion_02_fig1_ellipse() {
    let t0 = Instant::now();
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../fixtures/fig1_ellipse.json"
    ))
    .expect("fixture present");
    let f = parse_family(&text).expect("valid fixture");
    let report = analysis::analyze(&f, &Budget::default());
    assert!(report.isotropic, "isotropic");
    assert_eq!(report.alpha, Some(2), "alpha");
    assert_eq!(report.isolated_stable.len(), 8, "eight stable directions");
    let mut finite: Vec<u32> = report
        .directions
        .iter()
        .filter(|d| d.isolated)
        .map(|d| match d.difficulty {
            Difficulty::Finite(a) => a,
            other => panic!("unresolved difficulty {other:?} at {:?}", d.direction),
        })
        .collect();
    finite.sort_unstable();
    assert_eq!(finite, vec![1, 1, 2, 2, 2, 2, 2, 2], "6+2 difficulty split");
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "runtime {dt:?} ≥ 1 min");
    pass(2, &format!("ellipse: α=2, 8 directions split 6+2 ({dt:?})"));
}

/// The two line conditions behind the helping-set fast path: the
/// neighbourhood meets l_u(1), and if it also meets l_u(2) then the first
/// line holds at least α(u) sites.
fn line_conditions(f: &UpdateFamily, u: Direction, alpha: u32) -> bool {
    let k = f.threshold().expect("threshold family").punctured();
    let on_line = |n: i64| k.iter().filter(|&&s| u.line_value(s) == n).count();
    on_line(1) > 0 && (on_line(2) == 0 || on_line(1) >= alpha as usize)
}

#[test]
fn criterion_03_convex_neighbourhood_sweep() {
    let t0 = Instant::now();
    let mut regions: Vec<Region> = [1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
        .iter()
        .map(|&radius| Region::Disc { radius })
        .collect();
    regions.push(Region::Ellipse {
        a: 2.5,
        b: 1.5,
        angle_deg: 0.0,
    });
    regions.push(Region::Ellipse {
        a: 3.0,
        b: 1.8,
        angle_deg: 30.0,
    });
    regions.push(Region::Ellipse {
        a: 3.2,
        b: 2.0,
        angle_deg: -45.0,
    });
    regions.push(Region::Polygon {
        vertices: vec![
            (num_rational::Ratio::new(2, 1), num_rational::Ratio::new(0, 1)),
            (num_rational::Ratio::new(0, 1), num_rational::Ratio::new(2, 1)),
            (num_rational::Ratio::new(-2, 1), num_rational::Ratio::new(0, 1)),
            (num_rational::Ratio::new(0, 1), num_rational::Ratio::new(-2, 1)),
        ],
    });
    regions.push(Region::Polygon {
        vertices: vec![
            (num_rational::Ratio::new(2, 1), num_rational::Ratio::new(2, 1)),
            (num_rational::Ratio::new(-2, 1), num_rational::Ratio::new(2, 1)),
            (num_rational::Ratio::new(-2, 1), num_rational::Ratio::new(-2, 1)),
            (num_rational::Ratio::new(2, 1), num_rational::Ratio::new(-2, 1)),
        ],
    });

    let budget = Budget::default();
    let mut combos = 0;
    for region in &regions {
        let k = make_convex_neighbourhood(region).expect("convex symmetric region");
        let max_theta = k.sites.len() - 1;
        for theta in 1..=max_theta {
            let f = match make_threshold_family(&k, theta) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let report = analysis::analyze(&f, &budget);
            let isolated: Vec<&analysis::DirectionReport> = report
                .directions
                .iter()
                .filter(|d| d.isolated)
                .collect();
            if !report.isotropic || report.alpha.is_none() || isolated.is_empty() {
                continue;
            }
            combos += 1;
            for d in isolated {
                let alpha = match d.difficulty {
                    Difficulty::Finite(a) => a,
                    other => panic!("{region:?} θ={theta}: unresolved difficulty {other:?}"),
                };
                assert!(
                    matches!(d.voracious, Some(Voracity::Yes)),
                    "{region:?} θ={theta} {:?}: voracity {:?}",
                    d.direction,
                    d.voracious
                );
                assert!(
                    line_conditions(&f, d.direction, alpha),
                    "{region:?} θ={theta} {:?}: line conditions",
                    d.direction
                );
            }
        }
    }
    assert!(combos >= 20, "only {combos} isotropic (K, θ) combinations");
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 600.0, "runtime {dt:?} ≥ 10 min");
    pass(3, &format!("{combos} (K,θ) combos, all voracious ({dt:?})"));
}

#[test]
fn criterion_04_small_case_probability() {
    let t0 = Instant::now();
    let exact = oracle::prob_a_exact(2, 1, 0.5);
    assert!((exact - 0.9375).abs() < 1e-12);
    let f = two_neighbour();
    let reps = 100_000;
    let (ph, _) = prob_a_mc(&f, dir(1, 0), 2, 1, 0.5, reps, 2024).unwrap();
    let se = (exact * (1.0 - exact) / reps as f64).sqrt();
    assert!(
        (ph - exact).abs() <= 3.0 * se,
        "MC {ph} vs exact {exact} (3σ = {})",
        3.0 * se
    );
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 5.0, "runtime {dt:?} ≥ 5 s");
    pass(4, &format!("ℙ(A(2,1)) = 0.9375, MC within 3σ ({dt:?})"));
}

#[test]
fn criterion_05_transfer_matrix_grid() {
    let t0 = Instant::now();
    let f = two_neighbour();
    let u = dir(1, 0);
    let reps = 20_000u64;
    let cases: Vec<(i64, i64, f64)> = [5i64, 10, 20]
        .iter()
        .flat_map(|&m| {
            [20i64, 40, 80]
                .iter()
                .flat_map(move |&n| [0.05, 0.1, 0.2].iter().map(move |&p| (m, n, p)))
                .collect::<Vec<_>>()
        })
        .collect();
    for (i, &(m, n, p)) in cases.iter().enumerate() {
        let exact = oracle::prob_a_exact(m as u32, n as u32, p);
        let (ph, _) = prob_a_mc(&f, u, m, n, p, reps, 31 + i as u64).unwrap();
        let se = (exact.max(ph) * (1.0 - exact.min(ph)).max(0.0) / reps as f64)
            .sqrt()
            .max(1e-9);
        assert!(
            (ph - exact).abs() <= 3.0 * se,
            "(m,n,p)=({m},{n},{p}): MC {ph} vs exact {exact}"
        );
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 120.0, "runtime {dt:?} ≥ 2 min");
    pass(5, &format!("27 grid points within 3σ of the oracle ({dt:?})"));
}

#[test]
fn criterion_06_envelope_feasibility() {
    let f = two_neighbour();
    let grid: Vec<f64> = (0..8).map(|i| 0.4 * 1.38f64.powi(i)).collect();
    let table = estimate_h(&f, dir(1, 0), 0.1, &grid, 32, 10_000, 99).unwrap();
    let slack = table.max_halfwidth() + 0.02;
    let c = envelope_feasible(&table.points(), slack);
    assert!(c.is_some(), "no feasible envelope constant");
    pass(
        6,
        &format!("estimated table admits envelope constant c = {:.3}", c.unwrap()),
    );
}

#[test]
fn criterion_07_quadrature() {
    let t0 = Instant::now();
    let val = integrate(&HFunction::BasicLog, 1e-9);
    let target = PI * PI / 6.0;
    assert!((val - target).abs() < 1e-6, "{val} vs {target}");
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "runtime {dt:?} ≥ 1 s");
    pass(7, &format!("∫ = π²/6 to 1e−6 ({dt:?})"));
}

#[test]
fn criterion_08_lambda_headline() {
    let t0 = Instant::now();
    let frame = DirectionFrame::axes(FrameTag::SAlpha);
    let h = HAssignment::uniform(&frame, HFunction::TwoNeighbour);
    let opts = MinimizeOptions {
        starts: 8,
        steps: 48,
        seed: 7,
        ..MinimizeOptions::default()
    };
    let res = minimize_lambda(&frame, &h, &opts).unwrap();
    let target = PI * PI / 18.0;
    let rel = (res.lambda - target).abs() / target;
    assert!(rel < 0.02, "λ̂ = {} vs {target} (rel {rel:.4})", res.lambda);
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 120.0, "runtime {dt:?} ≥ 2 min");
    pass(
        8,
        &format!("λ̂ = {:.5} vs π²/18 = {target:.5}, rel err {rel:.4} ({dt:?})", res.lambda),
    );
}

#[test]
fn criterion_09_end_to_end_lambda() {
    let t0 = Instant::now();
    let f = two_neighbour();
    let u = dir(1, 0);
    let grid: Vec<f64> = (0..10).map(|i| 0.35 * (4.0f64 / 0.35).powf(i as f64 / 9.0)).collect();
    let mut tables = Vec::new();
    for (i, &p) in [0.08, 0.05, 0.03].iter().enumerate() {
        tables.push(estimate_h(&f, u, p, &grid, 48, 20_000, 501 + i as u64).unwrap());
    }
    let limit = h_limit_table(&tables).unwrap();
    let h = HFunction::from_points(limit.points()).unwrap();
    let frame = DirectionFrame::axes(FrameTag::SAlpha);
    let assignment = HAssignment::uniform(&frame, h);
    let opts = MinimizeOptions {
        starts: 4,
        steps: 40,
        seed: 17,
        ..MinimizeOptions::default()
    };
    let res = minimize_lambda(&frame, &assignment, &opts).unwrap();
    let target = PI * PI / 18.0;
    let rel = (res.lambda - target).abs() / target;
    assert!(rel < 0.20, "λ̂ = {} vs {target} (rel {rel:.4})", res.lambda);
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 1800.0, "runtime {dt:?} ≥ 30 min");
    pass(
        9,
        &format!(
            "pipeline λ̂ = {:.5} vs {target:.5}, rel err {rel:.4} ({dt:?})",
            res.lambda
        ),
    );
}

#[test]
fn criterion_10_dynamics_properties() {
    let t0 = Instant::now();
    let rng = CounterRng::new(424242);
    let families = [two_neighbour(), bperc::rules::modified_two_neighbour()];

    // closure idempotence and monotonicity: 400 instances
    (0..400u64).into_par_iter().for_each(|i| {
        let f = &families[(i % 2) as usize];
        let p = 0.05 + 0.3 * (i as f64 / 400.0);
        let window = Window::boxed(0, 23, 0, 23);
        let c = Configuration::bernoulli(window, p, 424242, stream_id("cl", i));
        let cl = closure(f, &c);
        assert!(c.is_subset_of(&cl), "instance {i}: closure not monotone");
        let cl2 = closure(f, &cl);
        assert_eq!(
            cl.infected_sites(),
            cl2.infected_sites(),
            "instance {i}: closure not idempotent"
        );
        // monotone in the initial set: superset closure contains closure
        let denser = Configuration::bernoulli(window, (p + 0.1).min(1.0), 424242, stream_id("cl", i));
        assert!(c.is_subset_of(&denser), "coupling broken");
        assert!(
            cl.is_subset_of(&closure(f, &denser)),
            "instance {i}: closure not monotone in the initial set"
        );
    });

    // coupled τ monotone in p: 300 instances
    (0..300u64).into_par_iter().for_each(|i| {
        let f = &families[(i % 2) as usize];
        let p_lo = 0.08 + 0.2 * (i as f64 / 300.0);
        let p_hi = p_lo + 0.1;
        let tau_lo = sample_tau(f, p_lo, 32, 7, i);
        let tau_hi = sample_tau(f, p_hi, 32, 7, i);
        match (tau_lo, tau_hi) {
            (Some(a), Some(b)) => assert!(b <= a, "instance {i}: τ({p_hi}) = {b} > τ({p_lo}) = {a}"),
            (None, Some(_)) => {}
            (Some(_), None) => panic!("instance {i}: τ finite at {p_lo} but not at {p_hi}"),
            (None, None) => {}
        }
    });

    // traversable ⇒ filled on growth events: 300 instances
    let f = two_neighbour();
    let frame = DirectionFrame::axes(FrameTag::SAlpha);
    let lookup = |u: Direction| direction_data(&two_neighbour(), u, &Budget::default()).ok();
    let traversable_count: u64 = (0..300u64)
        .into_par_iter()
        .map(|i| {
            let d1 = Droplet::new(frame.clone(), vec![7.0 + (i % 3) as f64; 4]).unwrap();
            let d2 = Droplet::new(frame.clone(), vec![9.0 + (i % 3) as f64; 4]).unwrap();
            let p = 0.25 + 0.25 * (i as f64 / 300.0);
            let thresh = probability_threshold(p);
            let a: BTreeSet<LatticeVector> = droplet_sites(&d2)
                .into_iter()
                .enumerate()
                .filter(|(j, _)| rng.bernoulli(stream_id("ge", i), *j as u64, thresh))
                .map(|(_, s)| s)
                .collect();
            let chk = verify_growth_event(&f, &lookup, &d1, &d2, &a).unwrap();
            if chk.traversable {
                assert_eq!(
                    chk.filled,
                    Some(true),
                    "instance {i}: traversable but not filled; missed {:?}",
                    chk.counterexample
                );
                1
            } else {
                0
            }
        })
        .sum();
    assert!(traversable_count > 0, "no traversable growth events sampled");
    let dt = t0.elapsed();
    pass(
        10,
        &format!(
            "1000 dynamics instances, 0 violations ({traversable_count} traversable events, {dt:?})"
        ),
    );
}

#[test]
fn criterion_11_droplet_laws_exact() {
    let t0 = Instant::now();
    let axes = DirectionFrame::axes(FrameTag::SAlpha);
    let oct = DirectionFrame::new(
        vec![
            dir(1, 0),
            dir(1, 1),
            dir(0, 1),
            dir(-1, 1),
            dir(-1, 0),
            dir(-1, -1),
            dir(0, -1),
            dir(1, -1),
        ],
        FrameTag::SAlpha,
    )
    .unwrap();
    let rng = CounterRng::new(5150);
    let rat = |num: i64, den: i64| BigRational::new(num.into(), den.into());
    let rand_radii = |frame: &DirectionFrame, stream: u64, base: u64| -> Vec<BigRational> {
        (0..frame.dirs().len())
            .map(|j| {
                let num = (rng.uniform(stream, base + j as u64) % 24) as i64;
                let den = 1 + (rng.uniform(stream, base + 100 + j as u64) % 4) as i64;
                rat(num, den)
            })
            .collect()
    };
    let instances = 2000u64;
    let violations: u64 = (0..instances)
        .into_par_iter()
        .map(|i| {
            let frame = if i % 2 == 0 { &axes } else { &oct };
            let d: DropletRat = Droplet::new(frame.clone(), rand_radii(frame, i, 0)).unwrap();
            let e: DropletRat = Droplet::new(frame.clone(), rand_radii(frame, i, 1000)).unwrap();
            let g: DropletRat = Droplet::new(frame.clone(), rand_radii(frame, i, 2000)).unwrap();

            // 1. Minkowski sum: commutative, associative (exact)
            let de = d.minkowski_sum(&e).unwrap();
            assert_eq!(de.radii(), e.minkowski_sum(&d).unwrap().radii(), "i={i} comm");
            assert_eq!(
                de.minkowski_sum(&g).unwrap().radii(),
                d.minkowski_sum(&e.minkowski_sum(&g).unwrap()).unwrap().radii(),
                "i={i} assoc"
            );

            // 2. dimensions add under sum (exact)
            let (md, me, mde) = (d.metrics(), e.metrics(), de.metrics());
            for j in 0..frame.dirs().len() {
                assert_eq!(
                    mde.dimension[j],
                    md.dimension[j].clone() + me.dimension[j].clone(),
                    "i={i} dim add"
                );
            }
            assert_eq!(
                mde.perimeter,
                md.perimeter.clone() + me.perimeter.clone(),
                "i={i} perimeter add"
            );

            // 3. location of D inside D + E is E's normalized radii; Ψ = ΣsU
            let (s, psi) = d.location(&de).unwrap();
            assert_eq!(s, e.radii().to_vec(), "i={i} location");
            assert_eq!(psi, s.iter().fold(BigRational::zero(), |a, b| a + b), "i={i} Ψ");

            // 4. span contains both and is the componentwise max (exact)
            let sp = Droplet::span(&[&d, &e]).unwrap();
            assert!(sp.contains(&d).unwrap() && sp.contains(&e).unwrap(), "i={i} span ⊇");
            for j in 0..frame.dirs().len() {
                let mx = if d.radii()[j] >= e.radii()[j] {
                    d.radii()[j].clone()
                } else {
                    e.radii()[j].clone()
                };
                assert!(sp.radii()[j] <= mx, "i={i} span minimal");
            }
            assert_eq!(Droplet::span(&[&d]).unwrap().radii(), d.radii(), "i={i} span id");

            // 5. chain invariance: location unchanged after summing G to both
            let (s1, _) = d.location(&de).unwrap();
            let (s2, _) = d
                .minkowski_sum(&g)
                .unwrap()
                .location(&de.minkowski_sum(&g).unwrap())
                .unwrap();
            assert_eq!(s1, s2, "i={i} location invariance");
            0
        })
        .sum();
    assert_eq!(violations, 0);

    // chain monotonicity of the work functional on f64 shadows of the same
    // construction: dimensions grow under + while locations are unchanged
    let h = HAssignment::uniform(&axes, HFunction::TwoNeighbour);
    for i in 0..200u64 {
        let radii = |stream: u64, lo: f64| -> Vec<f64> {
            (0..4)
                .map(|j| lo + (rng.uniform(stream, 7000 + i * 8 + j) % 32) as f64 / 8.0)
                .collect()
        };
        let d1: DropletF64 = Droplet::new(axes.clone(), radii(1, 1.0)).unwrap();
        let grow: Vec<f64> = radii(2, 0.0);
        let d2 = Droplet::new(
            axes.clone(),
            d1.radii().iter().zip(&grow).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        let dp: DropletF64 = Droplet::new(axes.clone(), radii(3, 0.5)).unwrap();
        let lhs = work(&d1, &d2, &h).unwrap();
        let rhs = work(
            &d1.minkowski_sum(&dp).unwrap(),
            &d2.minkowski_sum(&dp).unwrap(),
            &h,
        )
        .unwrap();
        assert!(rhs <= lhs + 1e-12, "i={i}: chain {rhs} > {lhs}");
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "runtime {dt:?} ≥ 1 min");
    pass(11, &format!("10⁴ exact rational law checks, 0 violations ({dt:?})"));
}
