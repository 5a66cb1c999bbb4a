//! Release gate: ten checks covering the mathematical contracts and the
//! benchmark trends this crate promises. Each test prints one summary line
//! (visible with `cargo test --test acceptance -- --nocapture`) and fails
//! with the collected violations otherwise.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use boxmg::config::RunConfig;
use boxmg::driver::{compare_traces, run_batch};
use boxmg::linesearch::{hz_search, WolfeParams};
use boxmg::manifold::{
    dexp, dexp_inv, exp_inv, exp_map, geometric_mean, inner, logit, BoxPoint, Tangent,
};
use boxmg::objective::{kl_div, Problem};
use boxmg::optimizer::{
    run_projected_gradient, run_single_level, run_two_level_geometric, EuclideanCoarseModel,
    GeometricCoarseModel,
};
use boxmg::phantom::{make_phantom, PhantomKind};
use boxmg::sparse::CsrMatrix;
use boxmg::tomography;
use boxmg::transfer::GridHierarchy;

/// Collects violations instead of panicking mid-suite, so every criterion
/// reports exactly one line.
struct Check {
    cases: usize,
    fails: Vec<String>,
    dropped: usize,
}

impl Check {
    fn new() -> Self {
        Check {
            cases: 0,
            fails: Vec::new(),
            dropped: 0,
        }
    }

    fn ok(&mut self, cond: bool, msg: impl FnOnce() -> String) {
        self.cases += 1;
        if !cond {
            if self.fails.len() < 8 {
                self.fails.push(msg());
            } else {
                self.dropped += 1;
            }
        }
    }

    fn report(self, slot: usize, label: &str, details: String) {
        if self.fails.is_empty() {
            println!("[{slot:>2}/10] {label}: pass ({details})");
        } else {
            println!(
                "[{slot:>2}/10] {label}: FAIL ({} of {} checks, {details})",
                self.fails.len() + self.dropped,
                self.cases
            );
            for f in &self.fails {
                println!("        {f}");
            }
            if self.dropped > 0 {
                println!("        ... and {} more", self.dropped);
            }
            panic!("{label} failed");
        }
    }
}

fn rand_point(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> BoxPoint {
    BoxPoint::new((0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn rand_tangent(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Tangent {
    Tangent::new((0..n).map(|_| rng.random_range(-scale..scale)).collect())
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn desk_problem(kind: PhantomKind, size: usize, undersampling: f64) -> Problem {
    let ph = make_phantom(kind, size).unwrap();
    tomography::synthesize(&ph, undersampling, 0.5, 0.5).unwrap()
}

#[test]
fn c01_manifold_property_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut c = Check::new();
    let started = Instant::now();
    let h = 1e-6;

    for case in 0..1000 {
        let n = rng.random_range(1..=32);
        let y = rand_point(&mut rng, n, 0.05, 0.95);

        // Retraction axioms: base point fixed, identity differential.
        let zero = Tangent::zeros(n);
        c.ok(exp_map(&y, &zero).values() == y.values(), || {
            format!("case {case}: exp_map(y, 0) != y")
        });
        let v = rand_tangent(&mut rng, n, 0.2);
        c.ok(dexp(&y, &zero, &v).values() == v.values(), || {
            format!("case {case}: dexp at zero is not the identity")
        });

        // Round trips in both directions.
        let y2 = rand_point(&mut rng, n, 0.05, 0.95);
        let forth = exp_map(&y, &exp_inv(&y, &y2));
        let point_err = sup_diff(forth.values(), y2.values());
        c.ok(point_err <= 1e-10, || {
            format!("case {case}: exp(exp_inv) point round trip off by {point_err:.3e}")
        });
        let back = exp_inv(&y, &exp_map(&y, &v));
        let tangent_err = sup_diff(back.values(), v.values());
        c.ok(tangent_err <= 1e-10, || {
            format!("case {case}: exp_inv(exp) tangent round trip off by {tangent_err:.3e}")
        });

        // Differentials against central finite differences.
        let u = rand_tangent(&mut rng, n, 0.15);
        let shift = |s: f64| {
            Tangent::new(
                u.values()
                    .iter()
                    .zip(v.values())
                    .map(|(&ui, &vi)| ui + s * vi)
                    .collect(),
            )
        };
        let plus = exp_map(&y, &shift(h));
        let minus = exp_map(&y, &shift(-h));
        let analytic = dexp(&y, &u, &v);
        for i in 0..n {
            let fd = (plus.values()[i] - minus.values()[i]) / (2.0 * h);
            let err = (analytic.values()[i] - fd).abs();
            c.ok(err <= 1e-6 * (1.0 + fd.abs()), || {
                format!("case {case}: dexp[{i}] = {} vs fd {fd}", analytic.values()[i])
            });
        }

        let w = rand_point(&mut rng, n, 0.1, 0.9);
        let z = rand_tangent(&mut rng, n, 0.1);
        let nudge = |s: f64| {
            BoxPoint::new(
                w.values()
                    .iter()
                    .zip(z.values())
                    .map(|(&wi, &zi)| wi + s * zi)
                    .collect(),
            )
            .unwrap()
        };
        let analytic = dexp_inv(&y, &w, &z);
        let plus = exp_inv(&y, &nudge(h));
        let minus = exp_inv(&y, &nudge(-h));
        for i in 0..n {
            let fd = (plus.values()[i] - minus.values()[i]) / (2.0 * h);
            let err = (analytic.values()[i] - fd).abs();
            c.ok(err <= 1e-6 * (1.0 + fd.abs()), || {
                format!(
                    "case {case}: dexp_inv[{i}] = {} vs fd {fd}",
                    analytic.values()[i]
                )
            });
        }

        // Weighted geometric mean is the log-odds barycenter.
        let k = rng.random_range(2..=8);
        let etas: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let m = geometric_mean(&etas, &weights).unwrap();
        let theta_m = logit(m);
        let residual: f64 = etas
            .iter()
            .zip(&weights)
            .map(|(&e, &w)| w * (logit(e) - theta_m))
            .sum();
        c.ok(residual.abs() <= 1e-12, || {
            format!("case {case}: mean stationarity residual {residual:.3e}")
        });
    }

    let elapsed = started.elapsed();
    c.ok(elapsed < Duration::from_secs(5), || {
        format!("suite took {elapsed:?}, budget 5s")
    });
    c.report(
        1,
        "manifold property suite",
        format!("1000 cases, {elapsed:.2?}"),
    );
}

#[test]
fn c02_transfer_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut c = Check::new();
    let started = Instant::now();

    let sizes = [4usize, 6, 8, 10, 12, 14, 16];
    let grids: Vec<GridHierarchy> = sizes
        .iter()
        .map(|&s| GridHierarchy::bilinear((s, s)).unwrap())
        .collect();

    for t in 0..500 {
        let h = &grids[t % grids.len()];
        let (nf, nc) = (h.fine_len(), h.coarse_len());
        let y = rand_point(&mut rng, nf, 0.1, 0.9);
        let x0 = h.restrict(&y);
        let u = rand_tangent(&mut rng, nc, 0.5);
        let v = rand_tangent(&mut rng, nf, 0.5);

        // Metric adjointness of the tangent transfer pair.
        let lhs = inner(&y, &h.dprolong(&x0, &u), &v);
        let rhs = inner(&x0, &u, &h.restrict_tangent(&y, &v));
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        c.ok((lhs - rhs).abs() <= 1e-10 * scale, || {
            format!("triple {t}: adjointness {lhs} vs {rhs}")
        });

        // Injection undoes prolongation bit for bit.
        let x = rand_point(&mut rng, nc, 0.05, 0.95);
        c.ok(h.restrict(&h.prolong(&x)).values() == x.values(), || {
            format!("triple {t}: restrict(prolong(x)) != x")
        });

        // dprolong against central differences of prolong.
        let step = 1e-6;
        let nudge = |s: f64| {
            BoxPoint::new(
                x.values()
                    .iter()
                    .zip(u.values())
                    .map(|(&xi, &ui)| xi + s * ui)
                    .collect(),
            )
            .unwrap()
        };
        let plus = h.prolong(&nudge(step));
        let minus = h.prolong(&nudge(-step));
        let analytic = h.dprolong(&x, &u);
        for i in 0..nf {
            let fd = (plus.values()[i] - minus.values()[i]) / (2.0 * step);
            let err = (analytic.values()[i] - fd).abs();
            c.ok(err <= 1e-6 * (1.0 + fd.abs()), || {
                format!("triple {t}: dprolong[{i}] {} vs fd {fd}", analytic.values()[i])
            });
        }
    }

    let elapsed = started.elapsed();
    c.ok(elapsed < Duration::from_secs(10), || {
        format!("suite took {elapsed:?}, budget 10s")
    });
    c.report(
        2,
        "grid transfer suite",
        format!(
            "500 triples on {}..{} grids, {elapsed:.2?}",
            sizes[0],
            sizes[sizes.len() - 1]
        ),
    );
}

#[test]
fn c03_bregman_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut c = Check::new();
    let started = Instant::now();

    for inst in 0..200 {
        // Three-point identity of the KL kernel.
        let n = rng.random_range(1..=20);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let cc: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let lhs =
            kl_div(&cc, &a).unwrap() + kl_div(&a, &b).unwrap() - kl_div(&cc, &b).unwrap();
        let rhs: f64 = (0..n)
            .map(|i| (b[i].ln() - a[i].ln()) * (cc[i] - a[i]))
            .sum();
        c.ok((lhs - rhs).abs() <= 1e-10, || {
            format!("instance {inst}: three-point identity off by {:.3e}", lhs - rhs)
        });

        // Pullback identity: the Bregman divergence of y -> KL(Ay, b) is
        // the KL divergence of the projections, independent of b.
        let p = rng.random_range(1..=20);
        let n = rng.random_range(1..=20);
        let mut triplets = Vec::new();
        for r in 0..p {
            // Guarantee a nonempty row, then sprinkle extra entries.
            triplets.push((r, rng.random_range(0..n), rng.random_range(0.2..2.0)));
            for j in 0..n {
                if rng.random_range(0.0..1.0) < 0.4 {
                    triplets.push((r, j, rng.random_range(0.2..2.0)));
                }
            }
        }
        let a = CsrMatrix::from_triplets(p, n, triplets).unwrap();
        let data: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
        let pb = Problem::new(a, data, 0.0, 0.5, (1, n)).unwrap();
        let y = rand_point(&mut rng, n, 0.1, 0.9);
        let y2 = rand_point(&mut rng, n, 0.1, 0.9);
        let direct = kl_div(
            &pb.matrix().mul_vec(y.values()),
            &pb.matrix().mul_vec(y2.values()),
        )
        .unwrap();
        let grad2 = pb.data_grad(&y2);
        let linear: f64 = (0..n)
            .map(|i| grad2[i] * (y.values()[i] - y2.values()[i]))
            .sum();
        let via_h = pb.data_term(&y) - pb.data_term(&y2) - linear;
        c.ok((direct - via_h).abs() <= 1e-10, || {
            format!("instance {inst}: pullback identity off by {:.3e}", direct - via_h)
        });
    }

    let elapsed = started.elapsed();
    c.ok(elapsed < Duration::from_secs(2), || {
        format!("suite took {elapsed:?}, budget 2s")
    });
    c.report(
        3,
        "Bregman identities",
        format!("200 instances, {elapsed:.2?}"),
    );
}

#[test]
fn c04_coarse_model_coherence() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut c = Check::new();
    let started = Instant::now();

    let pb = desk_problem(PhantomKind::Mixed, 16, 0.25);
    let h = GridHierarchy::bilinear(pb.image_shape()).unwrap();
    let coarse = pb.coarsen(&h).unwrap();

    for it in 0..50 {
        let y = rand_point(&mut rng, pb.dim(), 0.08, 0.92);
        let ev = pb.objective(&y);

        // Geometric model: gradient at the anchor equals the restricted
        // Riemannian gradient.
        let rg = boxmg::manifold::riem_grad(&y, &ev.eucl_grad);
        let x0 = h.restrict(&y);
        let trg = h.restrict_tangent(&y, &rg);
        let model = GeometricCoarseModel::new(&coarse, x0.clone(), trg.clone());
        let (_, g0) = model.psi(&x0);
        for i in 0..x0.len() {
            let err = (g0.values()[i] - trg.values()[i]).abs();
            c.ok(err <= 1e-10 * (1.0 + trg.values()[i].abs()), || {
                format!(
                    "iterate {it}: geometric coherence [{i}] {} vs {}",
                    g0.values()[i],
                    trg.values()[i]
                )
            });
        }

        // Euclidean model: gradient at the anchor equals the transposed
        // interpolation of the fine Euclidean gradient.
        let xe = h.interp_transpose(y.values());
        let re = h.interp_transpose(&ev.eucl_grad);
        let emodel = EuclideanCoarseModel::new(&coarse, xe.clone(), re.clone());
        let (_, ge) = emodel.psi(&xe);
        for i in 0..xe.len() {
            let err = (ge[i] - re[i]).abs();
            c.ok(err <= 1e-10 * (1.0 + re[i].abs()), || {
                format!("iterate {it}: euclidean coherence [{i}] {} vs {}", ge[i], re[i])
            });
        }
    }

    let elapsed = started.elapsed();
    c.ok(elapsed < Duration::from_secs(5), || {
        format!("suite took {elapsed:?}, budget 5s")
    });
    c.report(
        4,
        "coarse model first-order coherence",
        format!("50 iterates, both models, {elapsed:.2?}"),
    );
}

#[test]
fn c05_certified_directions_descend() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut c = Check::new();
    let started = Instant::now();
    let armijo = boxmg::linesearch::ArmijoParams::default();

    let problems: Vec<(Problem, GridHierarchy)> = PhantomKind::ALL
        .iter()
        .map(|&k| {
            let pb = desk_problem(k, 16, 0.25);
            let h = GridHierarchy::bilinear(pb.image_shape()).unwrap();
            (pb, h)
        })
        .collect();
    let coarse: Vec<Problem> = problems
        .iter()
        .map(|(pb, h)| pb.coarsen(h).unwrap())
        .collect();

    let mut certified = 0usize;
    let mut attempts = 0usize;
    while certified < 500 && attempts < 3000 {
        attempts += 1;
        let which = attempts % problems.len();
        let (pb, h) = &problems[which];
        let y = rand_point(&mut rng, pb.dim(), 0.08, 0.92);
        let ev = pb.objective(&y);
        let rg = boxmg::manifold::riem_grad(&y, &ev.eucl_grad);
        let x0 = h.restrict(&y);
        let trg = h.restrict_tangent(&y, &rg);
        let model = GeometricCoarseModel::new(&coarse[which], x0, trg);
        let Some(candidate) = model.descend(3, &armijo) else {
            continue;
        };
        if !model.certify(&candidate) {
            continue;
        }
        certified += 1;
        let xi = exp_inv(model.x0(), &candidate);
        let d = h.dprolong(model.x0(), &xi);
        let slope: f64 = d
            .values()
            .iter()
            .zip(&ev.eucl_grad)
            .map(|(&di, &gi)| di * gi)
            .sum();
        c.ok(slope < 0.0, || {
            format!("certified candidate {certified}: fine slope {slope:.3e} >= 0")
        });
    }
    c.ok(certified >= 500, || {
        format!("only {certified} certified candidates in {attempts} attempts")
    });

    let elapsed = started.elapsed();
    c.ok(elapsed < Duration::from_secs(30), || {
        format!("suite took {elapsed:?}, budget 30s")
    });
    c.report(
        5,
        "descent certification",
        format!("{certified} certified candidates, {attempts} attempts, {elapsed:.2?}"),
    );
}

#[test]
fn c06_line_search_contract() {
    let mut c = Check::new();
    let started = Instant::now();
    let p = WolfeParams::default();

    // Quadratics with the minimizer well inside the initial step, where the
    // first secant lands exactly.
    let quadratics: Vec<(f64, f64)> = vec![
        (1.0, 0.05),
        (1.0, 0.4),
        (4.0, 0.1),
        (4.0, 0.3),
        (0.5, 0.2),
        (0.5, 0.35),
        (10.0, 0.15),
        (10.0, 0.25),
    ];
    let mut battery: Vec<(String, Box<dyn Fn(f64) -> (f64, f64)>, Option<f64>)> = Vec::new();
    for &(a, m) in &quadratics {
        battery.push((
            format!("quadratic a={a} m={m}"),
            Box::new(move |t: f64| (a * (t - m) * (t - m), 2.0 * a * (t - m))),
            Some(m),
        ));
    }
    battery.push((
        "exp(t) - 2t".into(),
        Box::new(|t: f64| (t.exp() - 2.0 * t, t.exp() - 2.0)),
        None,
    ));
    battery.push((
        "cosh(t) - 1.5t".into(),
        Box::new(|t: f64| (t.cosh() - 1.5 * t, t.sinh() - 1.5)),
        None,
    ));
    battery.push((
        "t^2/2 - ln(1+t)".into(),
        Box::new(|t: f64| {
            (0.5 * t * t - (1.0 + t).ln(), t - 1.0 / (1.0 + t))
        }),
        None,
    ));
    battery.push((
        "(t-0.5)^4".into(),
        Box::new(|t: f64| {
            let d = t - 0.5;
            (d.powi(4), 4.0 * d.powi(3))
        }),
        None,
    ));
    battery.push((
        "t^4 - t".into(),
        Box::new(|t: f64| (t.powi(4) - t, 4.0 * t.powi(3) - 1.0)),
        None,
    ));
    battery.push((
        "1/(1+t) + 0.5t".into(),
        Box::new(|t: f64| {
            let s = 1.0 + t;
            (1.0 / s + 0.5 * t, -1.0 / (s * s) + 0.5)
        }),
        None,
    ));
    battery.push((
        "-t*exp(-t)".into(),
        Box::new(|t: f64| (-t * (-t).exp(), (t - 1.0) * (-t).exp())),
        None,
    ));
    battery.push((
        "sqrt(1+t^2) - 0.9t".into(),
        Box::new(|t: f64| {
            let s = (1.0 + t * t).sqrt();
            (s - 0.9 * t, t / s - 0.9)
        }),
        None,
    ));
    battery.push((
        "-sin(t) + 0.1t".into(),
        Box::new(|t: f64| (-t.sin() + 0.1 * t, -t.cos() + 0.1)),
        None,
    ));
    battery.push((
        "ln(1+e^t) - 0.8t".into(),
        Box::new(|t: f64| {
            let e = t.exp();
            ((1.0 + e).ln() - 0.8 * t, e / (1.0 + e) - 0.8)
        }),
        None,
    ));
    battery.push((
        "0.2t^2 + sin(0.5t)^2".into(),
        Box::new(|t: f64| {
            let s = (0.5 * t).sin();
            // Slope at zero is -1 after the shift below.
            (0.2 * t * t + s * s - t, 0.4 * t + 2.0 * s * (0.5 * t).cos() * 0.5 - 1.0)
        }),
        None,
    ));
    battery.push((
        "huber-like".into(),
        Box::new(|t: f64| {
            let d = t - 0.7;
            let s = (1.0 + d * d).sqrt();
            (s - 1.0, d / s)
        }),
        None,
    ));
    assert_eq!(battery.len(), 20, "battery size is part of the contract");

    for (name, phi, exact) in &battery {
        let result = hz_search(|t| phi(t), &p);
        let alpha = match result {
            Ok(a) => a,
            Err(e) => {
                c.ok(false, || format!("{name}: search failed with {e}"));
                continue;
            }
        };
        let (phi0, dphi0) = phi(0.0);
        let (phia, dphia) = phi(alpha);
        c.ok(dphi0 < 0.0, || format!("{name}: not a descent test case"));
        // Approximate Wolfe by direct re-evaluation.
        let lower = p.sigma * dphi0;
        let upper = (2.0 * p.delta - 1.0) * dphi0;
        c.ok(lower <= dphia && dphia <= upper, || {
            format!("{name}: slope {dphia:.3e} outside [{lower:.3e}, {upper:.3e}] at {alpha}")
        });
        c.ok(phia <= phi0 + p.eps * (1.0 + phi0.abs()), || {
            format!("{name}: value {phia} above threshold at {alpha}")
        });
        if let Some(m) = exact {
            c.ok((alpha - m).abs() <= 1e-12, || {
                format!("{name}: returned {alpha}, exact minimizer {m}")
            });
        }
    }

    let elapsed = started.elapsed();
    c.ok(elapsed < Duration::from_secs(2), || {
        format!("suite took {elapsed:?}, budget 2s")
    });
    c.report(
        6,
        "line-search contract",
        format!("20 functions, {elapsed:.2?}"),
    );
}

#[test]
fn c07_two_level_saves_fine_evaluations() {
    let mut c = Check::new();
    let started = Instant::now();
    let cfg = boxmg::optimizer::SolverConfig::default();

    let mut wins = 0usize;
    let mut lines = Vec::new();
    for &kind in PhantomKind::ALL.iter() {
        let pb = desk_problem(kind, 128, 0.02);
        let h = GridHierarchy::bilinear(pb.image_shape()).unwrap();
        let mut single = run_single_level(&pb, &cfg).unwrap();
        let mut two = run_two_level_geometric(&pb, &h, &cfg).unwrap();
        single.problem = format!("{}-128-u0.02", kind.name());
        two.problem = single.problem.clone();
        let table = compare_traces(&[single, two]).unwrap();
        // Index 1 of the threshold list is the 0.1 column.
        let evals =
            |row: usize| table.rows[row].hits[1].map(|h| h.fine_grad_evals);
        let (s, t) = (evals(0), evals(1));
        let verdict = match (s, t) {
            (Some(s), Some(t)) if t < s => {
                wins += 1;
                "win"
            }
            (Some(s), Some(t)) if (t as f64) <= 1.2 * (s as f64) => "within 1.2x",
            (None, Some(_)) => {
                wins += 1;
                "win (single never reached 0.1)"
            }
            _ => "loss",
        };
        lines.push(format!(
            "{}: single {:?}, two-level {:?} evals to rel 0.1 -> {verdict}",
            kind.name(),
            s,
            t
        ));
        if verdict == "loss" {
            c.ok(false, || lines.last().unwrap().clone());
        }
    }
    for l in &lines {
        println!("        {l}");
    }
    c.ok(wins >= 4, || {
        format!("two-level strictly better on only {wins} of 6 phantoms")
    });

    let elapsed = started.elapsed();
    c.ok(elapsed < Duration::from_secs(600), || {
        format!("suite took {elapsed:?}, budget 600s")
    });
    c.report(
        7,
        "two-level vs single-level evaluation counts",
        format!("{wins}/6 strict wins, {elapsed:.2?}"),
    );
}

#[test]
fn c08_riemannian_beats_projected_gradient() {
    let mut c = Check::new();
    let started = Instant::now();
    let cfg = boxmg::optimizer::SolverConfig::default();

    let mut wins = 0usize;
    for &kind in PhantomKind::ALL.iter() {
        let pb = desk_problem(kind, 128, 0.02);
        let rg = run_single_level(&pb, &cfg).unwrap();
        let pg = run_projected_gradient(&pb, &cfg).unwrap();
        let rg_final = rg.records.last().unwrap().f;
        let pg_final = pg.records.last().unwrap().f;
        let win = rg_final <= pg_final;
        println!(
            "        {}: riemannian {rg_final:.6e} vs projected {pg_final:.6e} -> {}",
            kind.name(),
            if win { "win" } else { "loss" }
        );
        if win {
            wins += 1;
        }
    }
    c.ok(wins >= 4, || {
        format!("riemannian descent better on only {wins} of 6 phantoms")
    });

    let elapsed = started.elapsed();
    c.ok(elapsed < Duration::from_secs(600), || {
        format!("suite took {elapsed:?}, budget 600s")
    });
    c.report(
        8,
        "riemannian vs projected gradient finals",
        format!("{wins}/6 wins after 50 iterations, {elapsed:.2?}"),
    );
}

#[test]
fn c09_default_config_parameters() {
    let mut c = Check::new();
    let dump = RunConfig::default().to_toml_string();
    let parsed = RunConfig::from_toml_str(&dump).unwrap();

    let exact = [
        ("eta", parsed.solver.eta, 0.49),
        ("eps_dist", parsed.solver.eps_dist, 1e-3),
        ("lambda", parsed.problem.lambda, 0.5),
        ("rho", parsed.problem.rho, 0.5),
        ("armijo sigma", parsed.solver.armijo.sigma, 1e-4),
        ("armijo beta", parsed.solver.armijo.beta, 0.6),
        ("init_value", parsed.solver.init_value, 0.5),
        ("eps_clip", parsed.solver.eps_clip, 1e-10),
    ];
    for (name, got, want) in exact {
        c.ok(got == want, || format!("{name}: dump has {got}, expected {want}"));
    }
    c.ok(parsed.solver.max_iter == 50, || {
        format!("max_iter: dump has {}, expected 50", parsed.solver.max_iter)
    });
    c.ok(
        parsed.solver.armijo.alpha0 == 1.0 / parsed.solver.armijo.beta,
        || "alpha0 is not 1/beta".to_string(),
    );

    c.report(
        9,
        "default configuration values",
        "serialized and reparsed".to_string(),
    );
}

#[test]
fn c10_benchmark_reruns_are_byte_identical() {
    let mut c = Check::new();
    let started = Instant::now();

    // Full default benchmark: every phantom, every mode.
    let cfg = RunConfig::default();
    cfg.validate().unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let batch_a = run_batch(&cfg, dir_a.path()).unwrap();
    let batch_b = run_batch(&cfg, dir_b.path()).unwrap();
    c.ok(batch_a.cells.len() == 24, || {
        format!("expected 24 cells, got {}", batch_a.cells.len())
    });

    let mut names: Vec<String> = std::fs::read_dir(dir_a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    c.ok(
        names.iter().filter(|n| n.ends_with(".csv")).count() == 25,
        || format!("expected 24 traces + summary, listing: {names:?}"),
    );
    for name in &names {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = dir_b.path().join(name);
        c.ok(b.exists(), || format!("{name} missing from rerun"));
        if b.exists() {
            let b = std::fs::read(b).unwrap();
            c.ok(a == b, || format!("{name} differs between reruns"));
        }
    }
    let _ = batch_b;

    let elapsed = started.elapsed();
    c.report(
        10,
        "benchmark determinism",
        format!("{} files byte-compared, {elapsed:.2?}", names.len()),
    );
}
