//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use hstv::approx::{density_experiment, DeltaRule, FieldChoice, Target};
use hstv::cpwl::{double_pyramid, htv, pyramid, remnotclosed_fixtures};
use hstv::delaunay::delaunay_triangulate;
use hstv::fit2d::{self, bump_cost, lambda_threshold_experiment, polygon_fan, square_fan, Exterior, FitProblem};
use hstv::mesh::{check_delaunay_exact, AxisBox};
use hstv::oriented_grid::{oriented_triangulation, rotation_2d, GridParams, OrientationField};
use hstv::radial::{bump_profile, eval_average_gap, radial_htv, RadialProfile};
use hstv::schatten::{schatten_norm, trace_schatten_gap, GeneralMatrix, PExponent, SymMatrix};
use rand::Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let ok = out.ok && took <= budget;
    let timing = if took <= budget { String::new() } else { format!(" (over the {budget:?} budget)") };
    println!("{} {name}: {} [{took:.2?}]{timing}", if ok { "PASS" } else { "FAIL" }, out.detail);
    ok
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

const PS: [PExponent; 3] = [PExponent::ONE, PExponent::TWO, PExponent::Infinity];

fn p_inv(p: PExponent) -> f64 {
    match p {
        PExponent::Finite(v) => 1.0 / v,
        PExponent::Infinity => 0.0,
    }
}

fn cone_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [2usize, 3] {
        // ω_2 = π, ω_3 = 4π/3
        let omega = if d == 2 { PI } else { 4.0 * PI / 3.0 };
        let cone = RadialProfile::cone(d);
        for p in PS {
            for r in [0.5f64, 1.0, 2.0] {
                let inner = ((d - 1) as f64).powf(p_inv(p) - 1.0) * r.min(1.0).powi(d as i32 - 1);
                let expected = d as f64 * omega * (inner + if r > 1.0 { 1.0 } else { 0.0 });
                let got = radial_htv(&cone, p, r).map(|v| v.value).unwrap_or(f64::NAN);
                worst = worst.max(rel(got, expected));
            }
        }
    }
    let planar = radial_htv(&RadialProfile::cone(2), PExponent::ONE, 2.0).map(|v| v.value).unwrap_or(f64::NAN);
    let ok = worst <= 1e-9 && rel(planar, 4.0 * PI) <= 1e-9;
    Outcome { ok, detail: format!("worst relative error {worst:.1e}, planar cone {planar:.12} vs 4π") }
}

fn bump_family() -> Outcome {
    let mut worst: f64 = 0.0;
    for eps in [0.5, 0.1, 0.01] {
        let v = bump_profile(eps).and_then(|b| radial_htv(&b, PExponent::ONE, f64::INFINITY));
        worst = worst.max((v.map(|v| v.value).unwrap_or(f64::NAN) - 4.0 * PI).abs());
    }
    let mut worst_p: f64 = 0.0;
    for p in [PExponent::TWO, PExponent::Infinity] {
        let limit = (1.0 + p_inv(p)).exp2() * PI;
        let v = bump_profile(1e-3).and_then(|b| radial_htv(&b, p, f64::INFINITY));
        worst_p = worst_p.max(rel(v.map(|v| v.value).unwrap_or(f64::NAN), limit));
    }
    Outcome {
        ok: worst <= 1e-8 && worst_p <= 0.01,
        detail: format!("p=1 error {worst:.1e}, p∈{{2,∞}} relative distance to 2^(1+1/p)π {worst_p:.2e}"),
    }
}

fn cpwl_fixtures() -> Outcome {
    let b = AxisBox::new(vec![-3.0, -2.0], vec![3.0, 2.0]).unwrap();
    let mut worst: f64 = 0.0;
    for p in PS {
        let g = htv(&pyramid([0.0, 0.0]), &b, p).unwrap().total;
        let g0 = htv(&double_pyramid(), &b, p).unwrap().total;
        worst = worst.max((g - 16.0).abs()).max((g0 - 32.0).abs());
    }
    // Independent edge-by-edge evaluation of the same functions.
    let second = fit2d::discrete_htv(double_pyramid().mesh(), double_pyramid().values(), Exterior::Zero);
    worst = worst.max((second - 32.0).abs());
    let mut values = Vec::new();
    let mut oracle: f64 = 0.0;
    for h in [0.2, 0.1, 0.05, 0.025] {
        let g = remnotclosed_fixtures(h).unwrap();
        let v = htv(&g, &b, PExponent::ONE).unwrap().total;
        let w = fit2d::discrete_htv(g.mesh(), g.values(), Exterior::Zero);
        oracle = oracle.max((v - w).abs()).max((v - (32.0 + 8.0 * h)).abs());
        values.push(v);
    }
    let monotone = values.windows(2).all(|w| (w[1] - 32.0).abs() < (w[0] - 32.0).abs());
    Outcome {
        ok: worst <= 1e-12 && oracle <= 1e-12 && monotone,
        detail: format!("fixture error {worst:.1e}, G_h = {values:.6?} (oracle error {oracle:.1e})"),
    }
}

fn delaunay_audits() -> Outcome {
    let mut rng = common::rng(4);
    let mut bad = 0;
    let mut volume_mismatch = 0;
    let mut runs = 0;
    for (d, sets, max_n) in [(2usize, 100, 200usize), (3, 20, 100)] {
        let mut done = 0;
        while done < sets {
            let n = rng.gen_range(d + 2..=max_n);
            let (ints, vs) = common::dyadic_points(&mut rng, n, d, 20);
            let hull = if d == 2 { Some(common::hull_area2_i128(&ints)) } else { common::hull_volume6_i128(&ints) };
            let Some(hull) = hull else { continue };
            let t = match delaunay_triangulate(&vs) {
                Ok(t) => t,
                Err(_) => {
                    bad += 1;
                    done += 1;
                    continue;
                }
            };
            if !check_delaunay_exact(&t).ok || common::delaunay_violations(&t, &ints) != 0 {
                bad += 1;
            }
            if common::mesh_volume_i128(&t, &ints) != hull {
                volume_mismatch += 1;
            }
            done += 1;
            runs += 1;
        }
    }
    Outcome {
        ok: bad == 0 && volume_mismatch == 0,
        detail: format!("{runs} point sets, {bad} with empty-ball violations, {volume_mismatch} with hull volume mismatch"),
    }
}

fn oriented_grid() -> Outcome {
    let delta = 0.25;
    let degrees = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0, 10.0, 80.0];
    let domain = AxisBox::new(vec![0.0; 2], vec![3.0 * delta; 2]).unwrap();
    let field = OrientationField::from_fn(delta, &domain, &[delta / 2.0; 2], |z| {
        let i = (z[0] / delta).floor() as usize;
        let j = (z[1] / delta).floor() as usize;
        rotation_2d(degrees[3 * j + i] * PI / 180.0)
    })
    .unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut cstar = Vec::new();
    for eps in [1.0 / 64.0, 1.0 / 128.0] {
        let params = GridParams::practical(eps, delta, domain.clone()).unwrap();
        match oriented_triangulation(&field, &params) {
            Ok((_, audit)) => {
                let c_bar = audit.mesh.uniformity.map(|u| u.c_bar).unwrap_or(f64::INFINITY);
                let checked = audit.orientation.iter().filter(|o| o.checked && o.ok).count();
                ok &= audit.orientation_ok && checked == 9 && c_bar <= audit.c_g && audit.mesh.delaunay_ok;
                ok &= audit.mesh.nondegeneracy_c.is_finite();
                cstar.push(audit.mesh.nondegeneracy_c);
                lines.push(format!(
                    "eps=1/{}: {checked}/9 cells oriented, c_bar {c_bar:.3} ≤ C_G {}, c_* {:.3}",
                    (1.0 / eps) as u32,
                    audit.c_g,
                    audit.mesh.nondegeneracy_c
                ));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("eps={eps}: {e}"));
            }
        }
    }
    let drift = if cstar.len() == 2 { rel(cstar[1], cstar[0]) } else { f64::INFINITY };
    ok &= drift <= 0.10;
    Outcome { ok, detail: format!("{}; c_* drift {:.1}%", lines.join("; "), 100.0 * drift) }
}

fn density() -> Outcome {
    let omega = AxisBox::new(vec![0.0001; 2], vec![0.9999; 2]).unwrap();
    let eps = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let rule = DeltaRule::default();
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, field) in
        [("quad_iso", FieldChoice::Adapted), ("quad_saddle", FieldChoice::Adapted), ("quad_saddle", FieldChoice::Identity)]
    {
        let w = Target::builtin(name, 2).unwrap();
        // Both quadratics have |∇²w|₁ = 2 pointwise.
        let exact = 2.0 * omega.volume();
        match density_experiment(&w, &eps, rule, &omega, field) {
            Ok(rows) => {
                let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
                ok &= rows.iter().all(|r| rel(r.target, exact) < 1e-9);
                ok &= match field {
                    FieldChoice::Adapted => gaps[2] <= 0.05 && gaps.windows(2).all(|g| g[1] < g[0]),
                    FieldChoice::Identity => gaps.iter().all(|&g| g >= 0.15),
                };
                lines.push(format!("{name}/{field:?} gaps {gaps:.4?}"));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome { ok, detail: lines.join("; ") }
}

fn fit_solver() -> Outcome {
    let prob = FitProblem::new(square_fan(), vec![0], vec![1.0], f64::INFINITY).unwrap().with_exterior(Exterior::Zero);
    let sol = fit2d::solve(&prob).unwrap();
    let mut ok = (sol.objective - 16.0).abs() <= 1e-9 && sol.certificate <= 1e-7;
    let costs: Vec<f64> = [8, 16, 32].iter().map(|&k| bump_cost(&polygon_fan(k, 1.0).unwrap(), 0, 1.0).unwrap().value).collect();
    // Cone over the regular k-gon of circumradius 1: 4k·tan(π/k).
    let oracle = [8.0f64, 16.0, 32.0].iter().map(|k| 4.0 * k * (PI / k).tan());
    ok &= costs.iter().zip(oracle).all(|(c, o)| rel(*c, o) <= 1e-9);
    ok &= costs.windows(2).all(|w| w[1] < w[0]) && costs.iter().all(|&c| c >= 4.0 * PI);

    let mesh = fit2d::grid_mesh(8, 2.0).unwrap();
    let id = |i: usize, j: usize| j * 9 + i;
    let two = FitProblem::new(mesh, vec![id(3, 4), id(5, 4)], vec![1.0, -0.5], 1.0).unwrap().with_exterior(Exterior::Zero);
    let report = lambda_threshold_experiment(&two, &[1.0, 4.0 * PI, 20.0]).unwrap();
    ok &= report.plateau && report.monotone && report.modification_ok;
    Outcome {
        ok,
        detail: format!(
            "pyramid fan {:.12} (certificate {:.1e}); fans 8/16/32 {costs:.6?}; two-site threshold {:.4}, plateau {}",
            sol.objective, sol.certificate, report.threshold, report.plateau
        ),
    }
}

fn matrix_kernel() -> Outcome {
    let mut rng = common::rng(8);
    let ps = [PExponent::ONE, PExponent::Finite(1.5), PExponent::TWO, PExponent::Finite(3.0), PExponent::Infinity];
    let mut failures = [0usize; 6];
    for d in [2usize, 3, 4] {
        for _ in 0..10_000 {
            let m = common::random_matrix(&mut rng, d);
            let n = common::random_matrix(&mut rng, d);
            let q = common::random_orthogonal(&mut rng, d);
            let p = ps[rng.gen_range(0..ps.len())];
            let pq = ps[rng.gen_range(0..ps.len())];
            let nm = schatten_norm(&m, p);
            // duality
            if m.frobenius_dot(&n).abs() > nm * schatten_norm(&n, p.conjugate()) * (1.0 + 1e-12) + 1e-14 {
                failures[0] += 1;
            }
            // orthogonal invariance
            let (l, r) = (schatten_norm(&q.mul(&m), p), schatten_norm(&m.mul(&q), p));
            if rel(l, nm) > 1e-12 || rel(r, nm) > 1e-12 {
                failures[1] += 1;
            }
            // submultiplicativity
            if schatten_norm(&m.mul(&n), p) > nm * schatten_norm(&n, p) + 1e-12 {
                failures[2] += 1;
            }
            // equivalence with constant d
            if nm > d as f64 * schatten_norm(&m, pq) * (1.0 + 1e-12) {
                failures[3] += 1;
            }
            // rank one
            let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r1 = GeneralMatrix::outer(&u, &v).unwrap();
            let norms: Vec<f64> = PS.iter().map(|&p| schatten_norm(&r1, p)).collect();
            let spread = norms.iter().fold(f64::MIN, |a, &b| a.max(b)) - norms.iter().fold(f64::MAX, |a, &b| a.min(b));
            if spread > 1e-12 {
                failures[4] += 1;
            }
            // |Tr| = |·|₁ iff one sign, on Q·diag(λ)·Qᵀ with known λ
            let same_sign = rng.gen_bool(0.5);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lambdas: Vec<f64> = (0..d)
                .map(|k| {
                    let mag = rng.gen_range(0.1..1.0);
                    if same_sign || k % 2 == 0 {
                        sign * mag
                    } else {
                        -sign * mag
                    }
                })
                .collect();
            let s = SymMatrix::symmetrize(&q.mul(&GeneralMatrix::diag(&lambdas)).mul(&q.transpose()));
            if trace_schatten_gap(&s).equality != same_sign {
                failures[5] += 1;
            }
        }
    }
    Outcome {
        ok: failures.iter().all(|&f| f == 0),
        detail: format!(
            "3×10⁴ samples; failures: duality {}, orthogonal {}, submultiplicative {}, equivalence {}, rank-one {}, trace {}",
            failures[0], failures[1], failures[2], failures[3], failures[4], failures[5]
        ),
    }
}

fn average_gap() -> Outcome {
    let mut rng = common::rng(9);
    let mut fails = 0;
    let mut errors = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..1000 {
        let outer = rng.gen_range(0.5..3.0);
        let prof = common::random_profile(&mut rng, outer);
        let r = rng.gen_range(0.01..0.5) * outer;
        match eval_average_gap(&prof, r) {
            Ok(g) => {
                if !g.holds {
                    fails += 1;
                }
                if g.bound > 0.0 {
                    tightest = tightest.min((g.bound - g.gap) / g.bound);
                }
            }
            Err(_) => errors += 1,
        }
    }
    Outcome {
        ok: fails == 0 && errors == 0,
        detail: format!("10³ random profiles, {fails} violations, {errors} errors, smallest relative slack {tightest:.3}"),
    }
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        check("1 cone closed form", s(1), cone_closed_form),
        check("2 bump family", s(1), bump_family),
        check("3 cpwl fixtures", s(1), cpwl_fixtures),
        check("4 delaunay audits", s(30), delaunay_audits),
        check("5 oriented grid", s(60), oriented_grid),
        check("6 density experiment", s(300), density),
        check("7 fit solver", s(60), fit_solver),
        check("8 matrix kernel", s(10), matrix_kernel),
        check("9 average gap", s(10), average_gap),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
