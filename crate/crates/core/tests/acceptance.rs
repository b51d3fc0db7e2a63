//! Acceptance suite: one PASS/FAIL line per criterion, printed in order.
//! Run with `cargo test -p nlkfp --test acceptance -- --nocapture`.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use nlkfp::converge::{converge_experiment, ConvergeConfig};
use nlkfp::difflimit::{
    barenblatt, diffusion_limit_experiment, macro_params, pme_solve, DiffLimitConfig, Line, PmeOptions,
};
use nlkfp::fields::{interpolation_constant, interpolation_slack, Reference};
use nlkfp::params::gamma_star;
use nlkfp::profiles::{
    fundamental_solution, gamma_for_mass, mass_rescale, pressure_star, scale_orbit, translated_solution,
    ProfileFrame, ProfileSpec, SelfSimilarMap,
};
use nlkfp::solver::{
    check_contraction, comparison_violation, evolve, evolve_ensemble, rotating_extent, sample_profile,
    square_grid, FloorSpec, Sandwich, SolverConfig, Trajectory, TransportScheme,
};
use nlkfp::spectrum::{assemble, eigensolve, Backend, Domain, EigenOptions, SpectrumResult, Stencil};
use nlkfp::{model_params, Exec, Field, Frame, ModelParams, PhaseGrid};

type Res<T> = Result<T, Box<dyn std::error::Error>>;

const RECTANGLE: f64 = -0.4152;
const ELLIPSE: f64 = -0.4272;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(name: &'static str, pass: bool, detail: String) -> Verdict {
    let v = Verdict { name, pass, detail };
    println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    v
}

fn p08() -> ModelParams {
    model_params(1, 0.8, true).unwrap()
}

/// Least-squares slope.
fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
    let (mut num, mut den) = (0.0, 0.0);
    for (t, y) in pts {
        num += (t - mt) * (y - my);
        den += (t - mt) * (t - mt);
    }
    num / den
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn fmt_z(z: Option<Complex64>) -> String {
    z.map_or("none".into(), |z| format!("{:.5}{:+.5}i", z.re, z.im))
}

/// Largest computed real part, kernel excluded, as the criterion reads it:
/// bulk modes only, with the raw value (wall modes included) shown next to it.
fn leading_line(res: &SpectrumResult, target: f64, tol: f64) -> (bool, String) {
    let z = res.leading_interior();
    let ok = z.is_some_and(|z| (z.re - target).abs() <= tol);
    let s = format!(
        "{} {}x{} {}: leading {} (ref {target}, |diff| {:.4}), raw incl. wall modes {}",
        res.domain.name(),
        res.nx,
        res.nv,
        res.backend.name(),
        fmt_z(z),
        z.map_or(f64::NAN, |z| (z.re - target).abs()),
        fmt_z(res.leading_nonzero())
    );
    (ok, s)
}

fn spectrum(domain: Domain, nx: usize, nv: usize, backend: Backend) -> Res<SpectrumResult> {
    let p = p08();
    let asm = assemble(&p, domain, nx, nv, Stencil::default(), Exec::default())?;
    let mut opts = EigenOptions::new(30);
    opts.backend = backend;
    Ok(eigensolve(&asm, &opts)?)
}

fn spectrum_checks(out: &mut Vec<Verdict>) -> Res<()> {
    let rect = Domain::Rectangle { lx: 18.0, lv: 28.0 };
    let ell = Domain::equal_area_ellipse(18.0, 28.0);

    let t0 = Instant::now();
    let r = spectrum(rect, 120, 180, Backend::Arnoldi)?;
    let e = spectrum(ell, 120, 180, Backend::Arnoldi)?;
    let secs = t0.elapsed().as_secs_f64();
    let (ok_r, s_r) = leading_line(&r, RECTANGLE, 0.02);
    let (ok_e, s_e) = leading_line(&e, ELLIPSE, 0.02);
    out.push(verdict(
        "leading eigenvalues",
        ok_r && ok_e && secs <= 600.0,
        format!("{s_r}; {s_e}; {secs:.0} s (limit 600)"),
    ));

    let t1 = Instant::now();
    let rc = spectrum(rect, 60, 90, Backend::Dense)?;
    let ec = spectrum(ell, 60, 90, Backend::Dense)?;
    let (ok_rc, s_rc) = leading_line(&rc, RECTANGLE, 0.05);
    let (ok_ec, s_ec) = leading_line(&ec, ELLIPSE, 0.05);
    println!(
        "{} leading eigenvalues, CI variant (not the judged configuration): {s_rc}; {s_ec}; {:.0} s",
        if ok_rc && ok_ec { "PASS" } else { "FAIL" },
        t1.elapsed().as_secs_f64()
    );

    // ladder at 120x180 on the rectangle
    let worst = r.analytic.iter().map(|c| c.distance).fold(0.0, f64::max);
    let hits = r.analytic.iter().all(|c| c.distance <= 0.01);
    let allowance = 1e-6 + worst;
    let max_re = r.max_real();
    let ladder: Vec<String> = r
        .analytic
        .iter()
        .map(|c| format!("{} {:.4} -> {} (d {:.1e}, res {:.1e})", c.label, c.lambda, fmt_z(c.nearest), c.distance, c.residual))
        .collect();
    out.push(verdict(
        "analytic ladder",
        hits && max_re <= allowance,
        format!(
            "{}; max Re {max_re:.2e} <= 1e-6 + truncation {worst:.2e}",
            ladder.join(", ")
        ),
    ));
    Ok(())
}

/// `γ⋆` from Gamma functions: the mass of `g_γ` scales out to
/// `∫(1 ± |z|²)₊^{1/(m−1)} dz` over `ℝ^{2d}`.
fn gamma_star_oracle(d: usize, m: f64) -> f64 {
    let df = d as f64;
    let a = model_params(d, m, false).unwrap().a;
    let b = 0.5 * (1.0 + a);
    let pf = ((1.0 - m) / m).abs();
    let pi = std::f64::consts::PI;
    // mass = (|γ|/B)^d A^{−d/2} (pf |γ|)^{e} π^d Γ-ratio, e = 1/(m−1)
    let e = 1.0 / (m - 1.0);
    let ln_ratio = if m < 1.0 {
        ln_gamma(-e - df) - ln_gamma(-e)
    } else {
        ln_gamma(e + 1.0) - ln_gamma(e + 1.0 + df)
    };
    let ln_c = -df * b.ln() - 0.5 * df * a.ln() + e * pf.ln() + df * pi.ln() + ln_ratio;
    let ln_abs = -ln_c / (df + e);
    let s = if m < 1.0 { 1.0 } else { -1.0 };
    s * ln_abs.exp()
}

fn normalization(out: &mut Vec<Verdict>) -> Res<()> {
    let pairs: Vec<(usize, f64)> = [0.2, 0.4, 0.6, 0.8, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9]
        .iter()
        .map(|&m| (1, m))
        .chain([0.6, 0.7, 0.8, 0.9, 1.1, 1.2, 1.3, 1.4].iter().map(|&m| (2, m)))
        .chain([(3, 0.8), (3, 1.2)])
        .collect();
    let mut worst: f64 = 0.0;
    for &(d, m) in &pairs {
        let p = model_params(d, m, false)?;
        worst = worst.max(rel(gamma_star(&p)?, gamma_star_oracle(d, m)));
    }
    let p = p08();
    let l = rotating_extent(&p, gamma_for_mass(&p, 2.0), 1e-12);
    let grid = square_grid(&p, 256, l)?;
    let mass = sample_profile(&p, &grid, p.gamma_star)?.mass();
    out.push(verdict(
        "normalization oracle",
        worst <= 1e-8 && (mass - 1.0).abs() <= 2e-3,
        format!(
            "{} (d,m) pairs, max rel diff {worst:.1e} (tol 1e-8); grid mass at 256^2 = {mass:.6} (tol 2e-3)",
            pairs.len()
        ),
    ));
    Ok(())
}

/// `max |∂t f + v ∂x f − ∂v² f^m|` over `pts` with centred differences of step `h`.
fn kinetic_residual<F: Fn(f64, f64, f64) -> f64>(f: &F, m: f64, pts: &[(f64, f64, f64)], h: f64) -> f64 {
    pts.iter()
        .map(|&(t, x, v)| {
            let ft = (f(t + h, x, v) - f(t - h, x, v)) / (2.0 * h);
            let fx = (f(t, x + h, v) - f(t, x - h, v)) / (2.0 * h);
            let fm = |v: f64| f(t, x, v).powf(m);
            let fvv = (fm(v + h) - 2.0 * fm(v) + fm(v - h)) / (h * h);
            (ft + v * fx - fvv).abs()
        })
        .fold(0.0, f64::max)
}

/// `max |∂t P − [(1−m) P ∂v²P − (∂vP)² − v ∂xP]|` over `pts`.
fn pressure_residual<F: Fn(f64, f64, f64) -> f64>(pr: &F, m: f64, pts: &[(f64, f64, f64)], h: f64) -> f64 {
    pts.iter()
        .map(|&(t, x, v)| {
            let p0 = pr(t, x, v);
            let pt = (pr(t + h, x, v) - pr(t - h, x, v)) / (2.0 * h);
            let px = (pr(t, x + h, v) - pr(t, x - h, v)) / (2.0 * h);
            let pv = (pr(t, x, v + h) - pr(t, x, v - h)) / (2.0 * h);
            let pvv = (pr(t, x, v + h) - 2.0 * p0 + pr(t, x, v - h)) / (h * h);
            (pt - ((1.0 - m) * p0 * pvv - pv * pv - v * px)).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual at `h` within `tol`, and second order shown by halving `h`
/// unless the residual is already at rounding level.
fn stencil_check(r: impl Fn(f64) -> f64, h: f64, tol: f64) -> (bool, String) {
    let (r1, r2) = (r(h), r(0.5 * h));
    let order = (r1 / r2).log2();
    let ok = r1 <= tol && (order >= 1.7 || r1 <= 1e-9);
    (ok, format!("{r1:.1e} at h={h}, {r2:.1e} at h/2 (order {order:.2})"))
}

fn identities(out: &mut Vec<Verdict>) -> Res<()> {
    let p = p08();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<(f64, f64, f64)> = (0..100)
        .map(|_| (rng.random_range(0.5..3.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        .collect();
    let star = ProfileSpec::star(&p, ProfileFrame::SelfSimilar);
    let fs = |t: f64, x: &[f64], v: &[f64]| fundamental_solution(t, x, v, &p).unwrap();

    // f⋆ is g⋆ pushed through the change of variables started at R₀ = 0
    let map0 = SelfSimilarMap::new(&p, 0.0)?;
    let from_g = map0.from_self_similar(|_, x, v| star.value(x, v));
    let fkv = pts.iter().map(|&(t, x, v)| rel(from_g(t, &[x], &[v]), fs(t, &[x], &[v]))).fold(0.0, f64::max);
    // and a fixed point of the mass-preserving scale orbit
    let orbit = scale_orbit(fs, 1.7, &p);
    let orb = pts.iter().map(|&(t, x, v)| rel(orbit(t, &[x], &[v]), fs(t, &[x], &[v]))).fold(0.0, f64::max);

    let map1 = SelfSimilarMap::new(&p, 1.0)?;
    let mut trip: f64 = 0.0;
    for &(t, x, v) in &pts {
        let (q, w) = map1.to_self_similar_point(t, &[x], &[v])?;
        let (b, w2) = map1.from_self_similar_point(q.time, &q.x, &q.v);
        trip = trip.max(rel(b.time, t)).max((b.x[0] - x).abs() / (1.0 + x.abs()));
        trip = trip.max((b.v[0] - v).abs() / (1.0 + v.abs())).max((w * w2 - 1.0).abs());
    }

    // mass law: profile mass from the closed-form integral, and the orbit
    // f_M carries M times the mass of f on the image grid
    let mut law: f64 = 0.0;
    for mass in [0.1, 0.5, 2.0, 7.0] {
        let got = nlkfp::params::profile_power_integral(&p, gamma_for_mass(&p, mass), 1.0)?;
        law = law.max(rel(got, mass));
        let fm = mass_rescale(fs, mass, &p);
        let (n, l, t) = (200, 6.0, 1.3);
        let (sx, sv) = (mass.powf(p.zeta), mass.powf(-p.zeta));
        let h = 2.0 * l / n as f64;
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let (x, v) = (-l + (i as f64 + 0.5) * h, -l + (j as f64 + 0.5) * h);
                lhs += fm(t, &[x], &[v]) * h * h;
                rhs += fs(mass.powf(2.0 * p.zeta) * t, &[sx * x], &[sv * v]) * (sx * h) * (sv * h);
            }
        }
        law = law.max(rel(lhs, mass * rhs));
    }

    let (x0, v0) = (0.7, -0.4);
    let tr = |t: f64, x: f64, v: f64| translated_solution(t, &[x], &[v], &[x0], &[v0], &p).unwrap();
    let (ok_pde, s_pde) = stencil_check(|h| kinetic_residual(&tr, p.m, &pts, h), 1e-3, 1e-4);
    let pr = |t: f64, x: f64, v: f64| pressure_star(t, &[x], &[v], &p).unwrap();
    let (ok_p, s_p) = stencil_check(|h| pressure_residual(&pr, p.m, &pts, h), 1e-3, 1e-4);

    let alg = fkv.max(orb).max(trip).max(law);
    out.push(verdict(
        "exact identities",
        alg <= 1e-12 && ok_pde && ok_p,
        format!(
            "self-similarity {fkv:.1e}, scale orbit {orb:.1e}, round trip {trip:.1e}, mass law {law:.1e} (tol 1e-12); translated PDE residual {s_pde}; pressure residual {s_p} (tol 1e-4)"
        ),
    ));
    Ok(())
}

fn mass_drift(t: &Trajectory) -> f64 {
    let m0 = t.snapshots[0].field.mass();
    t.snapshots.iter().map(|s| (s.field.mass() - m0).abs()).fold(0.0, f64::max)
}

fn stationarity(p: &ModelParams, n: usize, l: f64, scheme: TransportScheme) -> Res<(f64, f64)> {
    let grid = square_grid(p, n, l)?;
    let mut cfg = SolverConfig::new(p, grid.clone());
    cfg.transport = scheme;
    cfg.diagnostics = false;
    cfg.snapshot_dt = 1.0;
    let star = sample_profile(p, &grid, p.gamma_star)?;
    let t = evolve(&star, &cfg, "g*")?;
    Ok((t.last().field.l1_distance(&star), mass_drift(&t)))
}

fn solver_suite(out: &mut Vec<Verdict>) -> Res<()> {
    let start = Instant::now();
    let p = p08();
    let l = rotating_extent(&p, gamma_for_mass(&p, 2.0), 1e-12);
    let grid = square_grid(&p, 128, l)?;

    let (stat, drift_star) = stationarity(&p, 128, l, TransportScheme::WellBalanced)?;
    let (s128, _) = stationarity(&p, 128, l, TransportScheme::Spectral)?;
    let (s256, _) = stationarity(&p, 256, l, TransportScheme::Spectral)?;

    // six sandwiched data give five random pairs; the sandwich bounds give nested ones
    let sandwich = Sandwich::new(&p, &grid)?;
    let mut data: Vec<Field> = (1..=6)
        .map(|s| sandwich.unit_mass_datum(&sandwich.random_shape(s), 0.6))
        .collect::<Result<_, _>>()?;
    data.push(sandwich.low.clone());
    data.push(sandwich.high.clone());
    let labels: Vec<String> = (0..data.len()).map(|i| format!("member {i}")).collect();
    let mut cfg = SolverConfig::new(&p, grid.clone());
    cfg.floor = FloorSpec::Profile(sandwich.gamma_low);
    cfg.snapshot_dt = 0.25;
    cfg.diagnostics = false;
    let ens = evolve_ensemble(&data, &labels, &cfg)?;

    let mut contraction: f64 = f64::NEG_INFINITY;
    for k in 0..5 {
        for pair in [(k, k + 1), (k + 1, k)] {
            let c = check_contraction(&ens[pair.0], &ens[pair.1]);
            let times = ens[0].times();
            for i in 1..c.len() {
                contraction = contraction.max((c[i] - c[i - 1]) / (times[i] - times[i - 1]));
            }
        }
    }
    let mut comparison: f64 = f64::NEG_INFINITY;
    for k in 0..6 {
        for (lo, hi) in [(6, k), (k, 7)] {
            comparison = comparison.max(comparison_violation(&ens[lo], &ens[hi]).into_iter().fold(f64::NEG_INFINITY, f64::max));
        }
    }
    let drift = ens.iter().map(mass_drift).fold(drift_star, f64::max);

    // entropy after every splitting period on one member
    let mut ecfg = cfg.clone();
    ecfg.diagnostics = true;
    ecfg.snapshot_dt = 1.0 / (cfg.n as f64 * p.a.sqrt());
    let et = evolve(&data[0], &ecfg, "seed 1")?;
    let ent: Vec<f64> = et.reports().iter().map(|r| r.entropy).collect();
    let rise = ent.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let drift = drift.max(mass_drift(&et));

    let secs = start.elapsed().as_secs_f64();
    let checks = [
        drift <= 1e-10,
        stat <= 5e-3,
        s256 <= 0.5 * s128,
        rise <= 1e-3 * ent[0],
        contraction <= 1e-6,
        comparison <= 1e-12,
        secs <= 900.0,
    ];
    out.push(verdict(
        "solver properties",
        checks.iter().all(|&c| c),
        format!(
            "mass drift {drift:.1e} (tol 1e-10); stationarity {stat:.2e} (tol 5e-3); spectral transport {s128:.2e} at 128^2 -> {s256:.2e} at 256^2 (needs halving); \
             max entropy rise per step {rise:.1e} vs 1e-3 E(0) = {:.1e} over {} steps; contraction growth {contraction:.1e}/unit time (tol 1e-6); \
             comparison violation {comparison:.1e} (tol 1e-12); {secs:.0} s (limit 900)",
            1e-3 * ent[0],
            ent.len() - 1
        ),
    ));
    Ok(())
}

fn convergence_and_inequalities(out: &mut Vec<Verdict>) -> Res<()> {
    let p = p08();
    let start = Instant::now();
    let report = converge_experiment(&ConvergeConfig::new(&p))?;
    let secs = start.elapsed().as_secs_f64();
    let t_end = report.rows.iter().map(|r| r.time).fold(0.0, f64::max);

    let mut ok = true;
    let mut parts = Vec::new();
    let mut products = Vec::new();
    for s in &report.members {
        let rows = report.series(s.member);
        let ratio = s.l1_final / s.l1_initial;
        // monotone once the first unit of time has passed
        let late: Vec<f64> = rows.iter().filter(|r| r.time >= 1.0).map(|r| r.l1_to_gstar).collect();
        let bumps = late.windows(2).filter(|w| w[1] > w[0]).count();
        let last: Vec<(f64, f64)> = rows.iter().filter(|r| r.time >= 0.5 * t_end).map(|r| (r.time, r.weighted_lp)).collect();
        let trend = slope(&last);
        ok &= ratio < 0.25 && bumps == 0 && trend <= 0.0;
        parts.push(format!(
            "seed {}: L1 {:.3e} -> {:.3e} (ratio {ratio:.3}), increases after t=1: {bumps}, weighted L2 slope {trend:.2e}",
            s.seed, s.l1_initial, s.l1_final
        ));
        products.push(rows.iter().map(|r| (r.time, r.density_product)).collect::<Vec<_>>());
    }
    out.push(verdict("convergence", ok, format!("{}; {secs:.0} s", parts.join("; "))));

    // inequalities
    let grid = PhaseGrid::new(1, 48, 48, 6.0, 6.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut slack = f64::INFINITY;
    for k in 0..100 {
        let values: Vec<f64> = match k % 3 {
            0 => {
                let e = rng.random_range(1.0..4.0);
                (0..grid.len()).map(|_| rng.random::<f64>().powf(e)).collect()
            }
            1 => {
                let bumps: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(1..6))
                    .map(|_| (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(0.2..2.0), rng.random_range(0.1..3.0)))
                    .collect();
                grid.sample(Exec::default(), |x, v| {
                    bumps.iter().map(|(cx, cv, w, a)| a * (-((x[0] - cx).powi(2) + (v[0] - cv).powi(2)) / (w * w)).exp()).sum()
                })
            }
            _ => {
                let (cx, cv) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                let (wx, wv) = (rng.random_range(0.3..3.0), rng.random_range(0.3..3.0));
                grid.sample(Exec::default(), |x, v| if (x[0] - cx).abs() < wx && (v[0] - cv).abs() < wv { 1.0 } else { 0.0 })
            }
        };
        slack = slack.min(interpolation_slack(&Field::new(grid.clone(), values, Frame::SelfSimilar)?));
    }
    let l = rotating_extent(&p, gamma_for_mass(&p, 2.0), 1e-12);
    let sq = square_grid(&p, 128, l)?;
    slack = slack.min(interpolation_slack(&sample_profile(&p, &sq, p.gamma_star)?));
    let c1 = interpolation_constant(1);

    let sandwich = Sandwich::new(&p, &sq)?;
    let reference = Reference::new(&p, &sq)?;
    let mut jensen = f64::INFINITY;
    for seed in 1..=20 {
        let g = sandwich.unit_mass_datum(&sandwich.random_shape(seed), 0.6)?;
        let (lhs, rhs) = reference.jensen_bound(&g)?;
        jensen = jensen.min(rhs - lhs);
    }

    let p12 = model_params(1, 1.2, false)?;
    let sq12 = square_grid(&p12, 128, rotating_extent(&p12, gamma_for_mass(&p12, 2.0), 1e-12))?;
    let sw12 = Sandwich::new(&p12, &sq12)?;
    let ref12 = Reference::new(&p12, &sq12)?;
    let mut moment = f64::INFINITY;
    for seed in 1..=20 {
        let g = sw12.unit_mass_datum(&sw12.random_shape(seed), 0.6)?;
        let (lhs, rhs) = ref12.moment_bound_m_gt_1(&g)?;
        moment = moment.min(rhs - lhs);
    }

    // bounded density product: no upward trend over the second half
    let mut growth: f64 = f64::NEG_INFINITY;
    let mut bound: f64 = 0.0;
    for series in &products {
        let last: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= 0.5 * t_end).collect();
        let mean = last.iter().map(|x| x.1).sum::<f64>() / last.len() as f64;
        growth = growth.max(slope(&last) / mean);
        bound = bound.max(series.iter().map(|x| x.1).fold(0.0, f64::max));
    }
    out.push(verdict(
        "inequalities",
        (c1 - 3.0).abs() < 1e-12 && slack >= -1e-8 && jensen >= 0.0 && moment >= 0.0 && growth <= 0.0,
        format!(
            "C1 = {c1}; min interpolation slack {slack:.2e} over 100 random fields + g* (tol -1e-8); min Jensen slack {jensen:.3e} on 20 sandwiched fields; \
             min m=1.2 moment slack {moment:.3e} on 20 sandwiched fields; density product max {bound:.4}, relative slope over second half {growth:.2e} (must be <= 0), exponent {:.4}",
            report.density_exponent
        ),
    ));
    Ok(())
}

fn diffusion_limit(out: &mut Vec<Verdict>) -> Res<()> {
    let p = p08();
    let mp = macro_params(&p)?;
    let line = Line::new(400, 40.0)?;
    let rho0 = line.sample(|x| barenblatt(1.0, &[x], &mp).unwrap());
    let traj = pme_solve(&rho0, mp.k, &[1.0], &line, PmeOptions::default())?;
    let exact = line.sample(|x| barenblatt(2.0, &[x], &mp).unwrap());
    let oracle = line.l1_distance(&traj.states[0], &exact);

    let start = Instant::now();
    let report = diffusion_limit_experiment(&[0.4, 0.2, 0.1], &p, &DiffLimitConfig::default())?;
    let secs = start.elapsed().as_secs_f64();
    let rows = report.rows_at(1.0);
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let decreasing = errors.len() == 3 && errors.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = rows.iter().map(|r| format!("e({}) = {:.4e}", r.eps, r.error)).collect();
    out.push(verdict(
        "diffusion limit",
        decreasing && oracle <= 1e-2 && secs <= 1200.0,
        format!(
            "{} at tau = 1 (strictly decreasing: {decreasing}); Barenblatt oracle L1 {oracle:.2e} (tol 1e-2); {secs:.0} s (limit 1200)",
            shown.join(", ")
        ),
    ));
    Ok(())
}

#[test]
fn acceptance() {
    let mut out = Vec::new();
    let stages: [(&str, fn(&mut Vec<Verdict>) -> Res<()>); 6] = [
        ("spectrum", spectrum_checks),
        ("normalization", normalization),
        ("identities", identities),
        ("solver", solver_suite),
        ("convergence", convergence_and_inequalities),
        ("diffusion limit", diffusion_limit),
    ];
    let mut errors = Vec::new();
    for (name, stage) in stages {
        if let Err(e) = stage(&mut out) {
            println!("FAIL {name}: error {e}");
            errors.push(name);
        }
    }
    let failed: Vec<&str> = out.iter().filter(|v| !v.pass).map(|v| v.name).chain(errors).collect();
    println!("{} criteria passed, failed: {failed:?}", out.iter().filter(|v| v.pass).count());
    assert!(failed.is_empty(), "failed: {failed:?}");
}
