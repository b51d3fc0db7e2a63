//! The subcommands. Each reads its resolved settings, writes CSV files into
//! the output directory and returns constants worth echoing in the manifest.

use std::path::Path;

use anyhow::Context;
use nlkfp::converge::{converge_experiment, ConvergeConfig};
use nlkfp::difflimit::{diffusion_limit_experiment, macro_params, DiffLimitConfig};
use nlkfp::fields::{Field, Frame, PhaseGrid, REPORT_HEADER};
use nlkfp::profiles::{
    barenblatt_shape, fundamental_solution, gamma_for_mass, half_mass_ellipse, translated_solution, ProfileFrame, ProfileSpec,
};
use nlkfp::solver::{
    evolve, rotating_extent, sample_profile, Flavor, FloorSpec, Sandwich, SolverConfig, TransportScheme,
};
use nlkfp::spectrum::{assemble, eigensolve, Backend, Domain, EigenOptions, Stencil};
use nlkfp::{model_params, Exec, ModelParams};

use crate::output::{num, OutDir};
use crate::settings::{invalid, Settings};

pub type Constants = Vec<(String, String)>;

/// Reference values of the leading eigenvalue on the rectangle and on the ellipse.
const RECTANGLE_REFERENCE: f64 = -0.4152;
const ELLIPSE_REFERENCE: f64 = -0.4272;

fn exec(st: &Settings) -> anyhow::Result<Exec> {
    match st.raw("exec") {
        "parallel" => Ok(Exec::Parallel),
        "sequential" => Ok(Exec::Sequential),
        other => Err(invalid(format!("exec = '{other}': expected parallel or sequential"))),
    }
}

fn params(st: &Settings, strict: bool) -> anyhow::Result<ModelParams> {
    Ok(model_params(st.get("d")?, st.get("m")?, strict)?)
}

fn flavor(st: &Settings) -> anyhow::Result<Flavor> {
    match st.raw("flavor") {
        "lie" => Ok(Flavor::Lie),
        "strang" => Ok(Flavor::Strang),
        other => Err(invalid(format!("flavor = '{other}': expected lie or strang"))),
    }
}

/// Rotating-frame half-width where `g_{γ₂}` has dropped to 1e−12 of its peak.
fn auto_extent(p: &ModelParams) -> f64 {
    rotating_extent(p, gamma_for_mass(p, 2.0), 1e-12)
}

fn check_d1(p: &ModelParams, what: &str) -> anyhow::Result<()> {
    if p.d != 1 {
        return Err(invalid(format!("{what} is implemented for d = 1")));
    }
    Ok(())
}

pub fn params_cmd(st: &Settings, out: &mut OutDir) -> anyhow::Result<Constants> {
    let p = params(st, st.flag("strict")?)?;
    let mut rows: Vec<(String, String)> = vec![
        ("d".into(), p.d.to_string()),
        ("m".into(), num(p.m)),
        ("A".into(), num(p.a)),
        ("m1".into(), num(p.m1)),
        ("m2".into(), num(p.m2)),
        ("m3".into(), num(p.m3)),
        ("m_tilde1".into(), num(p.m_tilde1)),
        ("m_c".into(), num(p.m_c)),
        ("zeta".into(), num(p.zeta)),
        ("alpha".into(), num(p.alpha)),
        ("k".into(), num(p.k)),
        ("gamma_star".into(), num(p.gamma_star)),
        ("z_m".into(), p.z_m.map_or("divergent".into(), num)),
        ("strict_theorem_range".into(), p.strict_theorem_range.to_string()),
    ];
    if let Ok(mp) = macro_params(&p) {
        rows.extend([
            ("eta".into(), num(mp.eta)),
            ("beta".into(), num(mp.beta)),
            ("c_star".into(), num(mp.c_star)),
            ("mu1".into(), num(mp.mu1)),
            ("nu1".into(), num(mp.nu1)),
        ]);
    }
    for (k, v) in &rows {
        println!("{k}={v}");
    }
    out.csv("params.csv", &["name", "value"], rows.iter().map(|(k, v)| vec![k.clone(), v.clone()]))?;
    Ok(rows)
}

pub fn profile_cmd(st: &Settings, out: &mut OutDir) -> anyhow::Result<Constants> {
    let p = params(st, false)?;
    check_d1(&p, "profile sampling")?;
    let (nx, nv) = st.pair::<usize>("grid")?;
    let (lx, lv) = st.pair::<f64>("extent")?;
    let grid = PhaseGrid::new(1, nx, nv, lx, lv)?;
    let t: f64 = st.get("t")?;
    let (x0, v0): (f64, f64) = (st.get("x0")?, st.get("v0")?);
    let kind = st.raw("kind").to_string();
    let star = ProfileSpec::star(&p, ProfileFrame::SelfSimilar);
    let value = |x: f64, v: f64| -> nlkfp::Result<f64> {
        match kind.as_str() {
            "fstar" => fundamental_solution(t, &[x], &[v], &p),
            "translated" => translated_solution(t, &[x], &[v], &[x0], &[v0], &p),
            _ => Ok(star.value(&[x], &[v])),
        }
    };
    if !matches!(kind.as_str(), "fstar" | "gstar" | "translated") {
        return Err(invalid(format!("kind = '{kind}': expected fstar, gstar or translated")));
    }
    let mut rows = Vec::with_capacity(nx * nv);
    for i in 0..nx {
        for j in 0..nv {
            let (x, v) = (grid.x_node(i), grid.v_node(j));
            rows.push(vec![num(t), num(x), num(v), num(value(x, v)?)]);
        }
    }
    out.csv("profile.csv", &["t", "x", "v", "value"], rows)?;
    println!("{kind}: {nx} x {nv} samples on [-{lx},{lx}] x [-{lv},{lv}]");
    Ok(vec![("gamma_star".into(), num(p.gamma_star))])
}

pub fn fig1_cmd(st: &Settings, out: &mut OutDir) -> anyhow::Result<Constants> {
    let ms: Vec<f64> = st.list("m_list")?;
    let (t0, dt, nt): (f64, f64, usize) = (st.get("t_start")?, st.get("t_step")?, st.get("t_count")?);
    let npts: usize = st.get("points")?;
    let (r_max, nr): (f64, usize) = (st.get("r_max")?, st.get("r_points")?);
    if nr < 2 || npts < 3 {
        return Err(invalid("need at least 3 ellipse points and 2 profile points"));
    }
    let (mut pts, mut pars, mut curve) = (Vec::new(), Vec::new(), Vec::new());
    for &m in &ms {
        let p = model_params(1, m, false)?;
        for i in 0..nt {
            let t = t0 + i as f64 * dt;
            let e = half_mass_ellipse(t, &p)?;
            pars.push(vec![
                num(m),
                num(t),
                num(e.level),
                num(e.radius),
                num(e.center.0),
                num(e.center.1),
                num(e.semi_major),
                num(e.semi_minor),
                num(e.rotation),
            ]);
            for (k, (x, v)) in e.points(npts).into_iter().enumerate() {
                pts.push(vec![num(m), num(t), k.to_string(), num(x), num(v)]);
            }
        }
        for j in 0..nr {
            let r = r_max * j as f64 / (nr - 1) as f64;
            curve.push(vec![num(m), num(r), num(barenblatt_shape(m, r))]);
        }
    }
    out.csv("fig1_ellipses.csv", &["m", "t", "k", "x", "v"], pts)?;
    out.csv(
        "fig1_ellipse_params.csv",
        &["m", "t", "level", "radius", "center_x", "center_v", "semi_major", "semi_minor", "rotation"],
        pars,
    )?;
    out.csv("fig1_barenblatt.csv", &["m", "r", "value"], curve)?;
    println!("{} ellipses for m in {:?}", ms.len() * nt, ms);
    Ok(Vec::new())
}

fn dump_field(out: &mut OutDir, name: &str, f: &Field) -> anyhow::Result<()> {
    let g = &f.grid;
    let (mut xc, mut vc) = (vec![0.0; g.d], vec![0.0; g.d]);
    let mut rows = Vec::with_capacity(f.values.len());
    let nb = g.v_cells();
    for ix in 0..g.x_cells() {
        g.x_center(ix, &mut xc);
        for iv in 0..nb {
            g.v_center(iv, &mut vc);
            let mut r: Vec<String> = xc.iter().chain(&vc).map(|c| num(*c)).collect();
            r.push(num(f.values[ix * nb + iv]));
            rows.push(r);
        }
    }
    let header: &[&str] = if g.d == 1 {
        &["x", "v", "value"]
    } else {
        &["x1", "x2", "v1", "v2", "value"]
    };
    out.csv(name, header, rows)
}

fn read_field(path: &Path, grid: &PhaseGrid) -> anyhow::Result<Field> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let col = r
        .headers()?
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| invalid(format!("{}: no 'value' column", path.display())))?;
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: f64 = rec[col].parse().map_err(|_| invalid(format!("{}: bad value '{}'", path.display(), &rec[col])))?;
        values.push(v);
    }
    if values.len() != grid.len() || values.iter().any(|v| !(*v >= 0.0)) {
        return Err(invalid(format!(
            "{}: expected {} nonnegative values, got {}",
            path.display(),
            grid.len(),
            values.len()
        )));
    }
    Ok(Field::new(grid.clone(), values, Frame::SelfSimilar)?)
}

fn solver_grid(st: &Settings, p: &ModelParams) -> anyhow::Result<PhaseGrid> {
    let (nx, nv) = st.pair::<usize>("grid")?;
    let (lx, lv) = if st.raw("extent") == "auto" {
        let l = auto_extent(p);
        let q = p.a.powf(0.25);
        (l / q, l * q)
    } else {
        st.pair::<f64>("extent")?
    };
    Ok(PhaseGrid::new(p.d, nx, nv, lx, lv)?)
}

pub fn evolve_cmd(st: &Settings, out: &mut OutDir) -> anyhow::Result<Constants> {
    let p = params(st, st.flag("strict")?)?;
    let grid = solver_grid(st, &p)?;
    let mut cfg = SolverConfig::new(&p, grid.clone());
    cfg.n = st.get("n")?;
    cfg.t_end = st.get("T")?;
    cfg.snapshot_dt = st.get("snapshot_dt")?;
    cfg.cfl = st.get("cfl")?;
    cfg.flavor = flavor(st)?;
    cfg.exec = exec(st)?;
    cfg.transport = TransportScheme::from_name(st.raw("transport"))
        .ok_or_else(|| invalid(format!("transport = '{}'", st.raw("transport"))))?;
    let init = st.raw("init").to_string();
    let g0 = if init == "gstar" {
        sample_profile(&p, &grid, p.gamma_star)?
    } else if init == "sandwich" {
        let s = Sandwich::new(&p, &grid)?;
        if p.m < 1.0 {
            cfg.floor = FloorSpec::Profile(s.gamma_low);
        }
        s.unit_mass_datum(&s.random_shape(st.get("seed")?), st.get("amplitude")?)?
    } else if let Some(g) = init.strip_prefix("gamma:") {
        let gamma: f64 = g.parse().map_err(|_| invalid(format!("init = '{init}'")))?;
        sample_profile(&p, &grid, gamma)?
    } else if let Some(path) = init.strip_prefix("file:") {
        read_field(Path::new(path), &grid)?
    } else {
        return Err(invalid(format!("init = '{init}': expected gstar, sandwich, gamma:<value> or file:<path>")));
    };
    cfg.validate()?;
    let traj = evolve(&g0, &cfg, &init)?;
    let header: Vec<&str> = REPORT_HEADER.split(',').collect();
    out.csv(
        "diagnostics.csv",
        &header,
        traj.reports().iter().map(|r| r.values().iter().map(|x| num(*x)).collect()),
    )?;
    match st.raw("dumps") {
        "none" => {}
        "ends" => {
            dump_field(out, "field_initial.csv", &traj.snapshots[0].field)?;
            dump_field(out, "field_final.csv", &traj.last().field)?;
        }
        "all" => {
            for (k, s) in traj.snapshots.iter().enumerate() {
                dump_field(out, &format!("snapshots/g_{k:04}.csv"), &s.field)?;
            }
        }
        other => return Err(invalid(format!("dumps = '{other}': expected none, ends or all"))),
    }
    let last = traj.last().report.as_ref().expect("diagnostics enabled");
    println!(
        "t = {}: mass {}, |g - g*|_1 = {:.3e}, entropy {:.3e}",
        last.time, last.mass, last.l1_to_gstar, last.entropy
    );
    Ok(vec![
        ("lx".into(), num(grid.lx)),
        ("lv".into(), num(grid.lv)),
        ("clipped_mass".into(), num(traj.clipped_mass)),
        ("max_substeps".into(), traj.max_substeps.to_string()),
    ])
}

pub fn converge_cmd(st: &Settings, out: &mut OutDir) -> anyhow::Result<Constants> {
    let p = params(st, st.flag("strict")?)?;
    let (nx, nv) = st.pair::<usize>("grid")?;
    if nx != nv {
        return Err(invalid("converge uses square grids: set grid = N,N"));
    }
    let mut cfg = ConvergeConfig::new(&p);
    cfg.n_grid = nx;
    cfg.half_width = match st.raw("extent") {
        "auto" => None,
        _ => Some(st.get("extent")?),
    };
    cfg.n = st.get("n")?;
    cfg.t_end = st.get("T")?;
    cfg.snapshot_dt = st.get("snapshot_dt")?;
    cfg.flavor = flavor(st)?;
    cfg.amplitude = st.get("amplitude")?;
    cfg.lp = st.get("lp")?;
    cfg.exec = exec(st)?;
    let (seed, members): (u64, u64) = (st.get("seed")?, st.get("members")?);
    cfg.seeds = (seed..seed + members).collect();
    let rep = converge_experiment(&cfg)?;
    out.csv(
        "converge.csv",
        &[
            "member",
            "time",
            "t_f",
            "mass",
            "l1_gstar",
            "moment_gstar",
            "entropy",
            "production",
            "weighted_lp",
            "density_product",
        ],
        rep.rows.iter().map(|r| {
            vec![
                r.member.to_string(),
                num(r.time),
                num(r.t_f),
                num(r.mass),
                num(r.l1_to_gstar),
                num(r.moment_to_gstar),
                num(r.entropy),
                num(r.production),
                num(r.weighted_lp),
                num(r.density_product),
            ]
        }),
    )?;
    out.csv(
        "converge_summary.csv",
        &["member", "seed", "l1_initial", "l1_final", "ratio", "entropy_rate", "rate_reference"],
        rep.members.iter().map(|s| {
            vec![
                s.member.to_string(),
                s.seed.to_string(),
                num(s.l1_initial),
                num(s.l1_final),
                num(s.l1_final / s.l1_initial),
                s.entropy_rate.map_or("NaN".into(), num),
                num(rep.rate_reference),
            ]
        }),
    )?;
    for s in &rep.members {
        println!(
            "seed {}: |g - g*|_1 {:.3e} -> {:.3e}; entropy rate {} (min(A, 1-A) = {:.4})",
            s.seed,
            s.l1_initial,
            s.l1_final,
            s.entropy_rate.map_or("n/a".into(), |r| format!("{r:.4}")),
            rep.rate_reference
        );
    }
    Ok(vec![("density_exponent".into(), num(rep.density_exponent))])
}

pub fn spectrum_cmd(st: &Settings, out: &mut OutDir) -> anyhow::Result<Constants> {
    let p = params(st, false)?;
    let (nx, nv) = st.pair::<usize>("grid")?;
    let (lx, lv) = st.pair::<f64>("extent")?;
    let (domain, default_ref) = match st.raw("domain") {
        "rectangle" => (Domain::Rectangle { lx, lv }, RECTANGLE_REFERENCE),
        "ellipse" => (Domain::equal_area_ellipse(lx, lv), ELLIPSE_REFERENCE),
        other => return Err(invalid(format!("domain = '{other}': expected rectangle or ellipse"))),
    };
    let reference = match st.raw("reference") {
        "auto" => default_ref,
        _ => st.get("reference")?,
    };
    let stencil = match st.raw("stencil") {
        "centered" => Stencil::default(),
        "upwind" => Stencil {
            upwind: true,
            ..Stencil::default()
        },
        other => return Err(invalid(format!("stencil = '{other}': expected centered or upwind"))),
    };
    let ex = exec(st)?;
    let mut opts = EigenOptions::new(st.get("count")?);
    opts.backend =
        Backend::from_name(st.raw("backend")).ok_or_else(|| invalid(format!("backend = '{}'", st.raw("backend"))))?;
    opts.window = st.get("window")?;
    opts.exec = ex;
    let asm = assemble(&p, domain, nx, nv, stencil, ex)?;
    let res = eigensolve(&asm, &opts)?;
    out.csv(
        "spectrum.csv",
        &["index", "re", "im", "residual", "interior", "parity"],
        res.eigenvalues.iter().enumerate().map(|(i, z)| {
            vec![
                i.to_string(),
                num(z.re),
                num(z.im),
                num(res.residuals[i]),
                num(res.interior[i]),
                res.parities[i].name().to_string(),
            ]
        }),
    )?;
    let mut summary = Vec::new();
    let mut line = |label: &str, target: f64, z: Option<num_complex::Complex64>, residual: f64| {
        let (re, im) = z.map_or((f64::NAN, f64::NAN), |z| (z.re, z.im));
        let dist = z.map_or(f64::NAN, |z| (z - target).norm());
        println!("{label}: {re:.6} {im:+.2e}i  (target {target}, distance {dist:.2e})");
        summary.push(vec![label.to_string(), num(target), num(re), num(im), num(dist), num(residual)]);
    };
    for c in &res.analytic {
        line(c.label, c.lambda, c.nearest, c.residual);
    }
    line("leading_interior", reference, res.leading_interior(), f64::NAN);
    line("leading_nonzero", reference, res.leading_nonzero(), f64::NAN);
    out.csv("spectrum_summary.csv", &["label", "target", "re", "im", "distance", "residual"], summary)?;
    println!(
        "{} cells, backend {}, max Re {:.2e}, max residual {:.2e}",
        res.active,
        res.backend.name(),
        res.max_real(),
        res.max_residual()
    );
    Ok(vec![
        ("A".into(), num(p.a)),
        ("active_cells".into(), res.active.to_string()),
        ("backend_used".into(), res.backend.name().into()),
        ("shift_used".into(), num(res.shift)),
        ("reference".into(), num(reference)),
    ])
}

pub fn difflimit_cmd(st: &Settings, out: &mut OutDir) -> anyhow::Result<Constants> {
    let p = params(st, false)?;
    check_d1(&p, "the diffusion-limit experiment")?;
    let mp = macro_params(&p)?;
    let (nx, nv) = st.pair::<usize>("grid")?;
    let (lx, lv) = st.pair::<f64>("extent")?;
    let cfg = DiffLimitConfig {
        tau0: st.get("tau0")?,
        taus: st.list("taus")?,
        nx,
        lx,
        nv,
        lv,
        step_fraction: st.get("step_fraction")?,
        cfl: st.get("cfl")?,
        max_substeps: 100_000,
        exec: exec(st)?,
    };
    let eps: Vec<f64> = st.list("eps_list")?;
    let rep = diffusion_limit_experiment(&eps, &p, &cfg)?;
    out.csv(
        "difflimit.csv",
        &["eps", "tau", "e", "e_projected", "equilibrium_gap", "mass_drift"],
        rep.rows.iter().map(|r| {
            vec![
                num(r.eps),
                num(r.tau),
                num(r.error),
                num(r.projected_error),
                num(r.equilibrium_gap),
                num(r.mass_drift),
            ]
        }),
    )?;
    for r in &rep.rows {
        println!("eps {} tau {}: e = {:.4e}", r.eps, r.tau, r.error);
    }
    Ok(vec![
        ("alpha".into(), num(mp.alpha)),
        ("eta".into(), num(mp.eta)),
        ("k".into(), num(mp.k)),
        ("beta".into(), num(mp.beta)),
        ("c_star".into(), num(mp.c_star)),
        ("mu1".into(), num(mp.mu1)),
        ("nu1".into(), num(mp.nu1)),
    ])
}
