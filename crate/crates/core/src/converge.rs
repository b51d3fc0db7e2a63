//! Convergence experiment: sandwiched data evolved in lockstep, with the
//! distance to `g⋆`, the entropy and its production, the weighted `L^p`
//! distance to `f⋆` and the rescaled density norm at every snapshot.

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::params::ModelParams;
use crate::profiles::gamma_for_mass;
use crate::solver::{
    entropy_decay_rate, evolve_ensemble, f_view, rotating_extent, square_grid, Flavor, FloorSpec, Sandwich,
    SolverConfig,
};

#[derive(Debug, Clone)]
pub struct ConvergeConfig {
    pub p: ModelParams,
    /// Cells per phase-space axis.
    pub n_grid: usize,
    /// Rotating-frame half-width; `None` picks the extent where `g_{γ₂}` drops to 1e−12 of its peak.
    pub half_width: Option<f64>,
    pub n: usize,
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub flavor: Flavor,
    pub seeds: Vec<u64>,
    /// Size of the random perturbation of the sandwich weight.
    pub amplitude: f64,
    /// Exponent of the weighted distance to `f⋆`.
    pub lp: f64,
    pub exec: Exec,
}

impl ConvergeConfig {
    pub fn new(p: &ModelParams) -> Self {
        Self {
            p: p.clone(),
            n_grid: 128,
            half_width: None,
            n: 64,
            t_end: 10.0,
            snapshot_dt: 0.5,
            flavor: Flavor::Lie,
            seeds: vec![1, 2, 3],
            amplitude: 0.6,
            lp: 2.0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeRow {
    pub member: usize,
    /// Self-similar time.
    pub time: f64,
    /// Original time of the `f`-frame solution.
    pub t_f: f64,
    pub mass: f64,
    pub l1_to_gstar: f64,
    /// `∫∫ (|x|² + |v|²) |g − g⋆|`.
    pub moment_to_gstar: f64,
    pub entropy: f64,
    pub production: f64,
    pub weighted_lp: f64,
    /// `‖ρ_f‖_{1+2/d} (1 + (1−A)t)^{θ}`.
    pub density_product: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberSummary {
    pub member: usize,
    pub seed: u64,
    pub l1_initial: f64,
    pub l1_final: f64,
    /// Fitted `−d ln 𝓔/dt` over the second half of the run.
    pub entropy_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeReport {
    pub density_exponent: f64,
    /// `min{A, 1 − A}`, reported next to the fitted rates.
    pub rate_reference: f64,
    pub rows: Vec<ConvergeRow>,
    pub members: Vec<MemberSummary>,
}

impl ConvergeReport {
    pub fn series(&self, member: usize) -> Vec<&ConvergeRow> {
        self.rows.iter().filter(|r| r.member == member).collect()
    }
}

/// `(3 − d + dm)/((d + 2)(m − m₁))`.
pub fn density_decay_exponent(p: &ModelParams) -> f64 {
    let d = p.d as f64;
    (3.0 - d + d * p.m) / ((d + 2.0) * (p.m - p.m1))
}

pub fn converge_experiment(cfg: &ConvergeConfig) -> Result<ConvergeReport> {
    let p = &cfg.p;
    if cfg.seeds.is_empty() {
        return Err(Error::Value("at least one seed is needed".into()));
    }
    if !(cfg.amplitude >= 0.0) {
        return Err(Error::Value(format!("amplitude {} must be nonnegative", cfg.amplitude)));
    }
    let gamma_high = gamma_for_mass(p, 2.0);
    let l = cfg.half_width.unwrap_or_else(|| rotating_extent(p, gamma_high, 1e-12));
    let grid = square_grid(p, cfg.n_grid, l)?;
    let sandwich = Sandwich::new(p, &grid)?;
    let data = cfg
        .seeds
        .iter()
        .map(|&s| sandwich.unit_mass_datum(&sandwich.random_shape(s), cfg.amplitude))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = cfg.seeds.iter().map(|s| format!("sandwich seed {s}")).collect();
    let mut sc = SolverConfig::new(p, grid);
    sc.n = cfg.n;
    sc.t_end = cfg.t_end;
    sc.snapshot_dt = cfg.snapshot_dt;
    sc.flavor = cfg.flavor;
    sc.exec = cfg.exec;
    if p.m < 1.0 {
        sc.floor = FloorSpec::Profile(sandwich.gamma_low);
    }
    let trajectories = evolve_ensemble(&data, &labels, &sc)?;

    let theta = density_decay_exponent(p);
    let mut rows = Vec::new();
    let mut members = Vec::new();
    for (member, traj) in trajectories.into_iter().enumerate() {
        let rate = entropy_decay_rate(&traj, 0.5 * cfg.t_end);
        let reports: Vec<_> = traj.reports().into_iter().cloned().collect();
        let fv = f_view(traj, 1.0, cfg.lp)?;
        for (r, fs) in reports.iter().zip(&fv.snapshots) {
            rows.push(ConvergeRow {
                member,
                time: r.time,
                t_f: fs.time,
                mass: r.mass,
                l1_to_gstar: r.l1_to_gstar,
                moment_to_gstar: r.moment_to_gstar,
                entropy: r.entropy,
                production: r.production,
                weighted_lp: fs.weighted_lp,
                density_product: fs.density_norm * (1.0 + (1.0 - p.a) * fs.time).powf(theta),
            });
        }
        members.push(MemberSummary {
            member,
            seed: cfg.seeds[member],
            l1_initial: reports.first().map_or(f64::NAN, |r| r.l1_to_gstar),
            l1_final: reports.last().map_or(f64::NAN, |r| r.l1_to_gstar),
            entropy_rate: rate,
        });
    }
    Ok(ConvergeReport {
        density_exponent: theta,
        rate_reference: p.a.min(1.0 - p.a),
        rows,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::model_params;

    #[test]
    fn density_exponent_at_four_fifths() {
        let p = model_params(1, 0.8, false).unwrap();
        assert!((density_decay_exponent(&p) - 7.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn short_run_moves_toward_the_profile() {
        let p = model_params(1, 0.8, true).unwrap();
        let mut cfg = ConvergeConfig::new(&p);
        cfg.n_grid = 48;
        cfg.t_end = 1.0;
        cfg.n = 16;
        cfg.seeds = vec![7];
        let rep = converge_experiment(&cfg).unwrap();
        assert_eq!(rep.members.len(), 1);
        let s = &rep.members[0];
        assert!(s.l1_final < s.l1_initial, "{s:?}");
        let rows = rep.series(0);
        assert_eq!(rows.len(), 3);
        // corner cells rotating out of the square carry O(1e−9) at this resolution
        assert!(rows.iter().all(|r| (r.mass - 1.0).abs() < 1e-8));
        assert!(rows[0].t_f.abs() < 1e-12);
    }
}
