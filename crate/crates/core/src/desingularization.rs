//! Point charges as limits of small plasma blobs.
//!
//! Each charge is replaced by a blob of unit weight filling the phase-space ball
//! product `B(xi, eps) x B(eta, eps)`. The blobs evolve as a plasma whose pair
//! kernel is `G_#^sigma` (every pair, including the diagonal), with the charge
//! boundary density `h_cha` as wall data. Their barycenters are compared with
//! the point-charge ODE.

use crate::boundary::{BoundaryDensity, BoundaryPotential};
use crate::charges::{ChargeModel, ChargeState};
use crate::greens::{CutoffProfile, GreenEvaluator};
use crate::plasma::{halton4, BoundaryRule, Interaction, ParticleEnsemble, PlasmaField};
use crate::system::CoupledModel;
use crate::{Error, Point, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

/// Largest admissible cutoff as a fraction of `delta_2 / 8`.
pub const SIGMA_CLAMP: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub epsilon: f64,
    /// `(xi, eta)` per blob.
    pub centers: Vec<(Point, Point)>,
    pub particles_per_blob: usize,
}

/// `sigma = (C T / |ln eps|)^(1/3)`.
pub fn cutoff_schedule(epsilon: f64, c_cut: f64, t_end: f64) -> f64 {
    (c_cut * t_end / epsilon.ln().abs()).cbrt()
}

/// Images of an offset under the symmetry group of the square.
fn dihedral(p: &Point) -> [Point; 8] {
    let (x, y) = (p.x, p.y);
    [
        Point::new(x, y),
        Point::new(-y, x),
        Point::new(-x, -y),
        Point::new(y, -x),
        Point::new(x, -y),
        Point::new(y, x),
        Point::new(-x, y),
        Point::new(-y, -x),
    ]
}

/// Uniform low-discrepancy fill of each blob. Every base sample `(dx, dv)` is
/// replaced by its 8 images under the square's symmetry group (applied to
/// both offsets at once), so every fresh blob has barycenter exactly at its
/// center and isotropic second moments.
pub fn make_blobs(spec: &BlobSpec, domain: &crate::geometry::ConvexDomain) -> Result<ParticleEnsemble> {
    let eps = spec.epsilon;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("blob radius must be positive".into()));
    }
    let nb = spec.particles_per_blob;
    if nb < 8 || nb % 8 != 0 {
        return Err(Error::InvalidArgument("particles_per_blob must be a positive multiple of 8".into()));
    }
    for (a, (xi, _)) in spec.centers.iter().enumerate() {
        let d = -domain.signed_distance(xi);
        if d < 3.0 * eps {
            return Err(Error::InvalidArgument(format!(
                "blob {a} support is closer than 2 eps to the boundary"
            )));
        }
        for (b, (xj, _)) in spec.centers.iter().enumerate().skip(a + 1) {
            if (xi - xj).norm() <= 2.0 * eps {
                return Err(Error::InvalidArgument(format!("blobs {a} and {b} overlap")));
            }
        }
    }
    let w = 1.0 / nb as f64;
    let mut ens = ParticleEnsemble::default();
    for (a, (xi, eta)) in spec.centers.iter().enumerate() {
        for k in 0..nb / 8 {
            let u = halton4(k as u64 + 1);
            let dx = Point::new((TAU * u[1]).cos(), (TAU * u[1]).sin()) * (eps * u[0].sqrt());
            let dv = Point::new((TAU * u[3]).cos(), (TAU * u[3]).sin()) * (eps * u[2].sqrt());
            for (gx, gv) in dihedral(&dx).iter().zip(dihedral(&dv).iter()) {
                ens.positions.push(xi + gx);
                ens.velocities.push(eta + gv);
                ens.weights.push(w);
                ens.alive.push(true);
                ens.tags.push(a);
            }
        }
    }
    Ok(ens)
}

/// Weighted particle means per blob.
pub fn barycenters(ens: &ParticleEnsemble, m: usize) -> (Vec<Point>, Vec<Point>) {
    let mut xs = vec![Point::zeros(); m];
    let mut vs = vec![Point::zeros(); m];
    let mut ws = vec![0.0; m];
    for i in 0..ens.len() {
        let a = ens.tags[i];
        xs[a] += ens.positions[i] * ens.weights[i];
        vs[a] += ens.velocities[i] * ens.weights[i];
        ws[a] += ens.weights[i];
    }
    for a in 0..m {
        if ws[a] > 0.0 {
            xs[a] /= ws[a];
            vs[a] /= ws[a];
        }
    }
    (xs, vs)
}

/// Positions and velocities of `M` charges (or barycenters) at output times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub xi: Vec<Vec<Point>>,
    pub eta: Vec<Vec<Point>>,
    /// First time a blob particle entered the `delta_2 / 2` wall shell.
    pub t_eps_hit: Option<f64>,
    /// Discrete energy at every output time (modified system only).
    pub energy: Vec<f64>,
}

impl Trajectory {
    fn push(&mut self, t: f64, xi: Vec<Point>, eta: Vec<Point>) {
        self.times.push(t);
        self.xi.push(xi);
        self.eta.push(eta);
    }

    pub fn charge_count(&self) -> usize {
        self.xi.first().map_or(0, |v| v.len())
    }

    /// `min_t` of the wall distance and half the pairwise distance of the charges.
    pub fn separation(&self, domain: &crate::geometry::ConvexDomain) -> f64 {
        let mut d = f64::INFINITY;
        for xs in &self.xi {
            for (a, x) in xs.iter().enumerate() {
                d = d.min(-domain.signed_distance(x));
                for y in &xs[a + 1..] {
                    d = d.min((x - y).norm());
                }
            }
        }
        d
    }
}

/// Options for [`run_modified`].
#[derive(Clone, Debug)]
pub struct ModifiedRun {
    pub sigma: f64,
    pub delta2: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Record the discrete energy every this many steps (0 = never).
    pub energy_every: usize,
}

/// Evolve the blobs under the cutoff kernel and record barycenters every step.
pub fn run_modified(
    spec: &BlobSpec,
    evaluator: Arc<GreenEvaluator>,
    h_cha: &BoundaryDensity,
    opts: &ModifiedRun,
) -> Result<Trajectory> {
    if !(opts.sigma < opts.delta2 / 8.0) {
        return Err(Error::InvalidArgument(format!(
            "cutoff scale {} must be below delta_2/8 = {}",
            opts.sigma,
            opts.delta2 / 8.0
        )));
    }
    let domain = evaluator
        .domain()
        .ok_or_else(|| Error::InvalidArgument("bounded domain required".into()))?
        .clone();
    let m = spec.centers.len();
    let boundary = BoundaryPotential::new(&evaluator, h_cha)?;
    let total = h_cha.total(&domain);
    if evaluator.flavor() == crate::greens::Flavor::Neumann && (total - m as f64).abs() > 1e-8 {
        return Err(Error::ChargeCompatibility {
            total,
            expected: m as f64,
        });
    }
    let model = CoupledModel {
        domain: domain.clone(),
        plasma: PlasmaField {
            evaluator: evaluator.clone(),
            boundary,
            interaction: Interaction::Cutoff(CutoffProfile::new(opts.sigma)?),
        },
        charges: ChargeModel::new(evaluator.clone(), &BoundaryDensity::Zero, 0)?,
        rule: BoundaryRule::Reflection,
    };
    let ens = make_blobs(spec, &domain)?;
    let mut state = model.initialize(ens, ChargeState::default())?;
    let mut traj = Trajectory::default();
    let steps = (opts.t_end / opts.dt).round() as usize;
    let shell = 0.5 * opts.delta2;
    for n in 0..=steps {
        if n > 0 {
            model.step(&mut state, opts.dt)?;
        }
        let (xs, vs) = barycenters(&state.plasma, m);
        traj.push(state.t, xs, vs);
        if opts.energy_every > 0 && n % opts.energy_every == 0 {
            traj.energy.push(model.energy(&state)?.total);
        }
        if traj.t_eps_hit.is_none()
            && state
                .plasma
                .positions
                .iter()
                .any(|x| -domain.signed_distance(x) < shell)
        {
            traj.t_eps_hit = Some(state.t);
        }
    }
    Ok(traj)
}

/// Integrate the point-charge ODE and record every step.
pub fn run_reference(
    evaluator: Arc<GreenEvaluator>,
    h_cha: &BoundaryDensity,
    centers: &[(Point, Point)],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let model = ChargeModel::new(evaluator, h_cha, centers.len())?;
    let mut state = ChargeState::new(
        centers.iter().map(|c| c.0).collect(),
        centers.iter().map(|c| c.1).collect(),
    )?;
    let mut f = model.forces(&state)?;
    let mut traj = Trajectory::default();
    let steps = (t_end / dt).round() as usize;
    traj.push(0.0, state.xi.clone(), state.eta.clone());
    for n in 1..=steps {
        let (s, g) = model.step(&state, &f, dt)?;
        state = s;
        f = g;
        traj.push(n as f64 * dt, state.xi.clone(), state.eta.clone());
    }
    Ok(traj)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeviationSeries {
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    /// `|xi_eps - xi|` per time and charge.
    pub dxi: Vec<Vec<f64>>,
    pub deta: Vec<Vec<f64>>,
}

impl DeviationSeries {
    pub fn sup(&self) -> f64 {
        self.p.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// Four-point Lagrange interpolation of a sampled series at `t`.
fn interpolate(times: &[f64], values: &[Vec<Point>], t: f64) -> Vec<Point> {
    let n = times.len();
    if n == 1 {
        return values[0].clone();
    }
    let k = times.partition_point(|s| *s < t).clamp(1, n - 1);
    let lo = k.saturating_sub(2).min(n.saturating_sub(4));
    let hi = (lo + 4).min(n);
    let mut out = vec![Point::zeros(); values[0].len()];
    for i in lo..hi {
        let mut l = 1.0;
        for j in lo..hi {
            if j != i {
                l *= (t - times[j]) / (times[i] - times[j]);
            }
        }
        for (o, v) in out.iter_mut().zip(&values[i]) {
            *o += v * l;
        }
    }
    out
}

/// `p_eps(t) = sum_b |xi_b,eps - xi_b| + |eta_b,eps - eta_b|` on the modified run's times.
pub fn deviation(modified: &Trajectory, reference: &Trajectory) -> Result<DeviationSeries> {
    if modified.charge_count() != reference.charge_count() {
        return Err(Error::InvalidArgument("charge counts differ".into()));
    }
    let same_grid = modified.times.len() == reference.times.len()
        && modified
            .times
            .iter()
            .zip(&reference.times)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    let mut out = DeviationSeries::default();
    for (n, &t) in modified.times.iter().enumerate() {
        let (rx, rv) = if same_grid {
            (reference.xi[n].clone(), reference.eta[n].clone())
        } else {
            (
                interpolate(&reference.times, &reference.xi, t),
                interpolate(&reference.times, &reference.eta, t),
            )
        };
        let dxi: Vec<f64> = modified.xi[n].iter().zip(&rx).map(|(a, b)| (a - b).norm()).collect();
        let deta: Vec<f64> = modified.eta[n].iter().zip(&rv).map(|(a, b)| (a - b).norm()).collect();
        out.times.push(t);
        out.p.push(dxi.iter().sum::<f64>() + deta.iter().sum::<f64>());
        out.dxi.push(dxi);
        out.deta.push(deta);
    }
    Ok(out)
}

/// Shared settings of an epsilon sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub centers: Vec<(Point, Point)>,
    pub particles_per_blob: usize,
    pub c_cut: f64,
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub sigma: f64,
    pub sup_p: f64,
    pub t_eps_hit: Option<f64>,
    pub wall_seconds: f64,
}

/// Run the modified system for every `eps` and compare with one reference solve.
pub fn sweep(
    spec: &SweepSpec,
    evaluator: Arc<GreenEvaluator>,
    h_cha: &BoundaryDensity,
    eps_list: &[f64],
) -> Result<Vec<SweepRow>> {
    if eps_list.is_empty() {
        return Ok(Vec::new());
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("eps_list must be decreasing".into()));
    }
    let domain = evaluator
        .domain()
        .ok_or_else(|| Error::InvalidArgument("bounded domain required".into()))?
        .clone();
    let reference = run_reference(evaluator.clone(), h_cha, &spec.centers, spec.t_end, spec.dt)?;
    let delta2 = reference.separation(&domain);
    let sigma_max = SIGMA_CLAMP * delta2 / 8.0;
    let mut rows = Vec::new();
    for &eps in eps_list {
        let start = Instant::now();
        let sigma = cutoff_schedule(eps, spec.c_cut, spec.t_end).min(sigma_max);
        let blob = BlobSpec {
            epsilon: eps,
            centers: spec.centers.clone(),
            particles_per_blob: spec.particles_per_blob,
        };
        let opts = ModifiedRun {
            sigma,
            delta2,
            t_end: spec.t_end,
            dt: spec.dt,
            energy_every: 0,
        };
        let traj = run_modified(&blob, evaluator.clone(), h_cha, &opts)?;
        let dev = deviation(&traj, &reference)?;
        rows.push(SweepRow {
            epsilon: eps,
            sigma,
            sup_p: dev.sup(),
            t_eps_hit: traj.t_eps_hit,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "epsilon,sigma,sup_p,t_eps_hit,wall_seconds";

pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        let hit = r.t_eps_hit.map_or("nan".to_string(), |t| t.to_string());
        writeln!(out, "{},{},{},{},{}", r.epsilon, r.sigma, r.sup_p, hit, r.wall_seconds)?;
    }
    Ok(())
}

/// gnuplot script for `log eps` vs `log sup p`.
pub fn sweep_plot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\nset logscale xy\nset xlabel 'epsilon'\nset ylabel 'sup p_eps'\nset key off\nplot '{csv_name}' every ::1 using 1:3 with linespoints pt 7\n"
    )
}
