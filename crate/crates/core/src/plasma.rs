//! Weighted macro-particles, their self-consistent field, and transport with wall events.
//!
//! The step is velocity Verlet written as "ballistic flight under the
//! start-of-step acceleration, then a velocity correction
//! `(dt/2)(a_new - a_old)`". Away from the wall this is the usual
//! kick-drift-kick step. Near the wall the particle is reflected on the
//! ballistic arc, which keeps the bounce error of second order.

use crate::boundary::BoundaryPotential;
use crate::geometry::{reflect_across, ConvexDomain};
use crate::greens::{
    disk_harmonic, disk_harmonic_grad, grad_log_kernel, log_kernel, Backend, CutoffProfile, Flavor,
    GreenEvaluator,
};
use crate::{Error, Point, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

/// Maximum number of reflections of one particle within one step.
pub const MAX_BOUNCES: u32 = 32;
/// Plasma-charge collision radius in units of the inradius.
pub const COLLISION_FRACTION: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryRule {
    Reflection,
    Absorption,
}

/// Axis-aligned box in phase space filled with `count` equal-weight particles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseBox {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub vx: [f64; 2],
    pub vy: [f64; 2],
    pub weight: f64,
    pub count: usize,
}

impl PhaseBox {
    fn ranges(&self) -> [[f64; 2]; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    pub fn volume(&self) -> f64 {
        self.ranges().iter().map(|r| r[1] - r[0]).product()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<Point>,
    pub velocities: Vec<Point>,
    pub weights: Vec<f64>,
    pub alive: Vec<bool>,
    /// Source box or blob index of each particle.
    pub tags: Vec<usize>,
    /// Phase-space box used by the histogram norm proxy.
    pub support: Option<[[f64; 2]; 4]>,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Point `i` of the 4D Halton sequence (bases 2, 3, 5, 7).
pub fn halton4(i: u64) -> [f64; 4] {
    [
        radical_inverse(i, 2),
        radical_inverse(i, 3),
        radical_inverse(i, 5),
        radical_inverse(i, 7),
    ]
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<Point>, velocities: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let n = positions.len();
        if velocities.len() != n || weights.len() != n {
            return Err(Error::InvalidArgument("particle arrays differ in length".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument("particle weights must be positive".into()));
        }
        Ok(Self {
            positions,
            velocities,
            weights,
            alive: vec![true; n],
            tags: vec![0; n],
            support: None,
        })
    }

    /// Low-discrepancy fill of the boxes; the seed only permutes particle order.
    pub fn from_boxes(boxes: &[PhaseBox], seed: u64) -> Result<Self> {
        let mut parts: Vec<(Point, Point, f64, usize)> = Vec::new();
        let mut support: Option<[[f64; 2]; 4]> = None;
        for (b, bx) in boxes.iter().enumerate() {
            if bx.count == 0 || !(bx.weight > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "plasma box {b} needs a positive weight and count"
                )));
            }
            let r = bx.ranges();
            if r.iter().any(|r| !(r[1] > r[0])) {
                return Err(Error::InvalidArgument(format!("plasma box {b} is degenerate")));
            }
            let w = bx.weight / bx.count as f64;
            for i in 0..bx.count {
                let u = halton4(i as u64 + 1);
                let c: Vec<f64> = (0..4).map(|k| r[k][0] + u[k] * (r[k][1] - r[k][0])).collect();
                parts.push((Point::new(c[0], c[1]), Point::new(c[2], c[3]), w, b));
            }
            support = Some(match support {
                None => r,
                Some(s) => {
                    let mut s = s;
                    for k in 0..4 {
                        s[k][0] = s[k][0].min(r[k][0]);
                        s[k][1] = s[k][1].max(r[k][1]);
                    }
                    s
                }
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        parts.shuffle(&mut rng);
        let n = parts.len();
        Ok(Self {
            positions: parts.iter().map(|p| p.0).collect(),
            velocities: parts.iter().map(|p| p.1).collect(),
            weights: parts.iter().map(|p| p.2).collect(),
            alive: vec![true; n],
            tags: parts.iter().map(|p| p.3).collect(),
            support,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    /// Write one snapshot: `t,id,x,y,vx,vy,w,alive`.
    pub fn write_snapshot<W: Write>(&self, out: &mut W, t: f64) -> std::io::Result<()> {
        writeln!(out, "t,id,x,y,vx,vy,w,alive")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t,
                i,
                self.positions[i].x,
                self.positions[i].y,
                self.velocities[i].x,
                self.velocities[i].y,
                self.weights[i],
                u8::from(self.alive[i])
            )?;
        }
        Ok(())
    }
}

/// Pairwise plasma kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Interaction {
    /// `G_#`, self-interaction excluded.
    Green,
    /// `G_#^sigma`, every pair including the diagonal.
    Cutoff(CutoffProfile),
    /// `G_#^sigma` between distinct particles only (short-range regularization).
    Softened(CutoffProfile),
}

/// Field sources and kernel seen by the plasma.
#[derive(Clone, Debug)]
pub struct PlasmaField {
    pub evaluator: Arc<GreenEvaluator>,
    /// Potential of the plasma boundary data `h_#`.
    pub boundary: BoundaryPotential,
    pub interaction: Interaction,
}

/// Per-step cache of Nyström densities for every alive source particle.
struct Kernel<'a> {
    ev: &'a GreenEvaluator,
    bem: Option<Vec<Vec<f64>>>,
}

impl<'a> Kernel<'a> {
    fn new(ev: &'a GreenEvaluator, ens: &ParticleEnsemble) -> Result<Self> {
        let bem = match ev.backend() {
            Backend::Bem(sys) => Some(
                (0..ens.len())
                    .into_par_iter()
                    .map(|j| {
                        if ens.alive[j] {
                            sys.source_density(&ens.positions[j])
                        } else {
                            Ok(Vec::new())
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        Ok(Self { ev, bem })
    }

    #[inline]
    fn grad_harmonic(&self, x: &Point, j: usize, y: &Point) -> Result<Point> {
        match self.ev.backend() {
            Backend::ExactDisk => Ok(disk_harmonic_grad(self.ev.flavor(), x, y)),
            Backend::Bem(sys) => {
                let k = &self.bem.as_ref().expect("densities")[j];
                sys.check_eval_point(x)?;
                Ok(sys.grad_harmonic_with_density(k, x, y))
            }
            Backend::ExactHalfSpace => self.ev.grad_harmonic(x, y),
        }
    }

    #[inline]
    fn harmonic(&self, x: &Point, j: usize, y: &Point) -> Result<f64> {
        match self.ev.backend() {
            Backend::ExactDisk => Ok(disk_harmonic(self.ev.flavor(), x, y)),
            Backend::Bem(sys) => {
                let k = &self.bem.as_ref().expect("densities")[j];
                sys.check_eval_point(x)?;
                Ok(sys.harmonic_with_density(k, x, y))
            }
            Backend::ExactHalfSpace => self.ev.harmonic(x, y),
        }
    }
}

impl PlasmaField {
    pub fn new(evaluator: Arc<GreenEvaluator>, boundary: BoundaryPotential) -> Self {
        Self {
            evaluator,
            boundary,
            interaction: Interaction::Green,
        }
    }

    pub fn flavor(&self) -> Flavor {
        self.evaluator.flavor()
    }

    fn check_inside(&self, x: &Point) -> Result<()> {
        if let Some(d) = self.evaluator.domain() {
            if d.signed_distance(x) > 0.0 {
                return Err(Error::OutsideDomain);
            }
        }
        Ok(())
    }

    fn field_with(
        &self,
        kernel: &Kernel,
        ens: &ParticleEnsemble,
        charges: &[Point],
        x: &Point,
        self_index: Option<usize>,
    ) -> Result<Point> {
        self.check_inside(x)?;
        let mut e = Point::zeros();
        for j in 0..ens.len() {
            if !ens.alive[j] {
                continue;
            }
            let y = &ens.positions[j];
            let g = match self.interaction {
                Interaction::Green => {
                    if Some(j) == self_index {
                        continue;
                    }
                    if x == y {
                        return Err(Error::FieldSingularity);
                    }
                    grad_log_kernel(x, y) + kernel.grad_harmonic(x, j, y)?
                }
                Interaction::Cutoff(p) => p.singular_part_grad(x, y) + kernel.grad_harmonic(x, j, y)?,
                Interaction::Softened(p) => {
                    if Some(j) == self_index {
                        continue;
                    }
                    p.singular_part_grad(x, y) + kernel.grad_harmonic(x, j, y)?
                }
            };
            e += g * ens.weights[j];
        }
        for xi in charges {
            if x == xi {
                return Err(Error::FieldSingularity);
            }
            e += self.evaluator.grad_green(x, xi)?;
        }
        Ok(e - self.boundary.grad(x)?)
    }

    /// Field at `x`; `self_index` is skipped for the singular kernel.
    pub fn field_at(
        &self,
        ens: &ParticleEnsemble,
        charges: &[Point],
        x: &Point,
        self_index: Option<usize>,
    ) -> Result<Point> {
        let kernel = Kernel::new(&self.evaluator, ens)?;
        self.field_with(&kernel, ens, charges, x, self_index)
    }

    /// Field at every particle (zero for dead ones), in particle order.
    pub fn accelerations(&self, ens: &ParticleEnsemble, charges: &[Point]) -> Result<Vec<Point>> {
        let kernel = Kernel::new(&self.evaluator, ens)?;
        (0..ens.len())
            .into_par_iter()
            .map(|i| {
                if ens.alive[i] {
                    self.field_with(&kernel, ens, charges, &ens.positions[i], Some(i))
                } else {
                    Ok(Point::zeros())
                }
            })
            .collect()
    }

    /// Plasma field at the given points (e.g. the charges); every alive particle is a source.
    pub fn field_at_points(&self, ens: &ParticleEnsemble, points: &[Point]) -> Result<Vec<Point>> {
        let kernel = Kernel::new(&self.evaluator, ens)?;
        points
            .par_iter()
            .map(|x| self.field_with(&kernel, ens, &[], x, None))
            .collect()
    }

    /// Pair potential `G_#` (or `G^sigma_#`) between particle `j` at `y` and a point `x`.
    fn pair_potential(&self, kernel: &Kernel, x: &Point, j: usize, y: &Point) -> Result<f64> {
        Ok(match self.interaction {
            Interaction::Green => log_kernel(x, y) + kernel.harmonic(x, j, y)?,
            Interaction::Cutoff(p) | Interaction::Softened(p) => {
                p.singular_part(x, y) + kernel.harmonic(x, j, y)?
            }
        })
    }

    /// Potential energy of the plasma and its coupling to the charges:
    /// `-1/2 sum_{i != j} w_i w_j G - sum_i sum_a w_i G(x_i, xi_a) + sum_i w_i U(x_i)`
    /// (the cutoff kernel also includes `i = j`).
    pub fn potential_energy(&self, ens: &ParticleEnsemble, charges: &[Point]) -> Result<f64> {
        let kernel = Kernel::new(&self.evaluator, ens)?;
        let rows: Vec<f64> = (0..ens.len())
            .into_par_iter()
            .map(|i| -> Result<f64> {
                if !ens.alive[i] {
                    return Ok(0.0);
                }
                let x = ens.positions[i];
                let mut pp = 0.0;
                for j in 0..ens.len() {
                    if !ens.alive[j] {
                        continue;
                    }
                    let include = match self.interaction {
                        Interaction::Green | Interaction::Softened(_) => j > i,
                        Interaction::Cutoff(_) => j >= i,
                    };
                    if !include {
                        continue;
                    }
                    let g = self.pair_potential(&kernel, &x, j, &ens.positions[j])?;
                    let factor = if j == i { 0.5 } else { 1.0 };
                    pp -= factor * ens.weights[j] * g;
                }
                let mut pc = 0.0;
                for xi in charges {
                    pc -= self.evaluator.green(&x, xi)?;
                }
                Ok(ens.weights[i] * (pp + pc + self.boundary.value(&x)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(rows.iter().sum())
    }

    /// Potential felt by a unit test charge at `x`, excluding particle `skip`:
    /// `-sum_j w_j G(x, x_j) - sum_a G(x, xi_a) + U(x)`.
    pub fn potential_at(
        &self,
        ens: &ParticleEnsemble,
        charges: &[Point],
        x: &Point,
        skip: Option<usize>,
    ) -> Result<f64> {
        let kernel = Kernel::new(&self.evaluator, ens)?;
        let mut p = 0.0;
        for j in 0..ens.len() {
            if !ens.alive[j] || Some(j) == skip {
                continue;
            }
            p -= ens.weights[j] * self.pair_potential(&kernel, x, j, &ens.positions[j])?;
        }
        for xi in charges {
            p -= self.evaluator.green(x, xi)?;
        }
        Ok(p + self.boundary.value(x)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Reflect,
    Absorb,
}

/// A wall event during a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEvent {
    pub particle: usize,
    /// Time since the start of the step.
    pub time: f64,
    pub kind: EventKind,
    pub position: Point,
    /// Velocity just before the event.
    pub velocity: Point,
}

/// Result of one particle's ballistic flight.
#[derive(Clone, Debug)]
pub struct Flight {
    pub position: Point,
    pub velocity: Point,
    pub events: Vec<(f64, EventKind, Point, Point)>,
    pub absorbed: bool,
}

/// Move along `x + v t + a t^2 / 2` for time `dt`, handling wall events.
pub fn flight(
    domain: &ConvexDomain,
    x: Point,
    v: Point,
    a: Point,
    dt: f64,
    rule: BoundaryRule,
) -> std::result::Result<Flight, ()> {
    let mut x = x;
    let mut v = v;
    let mut t = 0.0;
    let mut events = Vec::new();
    let mut bounces = 0;
    loop {
        let rem = dt - t;
        match domain.path_hit(&x, &v, &a, rem) {
            None => {
                x += v * rem + a * (0.5 * rem * rem);
                v += a * rem;
                break;
            }
            Some((th, xh)) => {
                let vh = v + a * th;
                t += th;
                match rule {
                    BoundaryRule::Absorption => {
                        events.push((t, EventKind::Absorb, xh, vh));
                        return Ok(Flight {
                            position: xh,
                            velocity: vh,
                            events,
                            absorbed: true,
                        });
                    }
                    BoundaryRule::Reflection => {
                        bounces += 1;
                        if bounces > MAX_BOUNCES {
                            return Err(());
                        }
                        events.push((t, EventKind::Reflect, xh, vh));
                        let n = domain.nearest(&xh).normal;
                        v = if vh.dot(&n) > 0.0 { reflect_across(&n, &vh) } else { vh };
                        x = xh;
                    }
                }
            }
        }
    }
    // A grazing crossing finer than the sampling can leave the end point outside.
    let nr = domain.nearest(&x);
    if nr.signed_distance >= 0.0 {
        x = nr.point - nr.normal * 1e-12;
        if v.dot(&nr.normal) > 0.0 {
            match rule {
                BoundaryRule::Reflection => {
                    events.push((dt, EventKind::Reflect, x, v));
                    v = reflect_across(&nr.normal, &v);
                }
                BoundaryRule::Absorption => {
                    events.push((dt, EventKind::Absorb, x, v));
                    return Ok(Flight {
                        position: x,
                        velocity: v,
                        events,
                        absorbed: true,
                    });
                }
            }
        }
    }
    Ok(Flight {
        position: x,
        velocity: v,
        events,
        absorbed: false,
    })
}

/// Outcome of the transport half of a step.
#[derive(Clone, Debug, Default)]
pub struct DriftReport {
    pub events: Vec<BoundaryEvent>,
    pub absorbed: Vec<usize>,
    pub absorbed_weight: f64,
}

/// Ballistic flights of all alive particles under the accelerations `acc`.
/// Velocities are left at the ballistic value `v + a dt`.
pub fn drift(
    ens: &mut ParticleEnsemble,
    acc: &[Point],
    domain: &ConvexDomain,
    rule: BoundaryRule,
    dt: f64,
) -> Result<DriftReport> {
    let flights: Vec<Option<std::result::Result<Flight, ()>>> = (0..ens.len())
        .into_par_iter()
        .map(|i| {
            ens.alive[i].then(|| {
                flight(domain, ens.positions[i], ens.velocities[i], acc[i], dt, rule)
            })
        })
        .collect();
    let mut report = DriftReport::default();
    for (i, f) in flights.into_iter().enumerate() {
        let Some(f) = f else { continue };
        let f = f.map_err(|_| Error::GrazingTrap(i))?;
        for (t, kind, p, v) in &f.events {
            report.events.push(BoundaryEvent {
                particle: i,
                time: *t,
                kind: *kind,
                position: *p,
                velocity: *v,
            });
        }
        ens.positions[i] = f.position;
        ens.velocities[i] = f.velocity;
        if f.absorbed {
            ens.alive[i] = false;
            report.absorbed.push(i);
            report.absorbed_weight += ens.weights[i];
        }
    }
    Ok(report)
}

/// Error if an alive particle is within `r_min` of a charge.
pub fn check_collisions(ens: &ParticleEnsemble, charges: &[Point], r_min: f64) -> Result<()> {
    for i in 0..ens.len() {
        if !ens.alive[i] {
            continue;
        }
        for (a, xi) in charges.iter().enumerate() {
            if (ens.positions[i] - xi).norm() < r_min {
                return Err(Error::PlasmaChargeCollision {
                    particle: i,
                    charge: a,
                });
            }
        }
    }
    Ok(())
}

/// Minimum distance from an alive particle to a charge (infinite if none).
pub fn min_charge_distance(ens: &ParticleEnsemble, charges: &[Point]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..ens.len() {
        if ens.alive[i] {
            for xi in charges {
                d = d.min((ens.positions[i] - xi).norm());
            }
        }
    }
    d
}

/// One plasma step with the charges held fixed.
pub fn push(
    ens: &mut ParticleEnsemble,
    charges: &[Point],
    field: &PlasmaField,
    rule: BoundaryRule,
    dt: f64,
) -> Result<DriftReport> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let domain = field
        .evaluator
        .domain()
        .ok_or_else(|| Error::InvalidArgument("particle transport needs a bounded domain".into()))?
        .clone();
    let a0 = field.accelerations(ens, charges)?;
    let report = drift(ens, &a0, &domain, rule, dt)?;
    check_collisions(ens, charges, COLLISION_FRACTION * domain.inradius())?;
    let a1 = field.accelerations(ens, charges)?;
    for i in 0..ens.len() {
        if ens.alive[i] {
            ens.velocities[i] += (a1[i] - a0[i]) * (0.5 * dt);
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    /// Maximum cell-averaged density on a 32^4 histogram of the support box.
    LinfProxy,
}

pub const HISTOGRAM_BINS: usize = 32;

pub fn density_moments(ens: &ParticleEnsemble, norm: Norm) -> f64 {
    match norm {
        Norm::L1 => (0..ens.len())
            .filter(|&i| ens.alive[i])
            .map(|i| ens.weights[i])
            .sum(),
        Norm::LinfProxy => {
            let support = match ens.support {
                Some(s) => s,
                None => {
                    let mut s = [[f64::INFINITY, f64::NEG_INFINITY]; 4];
                    for i in (0..ens.len()).filter(|&i| ens.alive[i]) {
                        let c = [
                            ens.positions[i].x,
                            ens.positions[i].y,
                            ens.velocities[i].x,
                            ens.velocities[i].y,
                        ];
                        for k in 0..4 {
                            s[k][0] = s[k][0].min(c[k]);
                            s[k][1] = s[k][1].max(c[k]);
                        }
                    }
                    s
                }
            };
            let nb = HISTOGRAM_BINS;
            let widths: Vec<f64> = support.iter().map(|r| (r[1] - r[0]) / nb as f64).collect();
            if widths.iter().any(|w| !(*w > 0.0)) {
                return 0.0;
            }
            let cell: f64 = widths.iter().product();
            let mut bins: HashMap<usize, f64> = HashMap::new();
            'outer: for i in (0..ens.len()).filter(|&i| ens.alive[i]) {
                let c = [
                    ens.positions[i].x,
                    ens.positions[i].y,
                    ens.velocities[i].x,
                    ens.velocities[i].y,
                ];
                let mut idx = 0usize;
                for k in 0..4 {
                    let u = (c[k] - support[k][0]) / widths[k];
                    if !(u >= 0.0) || u > nb as f64 {
                        continue 'outer;
                    }
                    idx = idx * nb + (u as usize).min(nb - 1);
                }
                *bins.entry(idx).or_insert(0.0) += ens.weights[i];
            }
            bins.values().fold(0.0f64, |m, v| m.max(*v)) / cell
        }
    }
}
