//! Observables: energy, norms, energy moments, singular moments, `Q`, and the
//! velocity-lemma monitor `beta`.

use crate::boundary::BoundaryDensity;
use crate::charges::ChargeState;
use crate::geometry::{ConvexDomain, LocalFrame};
use crate::plasma::{density_moments, min_charge_distance, Norm, ParticleEnsemble};
use crate::system::{CoupledModel, EnergyBreakdown, SystemState};
use crate::{Error, Point, Result};
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

pub fn total_energy(model: &CoupledModel, state: &SystemState) -> Result<EnergyBreakdown> {
    model.energy(state)
}

/// `h(x, v) = |v|^2 / 2 + sum_a 1 / (4 pi |x - xi_a|) + K1`.
pub fn pointwise_h(x: &Point, v: &Point, charges: &[Point], k1: f64) -> f64 {
    let mut h = 0.5 * v.norm_squared() + k1;
    for xi in charges {
        h += 1.0 / (4.0 * PI * (x - xi).norm());
    }
    h
}

/// `sum_i w_i h(x_i, v_i)^(k/2)` over alive particles.
pub fn moment_hk(ens: &ParticleEnsemble, charges: &[Point], k: f64, k1: f64) -> Result<f64> {
    let mut s = 0.0;
    for i in (0..ens.len()).filter(|&i| ens.alive[i]) {
        if charges.iter().any(|xi| *xi == ens.positions[i]) {
            return Err(Error::FieldSingularity);
        }
        s += ens.weights[i] * pointwise_h(&ens.positions[i], &ens.velocities[i], charges, k1).powf(0.5 * k);
    }
    Ok(s)
}

/// `dt sum_a sum_i w_i h^(k/2) / |x_i - xi_a|^2`.
pub fn singular_moment_lk_increment(
    ens: &ParticleEnsemble,
    charges: &[Point],
    k: f64,
    k1: f64,
    dt: f64,
) -> f64 {
    let mut s = 0.0;
    for i in (0..ens.len()).filter(|&i| ens.alive[i]) {
        let x = &ens.positions[i];
        let hk = pointwise_h(x, &ens.velocities[i], charges, k1).powf(0.5 * k);
        for xi in charges {
            s += ens.weights[i] * hk / (x - xi).norm_squared();
        }
    }
    dt * s
}

/// `beta = v_perp^2 / 2 + (h_N + kappa v_tan^2) x_perp`.
///
/// In the plane the second fundamental form coefficient is `b = -kappa` for a
/// unit-speed tangential coordinate, so `-(-h_N + w^2 b) = h_N + kappa w^2`.
pub fn beta(frame: &LocalFrame, h_n: f64, kappa: f64) -> f64 {
    0.5 * frame.v_perp * frame.v_perp + (h_n + kappa * frame.v_tan * frame.v_tan) * frame.x_perp
}

/// `max_{i, a} sqrt(|v_i - eta_a|^2 / 2 + 1 / |x_i - xi_a| + K1)`;
/// without charges `max_i sqrt(|v_i|^2 / 2 + K1)`.
pub fn pointwise_q(ens: &ParticleEnsemble, charges: &ChargeState, k1: f64) -> f64 {
    let mut q: f64 = 0.0;
    for i in (0..ens.len()).filter(|&i| ens.alive[i]) {
        let (x, v) = (&ens.positions[i], &ens.velocities[i]);
        if charges.is_empty() {
            q = q.max((0.5 * v.norm_squared() + k1).sqrt());
        }
        for a in 0..charges.len() {
            let h = 0.5 * (v - charges.eta[a]).norm_squared() + 1.0 / (x - charges.xi[a]).norm() + k1;
            q = q.max(h.sqrt());
        }
    }
    q
}

/// Tracks `beta(s) / beta(entry)` over boundary-collar episodes.
#[derive(Clone, Debug)]
pub struct BetaMonitor {
    entry: Vec<Option<f64>>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// Episodes whose entry value was not positive.
    pub flagged: usize,
    pub episodes: usize,
}

impl BetaMonitor {
    pub fn new(n: usize) -> Self {
        Self {
            entry: vec![None; n],
            max_ratio: 1.0,
            min_ratio: 1.0,
            flagged: 0,
            episodes: 0,
        }
    }

    /// Update with the current state; returns the max ratio over monitored particles (1 if none).
    pub fn update(
        &mut self,
        ens: &ParticleEnsemble,
        domain: &ConvexDomain,
        h_n: &BoundaryDensity,
    ) -> f64 {
        let mut now_max: f64 = 1.0;
        for i in 0..ens.len() {
            if !ens.alive[i] {
                self.entry[i] = None;
                continue;
            }
            match domain.local_frame(&ens.positions[i], &ens.velocities[i]) {
                Ok(frame) => {
                    let b = beta(&frame, h_n.value(domain, frame.mu), domain.curvature(frame.mu));
                    match self.entry[i] {
                        None => {
                            self.episodes += 1;
                            if b > 0.0 {
                                self.entry[i] = Some(b);
                            } else {
                                self.flagged += 1;
                                self.entry[i] = Some(f64::NAN);
                            }
                        }
                        Some(e) if e.is_finite() => {
                            let r = b / e;
                            self.max_ratio = self.max_ratio.max(r);
                            self.min_ratio = self.min_ratio.min(r);
                            now_max = now_max.max(r);
                        }
                        Some(_) => {}
                    }
                }
                Err(_) => self.entry[i] = None,
            }
        }
        now_max
    }
}

/// One row of the diagnostics table.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub interaction: f64,
    pub flux_energy: f64,
    pub l1: f64,
    pub h2: f64,
    pub h4: f64,
    pub l0: f64,
    pub l2: f64,
    pub q: f64,
    pub beta_max_ratio: f64,
    pub min_dist_charge: f64,
    pub min_dist_boundary: f64,
}

pub const CSV_HEADER: &str = "t,energy,kinetic,interaction,flux_energy,l1,H2,H4,L0,L2,Q,beta_max_ratio,min_dist_charge,min_dist_boundary";

impl DiagnosticsRecord {
    pub fn write_csv_row<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.energy,
            self.kinetic,
            self.interaction,
            self.flux_energy,
            self.l1,
            self.h2,
            self.h4,
            self.l0,
            self.l2,
            self.q,
            self.beta_max_ratio,
            self.min_dist_charge,
            self.min_dist_boundary
        )
    }
}

/// Running sups and accumulators updated every step.
#[derive(Clone, Debug)]
pub struct Recorder {
    pub k1: f64,
    pub h2: f64,
    pub h4: f64,
    pub l0: f64,
    pub l2: f64,
    pub q: f64,
    pub beta: Option<BetaMonitor>,
    beta_now: f64,
    pub min_dist_charge: f64,
    pub min_dist_boundary: f64,
}

impl Recorder {
    /// `beta_monitor` enables the collar monitor (Neumann runs).
    pub fn new(n_particles: usize, k1: f64, beta_monitor: bool) -> Self {
        Self {
            k1,
            h2: 0.0,
            h4: 0.0,
            l0: 0.0,
            l2: 0.0,
            q: 0.0,
            beta: beta_monitor.then(|| BetaMonitor::new(n_particles)),
            beta_now: 1.0,
            min_dist_charge: f64::INFINITY,
            min_dist_boundary: f64::INFINITY,
        }
    }

    /// Fold the current state into the running quantities; `dt` is the time since
    /// the previous call (0 for the initial state).
    pub fn observe(
        &mut self,
        state: &SystemState,
        domain: &ConvexDomain,
        h_n: &BoundaryDensity,
        dt: f64,
    ) -> Result<()> {
        let ens = &state.plasma;
        let xi = &state.charges.xi;
        let h2 = moment_hk(ens, xi, 2.0, self.k1)?;
        let h4 = moment_hk(ens, xi, 4.0, self.k1)?;
        let (old_h2, old_h4, old_l0, old_l2) = (self.h2, self.h4, self.l0, self.l2);
        self.h2 = self.h2.max(h2);
        self.h4 = self.h4.max(h4);
        if dt > 0.0 {
            self.l0 += singular_moment_lk_increment(ens, xi, 0.0, self.k1, dt);
            self.l2 += singular_moment_lk_increment(ens, xi, 2.0, self.k1, dt);
        }
        debug_assert!(self.h2 >= old_h2 && self.h4 >= old_h4);
        debug_assert!(self.l0 >= old_l0 && self.l2 >= old_l2);
        self.q = self.q.max(pointwise_q(ens, &state.charges, self.k1));
        if let Some(m) = self.beta.as_mut() {
            self.beta_now = m.update(ens, domain, h_n);
        }
        self.min_dist_charge = self.min_dist_charge.min(min_charge_distance(ens, xi));
        for x in xi {
            self.min_dist_boundary = self.min_dist_boundary.min(-domain.signed_distance(x));
        }
        Ok(())
    }

    pub fn record(&self, state: &SystemState, energy: &EnergyBreakdown) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t: state.t,
            energy: energy.total,
            kinetic: energy.kinetic,
            interaction: energy.interaction,
            flux_energy: energy.flux,
            l1: density_moments(&state.plasma, Norm::L1),
            h2: self.h2,
            h4: self.h4,
            l0: self.l0,
            l2: self.l2,
            q: self.q,
            beta_max_ratio: self.beta_now,
            min_dist_charge: self.min_dist_charge,
            min_dist_boundary: self.min_dist_boundary,
        }
    }
}
