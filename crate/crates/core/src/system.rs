//! The coupled plasma + point-charge system.

use crate::charges::{ChargeModel, ChargeState};
use crate::geometry::ConvexDomain;
use crate::plasma::{
    check_collisions, drift, min_charge_distance, BoundaryEvent, BoundaryRule, EventKind,
    ParticleEnsemble, PlasmaField, COLLISION_FRACTION,
};
use crate::{Error, Point, Result};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct CoupledModel {
    pub domain: Arc<ConvexDomain>,
    pub plasma: PlasmaField,
    pub charges: ChargeModel,
    pub rule: BoundaryRule,
}

#[derive(Clone, Debug)]
pub struct SystemState {
    pub t: f64,
    pub plasma: ParticleEnsemble,
    pub charges: ChargeState,
    pub acc_plasma: Vec<Point>,
    pub acc_charges: Vec<Point>,
    /// Energy carried out of the domain by absorbed particles.
    pub flux_energy: f64,
    pub absorbed_weight: f64,
}

/// Energy split into kinetic, potential and boundary-flux parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub interaction: f64,
    pub flux: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default)]
pub struct StepReport {
    pub events: Vec<BoundaryEvent>,
    pub absorbed_weight: f64,
    pub absorbed_energy: f64,
    /// `dt` exceeded `0.1 min(1, d^2)` with `d` the plasma-charge distance.
    pub stability_exceeded: bool,
}

/// Time-step bound `0.1 min(1, d^2)`.
pub fn stability_bound(min_dist: f64) -> f64 {
    0.1 * (1.0f64).min(min_dist * min_dist)
}

impl CoupledModel {
    pub fn gamma(&self) -> f64 {
        match self.rule {
            BoundaryRule::Absorption => 1.0,
            BoundaryRule::Reflection => 0.0,
        }
    }

    pub fn accelerations(
        &self,
        plasma: &ParticleEnsemble,
        charges: &ChargeState,
    ) -> Result<(Vec<Point>, Vec<Point>)> {
        let ap = self.plasma.accelerations(plasma, &charges.xi)?;
        let ec = if plasma.alive_count() > 0 || !self.plasma.boundary.is_zero() {
            self.plasma.field_at_points(plasma, &charges.xi)?
        } else {
            vec![Point::zeros(); charges.len()]
        };
        self.charges.check_continuation(charges)?;
        let mut ac = Vec::with_capacity(charges.len());
        for a in 0..charges.len() {
            let e = ec[a];
            let f = move |_: &Point| -> Result<Point> { Ok(e) };
            ac.push(self.charges.force(charges, a, Some(&f))?);
        }
        Ok((ap, ac))
    }

    pub fn initialize(&self, plasma: ParticleEnsemble, charges: ChargeState) -> Result<SystemState> {
        let (acc_plasma, acc_charges) = self.accelerations(&plasma, &charges)?;
        Ok(SystemState {
            t: 0.0,
            plasma,
            charges,
            acc_plasma,
            acc_charges,
            flux_energy: 0.0,
            absorbed_weight: 0.0,
        })
    }

    /// One velocity-Verlet step of the coupled system.
    pub fn step(&self, state: &mut SystemState, dt: f64) -> Result<StepReport> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        let mut report = StepReport {
            stability_exceeded: dt
                > stability_bound(min_charge_distance(&state.plasma, &state.charges.xi)),
            ..Default::default()
        };
        let before = (self.rule == BoundaryRule::Absorption)
            .then(|| (state.plasma.clone(), state.charges.xi.clone()));

        let mut charges = state.charges.clone();
        for a in 0..charges.len() {
            let acc = state.acc_charges[a];
            charges.xi[a] += charges.eta[a] * dt + acc * (0.5 * dt * dt);
            charges.eta[a] += acc * dt;
            if self.domain.signed_distance(&charges.xi[a]) >= 0.0 {
                return Err(Error::ChargeReachedBoundary(a));
            }
        }

        let mut plasma = state.plasma.clone();
        let drift_report = drift(&mut plasma, &state.acc_plasma, &self.domain, self.rule, dt)?;
        if let Some((prev, prev_xi)) = &before {
            for ev in drift_report.events.iter().filter(|e| e.kind == EventKind::Absorb) {
                let i = ev.particle;
                let w = prev.weights[i];
                let phi = self.plasma.potential_at(prev, prev_xi, &ev.position, Some(i))?;
                report.absorbed_energy += w * (0.5 * ev.velocity.norm_squared() + phi);
            }
        }
        report.absorbed_weight = drift_report.absorbed_weight;
        report.events = drift_report.events;
        check_collisions(&plasma, &charges.xi, COLLISION_FRACTION * self.domain.inradius())?;

        let (ap, ac) = self.accelerations(&plasma, &charges)?;
        for i in 0..plasma.len() {
            if plasma.alive[i] {
                plasma.velocities[i] += (ap[i] - state.acc_plasma[i]) * (0.5 * dt);
            }
        }
        for a in 0..charges.len() {
            charges.eta[a] += (ac[a] - state.acc_charges[a]) * (0.5 * dt);
        }
        state.plasma = plasma;
        state.charges = charges;
        state.acc_plasma = ap;
        state.acc_charges = ac;
        state.flux_energy += report.absorbed_energy;
        state.absorbed_weight += report.absorbed_weight;
        state.t += dt;
        Ok(report)
    }

    /// Total energy of the coupled system.
    pub fn energy(&self, state: &SystemState) -> Result<EnergyBreakdown> {
        let ens = &state.plasma;
        let mut kinetic = 0.0;
        for i in 0..ens.len() {
            if ens.alive[i] {
                kinetic += 0.5 * ens.weights[i] * ens.velocities[i].norm_squared();
            }
        }
        for eta in &state.charges.eta {
            kinetic += 0.5 * eta.norm_squared();
        }
        let mut interaction = self.plasma.potential_energy(ens, &state.charges.xi)?;
        let xi = &state.charges.xi;
        let ev = &self.plasma.evaluator;
        for a in 0..xi.len() {
            interaction += self.plasma.boundary.value(&xi[a])? - self.charges.h_value(&xi[a])?;
            for b in a + 1..xi.len() {
                interaction -= ev.green(&xi[a], &xi[b])?;
            }
        }
        let flux = state.flux_energy;
        Ok(EnergyBreakdown {
            kinetic,
            interaction,
            flux,
            total: kinetic + interaction + self.gamma() * flux,
        })
    }
}
