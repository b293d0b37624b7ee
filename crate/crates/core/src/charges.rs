//! Point charges: state, forces, velocity-Verlet stepping and energy.
//!
//! Charge `alpha` is accelerated by
//! `E(xi_a) + sum_{b != a} grad_x G_#(xi_a, xi_b) + grad H_#(xi_a)` where
//! `H_# = R_# / 2 - int G_#(., y) h_cha(y) dS_y`.

use crate::boundary::{BoundaryDensity, BoundaryPotential};
use crate::greens::{CutoffProfile, Flavor, GreenEvaluator};
use crate::{Error, Point, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Relative distance (in units of the inradius) below which the ODE is not continued.
pub const CONTINUATION_FRACTION: f64 = 1e-6;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChargeState {
    pub xi: Vec<Point>,
    pub eta: Vec<Point>,
}

impl ChargeState {
    pub fn new(xi: Vec<Point>, eta: Vec<Point>) -> Result<Self> {
        if xi.len() != eta.len() {
            return Err(Error::InvalidArgument(
                "charge positions and velocities differ in length".into(),
            ));
        }
        Ok(Self { xi, eta })
    }

    pub fn at_rest(xi: Vec<Point>) -> Self {
        let eta = vec![Point::zeros(); xi.len()];
        Self { xi, eta }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
}

/// Everything needed to evaluate charge forces and energies.
#[derive(Clone, Debug)]
pub struct ChargeModel {
    evaluator: Arc<GreenEvaluator>,
    h_cha: BoundaryPotential,
    cutoff: Option<CutoffProfile>,
}

impl ChargeModel {
    /// For Neumann walls the boundary density must integrate to `m`.
    pub fn new(evaluator: Arc<GreenEvaluator>, h_cha: &BoundaryDensity, m: usize) -> Result<Self> {
        let h_cha = match evaluator.flavor() {
            Flavor::Dirichlet => BoundaryPotential::zero(),
            Flavor::Neumann => {
                let total = match evaluator.domain() {
                    Some(d) => h_cha.total(d),
                    None => 0.0,
                };
                if (total - m as f64).abs() > 1e-8 {
                    return Err(Error::ChargeCompatibility {
                        total,
                        expected: m as f64,
                    });
                }
                BoundaryPotential::new(&evaluator, h_cha)?
            }
        };
        Ok(Self {
            evaluator,
            h_cha,
            cutoff: None,
        })
    }

    /// Charge-charge interaction through `G^sigma` instead of `G`.
    pub fn with_cutoff(mut self, profile: CutoffProfile) -> Self {
        self.cutoff = Some(profile);
        self
    }

    pub fn evaluator(&self) -> &Arc<GreenEvaluator> {
        &self.evaluator
    }

    pub fn boundary_potential(&self) -> &BoundaryPotential {
        &self.h_cha
    }

    /// `H_#(x)`.
    pub fn h_value(&self, x: &Point) -> Result<f64> {
        Ok(0.5 * self.evaluator.robin(x)? - self.h_cha.value(x)?)
    }

    /// `grad H_#(x)`.
    pub fn grad_h(&self, x: &Point) -> Result<Point> {
        Ok(self.evaluator.grad_robin(x)? * 0.5 - self.h_cha.grad(x)?)
    }

    fn pair_grad(&self, x: &Point, y: &Point) -> Result<Point> {
        match &self.cutoff {
            Some(p) => self.evaluator.grad_cutoff_green(p, x, y),
            None => self.evaluator.grad_green(x, y),
        }
    }

    fn pair_green(&self, x: &Point, y: &Point) -> Result<f64> {
        match &self.cutoff {
            Some(p) => self.evaluator.cutoff_green(p, x, y),
            None => self.evaluator.green(x, y),
        }
    }

    pub fn check_continuation(&self, state: &ChargeState) -> Result<()> {
        if let Some(dom) = self.evaluator.domain() {
            let tol = CONTINUATION_FRACTION * dom.inradius();
            for (a, x) in state.xi.iter().enumerate() {
                let sd = dom.signed_distance(x);
                if sd >= 0.0 {
                    return Err(Error::ChargeReachedBoundary(a));
                }
                if -sd < tol {
                    return Err(Error::Continuation(format!(
                        "charge {a} within {tol:e} of the boundary"
                    )));
                }
            }
            for a in 0..state.len() {
                for b in a + 1..state.len() {
                    if (state.xi[a] - state.xi[b]).norm() < tol {
                        return Err(Error::Continuation(format!(
                            "charges {a} and {b} within {tol:e} of each other"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Acceleration of charge `alpha`; `plasma` returns the plasma field at a point.
    pub fn force(
        &self,
        state: &ChargeState,
        alpha: usize,
        plasma: Option<&dyn Fn(&Point) -> Result<Point>>,
    ) -> Result<Point> {
        self.check_continuation(state)?;
        self.force_unchecked(state, alpha, plasma)
    }

    fn force_unchecked(
        &self,
        state: &ChargeState,
        alpha: usize,
        plasma: Option<&dyn Fn(&Point) -> Result<Point>>,
    ) -> Result<Point> {
        let x = state.xi[alpha];
        let mut f = match plasma {
            Some(e) => e(&x)?,
            None => Point::zeros(),
        };
        for (b, y) in state.xi.iter().enumerate() {
            if b != alpha {
                f += self.pair_grad(&x, y)?;
            }
        }
        Ok(f + self.grad_h(&x)?)
    }

    /// Accelerations of all charges without plasma.
    pub fn forces(&self, state: &ChargeState) -> Result<Vec<Point>> {
        self.check_continuation(state)?;
        (0..state.len())
            .map(|a| self.force_unchecked(state, a, None))
            .collect()
    }

    /// One velocity-Verlet step of the plasma-free charge system.
    pub fn step(
        &self,
        state: &ChargeState,
        forces: &[Point],
        dt: f64,
    ) -> Result<(ChargeState, Vec<Point>)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        let mut next = state.clone();
        for a in 0..state.len() {
            next.eta[a] += forces[a] * (0.5 * dt);
            next.xi[a] += next.eta[a] * dt;
        }
        if let Some(dom) = self.evaluator.domain() {
            for (a, x) in next.xi.iter().enumerate() {
                if dom.signed_distance(x) >= 0.0 {
                    return Err(Error::ChargeReachedBoundary(a));
                }
            }
        }
        let f = self.forces(&next)?;
        for a in 0..state.len() {
            next.eta[a] += f[a] * (0.5 * dt);
        }
        Ok((next, f))
    }

    /// `sum_a (|eta_a|^2 / 2 - H(xi_a)) - 1/2 sum_{a != b} G(xi_a, xi_b)`.
    pub fn energy(&self, state: &ChargeState) -> Result<f64> {
        let mut e = 0.0;
        for a in 0..state.len() {
            e += 0.5 * state.eta[a].norm_squared() - self.h_value(&state.xi[a])?;
            for b in a + 1..state.len() {
                e -= self.pair_green(&state.xi[a], &state.xi[b])?;
            }
        }
        Ok(e)
    }
}
