//! Boundary densities and the potentials `U(x) = int G_#(x, y) h(y) dS_y` they generate.

use crate::bem::NystromSystem;
use crate::geometry::ConvexDomain;
use crate::greens::{Backend, Flavor, GreenEvaluator};
use crate::{Error, Point, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Density per unit arc length, as a function of the boundary parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryDensity {
    Zero,
    /// Constant density with the given total `int h dS`.
    Uniform { total: f64 },
    /// `c0 + sum_m a_m cos(m mu) + b_m sin(m mu)`, stored `[c0, a1, b1, ...]`.
    Fourier { coeffs: Vec<f64> },
}

impl BoundaryDensity {
    pub fn value(&self, domain: &ConvexDomain, mu: f64) -> f64 {
        match self {
            BoundaryDensity::Zero => 0.0,
            BoundaryDensity::Uniform { total } => total / domain.perimeter(),
            BoundaryDensity::Fourier { coeffs } => {
                let mut v = coeffs.first().copied().unwrap_or(0.0);
                for (k, pair) in coeffs.get(1..).unwrap_or(&[]).chunks(2).enumerate() {
                    let m = (k + 1) as f64;
                    v += pair[0] * (m * mu).cos() + pair.get(1).copied().unwrap_or(0.0) * (m * mu).sin();
                }
                v
            }
        }
    }

    /// `int h dS`.
    pub fn total(&self, domain: &ConvexDomain) -> f64 {
        match self {
            BoundaryDensity::Zero => 0.0,
            BoundaryDensity::Uniform { total } => *total,
            BoundaryDensity::Fourier { .. } => {
                let n = 4096;
                let h = TAU / n as f64;
                (0..n)
                    .map(|i| {
                        let mu = i as f64 * h;
                        self.value(domain, mu) * domain.boundary_derivative(mu).norm() * h
                    })
                    .sum()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BoundaryDensity::Zero => true,
            BoundaryDensity::Uniform { total } => *total == 0.0,
            BoundaryDensity::Fourier { coeffs } => coeffs.iter().all(|c| *c == 0.0),
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Zero,
    /// Closed form on the unit disk.
    Disk { c0: f64, modes: Vec<(f64, f64)> },
    Bem {
        system: Arc<NystromSystem>,
        density: Vec<f64>,
        c: f64,
        ubar: f64,
    },
}

/// `U(x) = int G_#(x, y) h(y) dS_y`; identically zero for Dirichlet.
#[derive(Clone, Debug)]
pub struct BoundaryPotential {
    kind: Kind,
}

impl BoundaryPotential {
    pub fn zero() -> Self {
        Self { kind: Kind::Zero }
    }

    pub fn new(evaluator: &GreenEvaluator, density: &BoundaryDensity) -> Result<Self> {
        if evaluator.flavor() == Flavor::Dirichlet || density.is_zero() {
            return Ok(Self::zero());
        }
        match evaluator.backend() {
            Backend::ExactDisk => {
                let (c0, rest) = match density {
                    BoundaryDensity::Uniform { total } => (total / TAU, Vec::new()),
                    BoundaryDensity::Fourier { coeffs } => (coeffs[0], coeffs[1..].to_vec()),
                    BoundaryDensity::Zero => unreachable!(),
                };
                let modes = rest
                    .chunks(2)
                    .map(|p| (p[0], p.get(1).copied().unwrap_or(0.0)))
                    .collect();
                Ok(Self {
                    kind: Kind::Disk { c0, modes },
                })
            }
            Backend::ExactHalfSpace => Err(Error::InvalidArgument(
                "boundary densities are not supported on the half-plane".into(),
            )),
            Backend::Bem(sys) => {
                let domain = sys.domain();
                let h: Vec<f64> = sys
                    .nodes()
                    .mu
                    .iter()
                    .map(|&mu| density.value(domain, mu))
                    .collect();
                let (k, c, ubar) = sys.neumann_boundary_solve(&h)?;
                Ok(Self {
                    kind: Kind::Bem {
                        system: sys.clone(),
                        density: k,
                        c,
                        ubar,
                    },
                })
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        match &self.kind {
            Kind::Zero => Ok(0.0),
            Kind::Disk { c0, modes } => {
                let mut u = -0.5 * c0 * (x.norm_squared() + 1.0);
                let (mut re, mut im) = (1.0, 0.0);
                for (m, (a, b)) in modes.iter().enumerate() {
                    let (r2, i2) = (re * x.x - im * x.y, re * x.y + im * x.x);
                    re = r2;
                    im = i2;
                    u -= (a * re + b * im) / (m + 1) as f64;
                }
                Ok(u)
            }
            Kind::Bem {
                system,
                density,
                c,
                ubar,
            } => {
                system.check_eval_point(x)?;
                Ok(-(0.25 * c * x.norm_squared() + system.layer_value(density, x) - ubar))
            }
        }
    }

    pub fn grad(&self, x: &Point) -> Result<Point> {
        match &self.kind {
            Kind::Zero => Ok(Point::zeros()),
            Kind::Disk { c0, modes } => {
                let mut g = -x * *c0;
                // w = z^(m-1)
                let (mut re, mut im) = (1.0, 0.0);
                for (a, b) in modes {
                    g -= Point::new(a * re + b * im, -a * im + b * re);
                    let (r2, i2) = (re * x.x - im * x.y, re * x.y + im * x.x);
                    re = r2;
                    im = i2;
                }
                Ok(g)
            }
            Kind::Bem {
                system, density, c, ..
            } => {
                system.check_eval_point(x)?;
                Ok(-(x * (0.5 * c) + system.layer_gradient(density, x)))
            }
        }
    }
}
