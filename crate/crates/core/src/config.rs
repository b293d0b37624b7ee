//! Declarative run configuration (TOML).
//!
//! ```toml
//! flavor = "neumann"
//! boundary_rule = "reflection"
//! dt = 5e-4
//! t_end = 1.0
//! h_n = "uniform"          # or { kind = "fourier", coeffs = [...] }
//! h_cha = "uniform"
//!
//! [domain]
//! shape = "disk"
//!
//! [[charges]]
//! xi = [0.5, 0.0]
//! eta = [0.0, 0.0]
//!
//! [[plasma]]
//! x = [-0.7, -0.1]
//! y = [-0.3, 0.3]
//! vx = [-1.0, 1.0]
//! vy = [-1.0, 1.0]
//! weight = 1.0
//! count = 2000
//! ```
//!
//! The preset `"uniform"` spreads the compatible total evenly over the wall:
//! the plasma weight for `h_n`, the number of charges for `h_cha`.

use crate::boundary::BoundaryDensity;
use crate::geometry::{ConvexDomain, Shape};
use crate::greens::Flavor;
use crate::plasma::{BoundaryRule, PhaseBox};
use crate::{Error, Point, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Tolerance of both compatibility conditions.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    Preset(String),
    Explicit(BoundaryDensity),
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec::Preset("uniform".into())
    }
}

impl DensitySpec {
    /// Concrete density; `total` is the compatible value used by presets.
    pub fn resolve(&self, total: f64) -> Result<BoundaryDensity> {
        match self {
            DensitySpec::Explicit(d) => Ok(d.clone()),
            DensitySpec::Preset(name) => match name.as_str() {
                "uniform" => Ok(if total == 0.0 {
                    BoundaryDensity::Zero
                } else {
                    BoundaryDensity::Uniform { total }
                }),
                "zero" => Ok(BoundaryDensity::Zero),
                other => Err(Error::Parse(format!("unknown boundary density preset {other:?}"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeSpec {
    pub xi: Point,
    #[serde(default = "Point::zeros")]
    pub eta: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsToggles {
    /// Energy moments `H_2, H_4` and singular moments `L_0, L_2`.
    pub moments: bool,
    /// Velocity-lemma monitor; only meaningful for Neumann walls.
    pub beta: bool,
}

impl Default for DiagnosticsToggles {
    fn default() -> Self {
        Self {
            moments: true,
            beta: true,
        }
    }
}

fn default_stride() -> usize {
    10
}

fn default_k1() -> f64 {
    1.0
}

fn default_delta1() -> f64 {
    0.05
}

fn default_bem_nodes() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub flavor: Flavor,
    pub boundary_rule: BoundaryRule,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_delta1")]
    pub delta1: f64,
    #[serde(default = "default_bem_nodes")]
    pub bem_nodes: usize,
    /// Particle snapshot interval in steps (0 = off).
    #[serde(default)]
    pub snapshot_every: usize,
    /// Short-range cutoff scale for plasma-plasma pairs (0 = exact kernel).
    #[serde(default)]
    pub softening: f64,
    #[serde(default)]
    pub h_n: DensitySpec,
    #[serde(default)]
    pub h_cha: DensitySpec,
    pub domain: Shape,
    #[serde(default)]
    pub charges: Vec<ChargeSpec>,
    #[serde(default)]
    pub plasma: Vec<PhaseBox>,
    #[serde(default)]
    pub diagnostics: DiagnosticsToggles,
}

fn invalid(condition: &'static str, message: impl Into<String>) -> Error {
    Error::Config {
        condition,
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn plasma_weight(&self) -> f64 {
        self.plasma.iter().map(|b| b.weight).sum()
    }

    /// Plasma wall data; always zero for Dirichlet walls.
    pub fn h_n_density(&self) -> Result<BoundaryDensity> {
        match self.flavor {
            Flavor::Dirichlet => Ok(BoundaryDensity::Zero),
            Flavor::Neumann => self.h_n.resolve(self.plasma_weight()),
        }
    }

    /// Charge wall data; always zero for Dirichlet walls.
    pub fn h_cha_density(&self) -> Result<BoundaryDensity> {
        match self.flavor {
            Flavor::Dirichlet => Ok(BoundaryDensity::Zero),
            Flavor::Neumann => self.h_cha.resolve(self.charges.len() as f64),
        }
    }

    pub fn build_domain(&self) -> Result<ConvexDomain> {
        ConvexDomain::new(self.domain.clone()).map_err(|e| invalid("convex-domain", e.to_string()))
    }

    /// Check every condition; the error names the first violated one.
    pub fn validate(&self) -> Result<ConvexDomain> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("run-parameters", "dt must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("run-parameters", "t_end must be positive"));
        }
        if self.output_stride == 0 {
            return Err(invalid("run-parameters", "output_stride must be at least 1"));
        }
        if !(self.k1 > 0.0) {
            return Err(invalid("run-parameters", "k1 must be positive"));
        }
        if !(self.softening >= 0.0 && self.softening.is_finite()) {
            return Err(invalid("run-parameters", "softening must be non-negative"));
        }
        let domain = self.build_domain()?;
        for (b, bx) in self.plasma.iter().enumerate() {
            let r = [bx.x, bx.y, bx.vx, bx.vy];
            if r.iter().any(|r| !(r[1] > r[0])) || bx.count == 0 || !(bx.weight > 0.0) {
                return Err(invalid(
                    "initial-data",
                    format!("plasma box {b} needs nonempty ranges, a positive weight and count"),
                ));
            }
        }
        if self.flavor == Flavor::Neumann {
            let density = self.h_n_density()?;
            let total = density.total(&domain);
            let weight = self.plasma_weight();
            if (total - weight).abs() > COMPATIBILITY_TOL {
                return Err(invalid(
                    "neumann-compatibility",
                    format!("plasma weight {weight} differs from the wall integral of h_n {total}"),
                ));
            }
            let density = self.h_cha_density()?;
            let total = density.total(&domain);
            let m = self.charges.len() as f64;
            if (total - m).abs() > COMPATIBILITY_TOL {
                return Err(invalid(
                    "charge-compatibility",
                    format!("wall integral of h_cha is {total}, expected {m}"),
                ));
            }
        }
        self.check_separation(&domain)?;
        Ok(domain)
    }

    /// Plasma support, charges and wall pairwise at least `delta1` apart.
    fn check_separation(&self, domain: &ConvexDomain) -> Result<()> {
        let d1 = self.delta1;
        if !(d1 > 0.0) {
            return Err(invalid("initial-singular-sets", "delta1 must be positive"));
        }
        for (b, bx) in self.plasma.iter().enumerate() {
            // Distance to the wall is concave inside a convex domain, so the corners decide.
            for x in [bx.x[0], bx.x[1]] {
                for y in [bx.y[0], bx.y[1]] {
                    if -domain.signed_distance(&Point::new(x, y)) < d1 {
                        return Err(invalid(
                            "initial-singular-sets",
                            format!("plasma box {b} is closer than {d1} to the boundary"),
                        ));
                    }
                }
            }
        }
        for (a, c) in self.charges.iter().enumerate() {
            if -domain.signed_distance(&c.xi) < d1 {
                return Err(invalid(
                    "initial-singular-sets",
                    format!("charge {a} is closer than {d1} to the boundary"),
                ));
            }
            for (b, other) in self.charges.iter().enumerate().skip(a + 1) {
                if (c.xi - other.xi).norm() < d1 {
                    return Err(invalid(
                        "initial-singular-sets",
                        format!("charges {a} and {b} are closer than {d1}"),
                    ));
                }
            }
            for (b, bx) in self.plasma.iter().enumerate() {
                let dx = (bx.x[0] - c.xi.x).max(c.xi.x - bx.x[1]).max(0.0);
                let dy = (bx.y[0] - c.xi.y).max(c.xi.y - bx.y[1]).max(0.0);
                if dx.hypot(dy) < d1 {
                    return Err(invalid(
                        "initial-singular-sets",
                        format!("charge {a} is closer than {d1} to plasma box {b}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn default_c_cut() -> f64 {
    1.0
}

fn default_epsilons() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}

/// Input of `sim desing-sweep`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub flavor: Flavor,
    pub domain: Shape,
    #[serde(default = "default_bem_nodes")]
    pub bem_nodes: usize,
    #[serde(default)]
    pub h_cha: DensitySpec,
    pub charges: Vec<ChargeSpec>,
    pub particles_per_blob: usize,
    #[serde(default = "default_c_cut")]
    pub c_cut: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn spec(&self) -> crate::desingularization::SweepSpec {
        crate::desingularization::SweepSpec {
            centers: self.charges.iter().map(|c| (c.xi, c.eta)).collect(),
            particles_per_blob: self.particles_per_blob,
            c_cut: self.c_cut,
            t_end: self.t_end,
            dt: self.dt,
        }
    }

    pub fn h_cha_density(&self) -> Result<BoundaryDensity> {
        match self.flavor {
            Flavor::Dirichlet => Ok(BoundaryDensity::Zero),
            Flavor::Neumann => self.h_cha.resolve(self.charges.len() as f64),
        }
    }

    pub fn evaluator(&self) -> Result<crate::greens::GreenEvaluator> {
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.c_cut > 0.0) {
            return Err(invalid("run-parameters", "dt, t_end and c_cut must be positive"));
        }
        let domain = ConvexDomain::new(self.domain.clone())
            .map_err(|e| invalid("convex-domain", e.to_string()))?;
        crate::greens::GreenEvaluator::for_domain(std::sync::Arc::new(domain), self.flavor, self.bem_nodes)
    }
}
