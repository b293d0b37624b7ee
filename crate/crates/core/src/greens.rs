//! Green and Robin functions.
//!
//! Sign conventions: `G(x, y) = ln|x - y| / (2 pi)` in the plane, so
//! `Delta G = delta` and `grad_x G` points away from `y`. Domain Green
//! functions split as `G_#(x, y) = G(x, y) + gbar_#(x, y)` with a smooth
//! harmonic (Dirichlet) or near-harmonic (Neumann) part, and the Robin
//! function is `R_#(x) = gbar_#(x, x)`.
//!
//! On the unit disk, with `D(x, y) = |x|^2 |y|^2 - 2 x.y + 1`:
//!
//! * `gbar_D = -ln(D) / (4 pi)`
//! * `gbar_N =  ln(D) / (4 pi) - (|x|^2 + |y|^2) / (4 pi)`
//!
//! The quadratic term of `gbar_N` carries a minus sign; with a plus sign the
//! normal derivative on the circle would not vanish.

use crate::bem::NystromSystem;
use crate::geometry::ConvexDomain;
use crate::{Error, Point, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

const INV_2PI: f64 = 0.5 / PI;
const INV_4PI: f64 = 0.25 / PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Dirichlet,
    Neumann,
}

impl Flavor {
    /// `(-1)^#`: -1 for Dirichlet, +1 for Neumann.
    pub fn image_sign(self) -> f64 {
        match self {
            Flavor::Dirichlet => -1.0,
            Flavor::Neumann => 1.0,
        }
    }
}

/// Free-space fundamental solution in dimension 2 or 3 (taken from the slice length).
pub fn fundamental_solution(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || !(x.len() == 2 || x.len() == 3) {
        return Err(Error::InvalidArgument("dimension must be 2 or 3".into()));
    }
    let r = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if r == 0.0 {
        return Err(Error::DiagonalSingularity);
    }
    Ok(if x.len() == 2 {
        r.ln() * INV_2PI
    } else {
        -INV_4PI / r
    })
}

#[inline]
pub fn log_kernel(x: &Point, y: &Point) -> f64 {
    0.5 * (x - y).norm_squared().ln() * INV_2PI
}

#[inline]
pub fn grad_log_kernel(x: &Point, y: &Point) -> Point {
    let d = x - y;
    d * (INV_2PI / d.norm_squared())
}

#[inline]
fn disk_d(x: &Point, y: &Point) -> f64 {
    x.norm_squared() * y.norm_squared() - 2.0 * x.dot(y) + 1.0
}

/// Harmonic part of the disk Green function (no input checks).
#[inline]
pub fn disk_harmonic(flavor: Flavor, x: &Point, y: &Point) -> f64 {
    let ld = disk_d(x, y).ln() * INV_4PI;
    match flavor {
        Flavor::Dirichlet => -ld,
        Flavor::Neumann => ld - (x.norm_squared() + y.norm_squared()) * INV_4PI,
    }
}

/// `grad_x` of [`disk_harmonic`].
#[inline]
pub fn disk_harmonic_grad(flavor: Flavor, x: &Point, y: &Point) -> Point {
    let g = (x * y.norm_squared() - y) * (INV_2PI / disk_d(x, y));
    match flavor {
        Flavor::Dirichlet => -g,
        Flavor::Neumann => g - x * INV_2PI,
    }
}

fn check_disk(x: &Point) -> Result<()> {
    if x.norm() > 1.0 + 1e-12 || !x.x.is_finite() || !x.y.is_finite() {
        return Err(Error::OutsideDomain);
    }
    Ok(())
}

pub fn disk_green(flavor: Flavor, x: &Point, y: &Point) -> Result<f64> {
    check_disk(x)?;
    check_disk(y)?;
    if x == y {
        return Err(Error::DiagonalSingularity);
    }
    Ok(log_kernel(x, y) + disk_harmonic(flavor, x, y))
}

pub fn disk_green_grad(flavor: Flavor, x: &Point, y: &Point) -> Result<Point> {
    check_disk(x)?;
    check_disk(y)?;
    if x == y {
        return Err(Error::DiagonalSingularity);
    }
    Ok(grad_log_kernel(x, y) + disk_harmonic_grad(flavor, x, y))
}

pub fn disk_robin(flavor: Flavor, x: &Point) -> Result<f64> {
    let r2 = x.norm_squared();
    if !(r2 < 1.0) {
        return Err(Error::OutsideDomain);
    }
    let l = (1.0 - r2).ln() * INV_2PI;
    Ok(match flavor {
        Flavor::Dirichlet => -l,
        Flavor::Neumann => l - r2 * INV_2PI,
    })
}

pub fn disk_robin_grad(flavor: Flavor, x: &Point) -> Result<Point> {
    let r2 = x.norm_squared();
    if !(r2 < 1.0) {
        return Err(Error::OutsideDomain);
    }
    let g = x / (PI * (1.0 - r2));
    Ok(match flavor {
        Flavor::Dirichlet => g,
        Flavor::Neumann => -g - x / PI,
    })
}

fn check_half(x: &[f64]) -> Result<()> {
    if !(x.len() == 2 || x.len() == 3) {
        return Err(Error::InvalidArgument("dimension must be 2 or 3".into()));
    }
    if !(x[0] >= 0.0) {
        return Err(Error::OutsideDomain);
    }
    Ok(())
}

/// Green function of the half-space `{x_1 > 0}` by the method of images.
pub fn halfspace_green(flavor: Flavor, x: &[f64], y: &[f64]) -> Result<f64> {
    check_half(x)?;
    check_half(y)?;
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let mut ym = y.to_vec();
    ym[0] = -ym[0];
    Ok(fundamental_solution(x, y)? + flavor.image_sign() * fundamental_solution(x, &ym)?)
}

/// Half-space Robin function; depends on `x_1` only.
pub fn halfspace_robin(flavor: Flavor, x: &[f64]) -> Result<f64> {
    check_half(x)?;
    if x[0] <= 0.0 {
        return Err(Error::OutsideDomain);
    }
    let mut xm = x.to_vec();
    xm[0] = -xm[0];
    Ok(flavor.image_sign() * fundamental_solution(x, &xm)?)
}

fn halfspace_green_grad(flavor: Flavor, x: &Point, y: &Point) -> Point {
    let ym = Point::new(-y.x, y.y);
    grad_log_kernel(x, y) + grad_log_kernel(x, &ym) * flavor.image_sign()
}

#[inline]
fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

#[inline]
fn smoothstep_prime(u: f64) -> f64 {
    30.0 * u * u * (1.0 - u) * (1.0 - u)
}

/// Quintic smoothstep cutoff: `chi = 1` on `[0, 1]`, `0` on `[2, inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub scale: f64,
}

impl CutoffProfile {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cutoff scale must be positive, got {scale}"
            )));
        }
        Ok(Self { scale })
    }

    pub fn chi(t: f64) -> f64 {
        1.0 - smoothstep((t - 1.0).clamp(0.0, 1.0))
    }

    pub fn chi_prime(t: f64) -> f64 {
        if t <= 1.0 || t >= 2.0 {
            0.0
        } else {
            -smoothstep_prime(t - 1.0)
        }
    }

    /// `1 - chi(r / scale)`.
    #[inline]
    pub fn tilde(&self, r: f64) -> f64 {
        smoothstep((r / self.scale - 1.0).clamp(0.0, 1.0))
    }

    #[inline]
    pub fn tilde_prime(&self, r: f64) -> f64 {
        let u = r / self.scale - 1.0;
        if u <= 0.0 || u >= 1.0 {
            0.0
        } else {
            smoothstep_prime(u) / self.scale
        }
    }

    /// `G(x, y) * tilde(|x - y|)`.
    #[inline]
    pub fn singular_part(&self, x: &Point, y: &Point) -> f64 {
        let r = (x - y).norm();
        if r <= self.scale {
            0.0
        } else if r >= 2.0 * self.scale {
            r.ln() * INV_2PI
        } else {
            r.ln() * INV_2PI * self.tilde(r)
        }
    }

    /// `grad_x` of [`CutoffProfile::singular_part`].
    #[inline]
    pub fn singular_part_grad(&self, x: &Point, y: &Point) -> Point {
        let d = x - y;
        let r = d.norm();
        if r <= self.scale {
            return Point::zeros();
        }
        if r >= 2.0 * self.scale {
            return d * (INV_2PI / (r * r));
        }
        let t = self.tilde(r);
        let tp = self.tilde_prime(r);
        d * ((t / r + r.ln() * tp) * INV_2PI / r)
    }
}

#[derive(Clone, Debug)]
pub enum Backend {
    ExactDisk,
    ExactHalfSpace,
    Bem(Arc<NystromSystem>),
}

/// Green function engine for one domain and boundary flavor.
#[derive(Clone, Debug)]
pub struct GreenEvaluator {
    flavor: Flavor,
    backend: Backend,
    domain: Option<Arc<ConvexDomain>>,
}

impl GreenEvaluator {
    pub fn exact_disk(flavor: Flavor) -> Self {
        Self {
            flavor,
            backend: Backend::ExactDisk,
            domain: Some(Arc::new(ConvexDomain::unit_disk())),
        }
    }

    pub fn half_space(flavor: Flavor) -> Self {
        Self {
            flavor,
            backend: Backend::ExactHalfSpace,
            domain: None,
        }
    }

    pub fn bem(system: Arc<NystromSystem>) -> Self {
        Self {
            flavor: system.flavor(),
            domain: Some(system.domain().clone()),
            backend: Backend::Bem(system),
        }
    }

    /// Exact backend for the unit disk, Nyström backend with `n_b` nodes otherwise.
    pub fn for_domain(domain: Arc<ConvexDomain>, flavor: Flavor, n_b: usize) -> Result<Self> {
        if domain.is_unit_disk() {
            Ok(Self {
                flavor,
                backend: Backend::ExactDisk,
                domain: Some(domain),
            })
        } else {
            let sys = NystromSystem::assemble(domain, flavor, n_b)?;
            Ok(Self::bem(Arc::new(sys)))
        }
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn domain(&self) -> Option<&Arc<ConvexDomain>> {
        self.domain.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.backend, Backend::Bem(_))
    }

    /// `|Omega|`, infinite for the half-plane.
    pub fn neumann_volume(&self) -> f64 {
        self.domain.as_ref().map_or(f64::INFINITY, |d| d.area())
    }

    fn check(&self, x: &Point) -> Result<()> {
        match &self.backend {
            Backend::ExactDisk => check_disk(x),
            Backend::ExactHalfSpace => check_half(x.as_slice()),
            Backend::Bem(sys) => {
                if sys.domain().signed_distance(x) > 1e-12 {
                    Err(Error::OutsideDomain)
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn green(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        if x == y {
            return Err(Error::DiagonalSingularity);
        }
        Ok(log_kernel(x, y) + self.harmonic(x, y)?)
    }

    /// `grad_x G_#(x, y)`.
    pub fn grad_green(&self, x: &Point, y: &Point) -> Result<Point> {
        self.check(x)?;
        self.check(y)?;
        if x == y {
            return Err(Error::DiagonalSingularity);
        }
        Ok(grad_log_kernel(x, y) + self.grad_harmonic(x, y)?)
    }

    /// `gbar_#(x, y)`; finite on the diagonal.
    pub fn harmonic(&self, x: &Point, y: &Point) -> Result<f64> {
        match &self.backend {
            Backend::ExactDisk => Ok(disk_harmonic(self.flavor, x, y)),
            Backend::ExactHalfSpace => {
                let ym = Point::new(-y.x, y.y);
                Ok(self.flavor.image_sign() * log_kernel(x, &ym))
            }
            Backend::Bem(sys) => sys.harmonic(x, y),
        }
    }

    /// `grad_x gbar_#(x, y)`.
    pub fn grad_harmonic(&self, x: &Point, y: &Point) -> Result<Point> {
        match &self.backend {
            Backend::ExactDisk => Ok(disk_harmonic_grad(self.flavor, x, y)),
            Backend::ExactHalfSpace => {
                Ok(halfspace_green_grad(self.flavor, x, y) - grad_log_kernel(x, y))
            }
            Backend::Bem(sys) => sys.grad_harmonic(x, y),
        }
    }

    pub fn robin(&self, x: &Point) -> Result<f64> {
        match &self.backend {
            Backend::ExactDisk => disk_robin(self.flavor, x),
            Backend::ExactHalfSpace => halfspace_robin(self.flavor, x.as_slice()),
            Backend::Bem(sys) => sys.robin(x),
        }
    }

    /// `grad R_#(x) = 2 grad_x gbar_#(x, x)` by symmetry of `gbar_#`.
    pub fn grad_robin(&self, x: &Point) -> Result<Point> {
        match &self.backend {
            Backend::ExactDisk => disk_robin_grad(self.flavor, x),
            Backend::ExactHalfSpace => {
                check_half(x.as_slice())?;
                if x.x <= 0.0 {
                    return Err(Error::OutsideDomain);
                }
                Ok(Point::new(self.flavor.image_sign() * INV_2PI / x.x, 0.0))
            }
            Backend::Bem(sys) => Ok(sys.grad_harmonic(x, x)? * 2.0),
        }
    }

    pub fn cutoff_green(&self, profile: &CutoffProfile, x: &Point, y: &Point) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(profile.singular_part(x, y) + self.harmonic(x, y)?)
    }

    pub fn grad_cutoff_green(&self, profile: &CutoffProfile, x: &Point, y: &Point) -> Result<Point> {
        self.check(x)?;
        self.check(y)?;
        Ok(profile.singular_part_grad(x, y) + self.grad_harmonic(x, y)?)
    }
}
