//! Smooth, strictly convex planar domains.
//!
//! Every shape is described through its boundary parameterisation
//! `mu -> x(mu)` and its support function `h(theta)`. Signed distances come
//! from the support function: for a convex body `K`,
//! `sd(x) = max_theta (x . u(theta) - h(theta))`, exact on both sides of the
//! boundary, and the maximiser is the outward normal angle of the nearest
//! boundary point.

use crate::{Error, Point, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

const SCAN: usize = 64;
const CURVATURE_SCAN: usize = 4096;

/// Shape description as it appears in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Disk,
    Ellipse { a: f64, b: f64 },
    /// Support function `p(theta) = c0 + sum_k a_k cos(k theta) + b_k sin(k theta)`,
    /// stored as `[c0, a1, b1, a2, b2, ...]`.
    Fourier { coeffs: Vec<f64> },
}

/// Nearest-point data for a query point.
#[derive(Clone, Copy, Debug)]
pub struct Nearest {
    /// Negative inside, positive outside.
    pub signed_distance: f64,
    /// Outward unit normal at the nearest boundary point.
    pub normal: Point,
    pub point: Point,
    pub mu: f64,
}

/// Boundary-collar coordinates of a phase-space point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    pub mu: f64,
    pub x_perp: f64,
    pub v_perp: f64,
    pub v_tan: f64,
}

/// Equispaced-in-parameter boundary nodes with trapezoidal arc-length weights.
#[derive(Clone, Debug)]
pub struct BoundaryQuadrature {
    pub mu: Vec<f64>,
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    /// `|x'(mu)|`
    pub speed: Vec<f64>,
    pub curvature: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ConvexDomain {
    shape: Shape,
    area: f64,
    perimeter: f64,
    inradius: f64,
    incenter: Point,
    max_curvature: f64,
    collar: f64,
    scan_cos: Vec<f64>,
    scan_sin: Vec<f64>,
    scan_support: Vec<f64>,
}

#[inline]
fn unit(theta: f64) -> Point {
    Point::new(theta.cos(), theta.sin())
}

#[inline]
fn perp(u: Point) -> Point {
    Point::new(-u.y, u.x)
}

/// Mirror `v` across the line with unit normal `n`.
#[inline]
pub fn reflect_across(n: &Point, v: &Point) -> Point {
    v - n * (2.0 * v.dot(n))
}

/// Fourier series value and first three derivatives.
fn fourier_derivs(coeffs: &[f64], theta: f64) -> [f64; 4] {
    let mut d = [coeffs[0], 0.0, 0.0, 0.0];
    for (k, pair) in coeffs[1..].chunks(2).enumerate() {
        let k = (k + 1) as f64;
        let a = pair[0];
        let b = pair.get(1).copied().unwrap_or(0.0);
        let (s, c) = (k * theta).sin_cos();
        let v = a * c + b * s;
        let dv = k * (-a * s + b * c);
        d[0] += v;
        d[1] += dv;
        d[2] -= k * k * v;
        d[3] -= k * k * dv;
    }
    d
}

impl ConvexDomain {
    pub fn unit_disk() -> Self {
        Self::new(Shape::Disk).expect("unit disk is valid")
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(Shape::Ellipse { a, b })
    }

    pub fn new(shape: Shape) -> Result<Self> {
        match &shape {
            Shape::Disk => {}
            Shape::Ellipse { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                    return Err(Error::InvalidDomain(format!(
                        "ellipse semi-axes must be positive, got a={a}, b={b}"
                    )));
                }
            }
            Shape::Fourier { coeffs } => {
                if coeffs.is_empty() || coeffs.len() % 2 == 0 {
                    return Err(Error::InvalidDomain(
                        "fourier coeffs must be [c0, a1, b1, ...] (odd length)".into(),
                    ));
                }
                if coeffs.iter().any(|c| !c.is_finite()) || coeffs[0] <= 0.0 {
                    return Err(Error::InvalidDomain("fourier c0 must be positive".into()));
                }
            }
        }
        let mut dom = ConvexDomain {
            shape,
            area: 0.0,
            perimeter: 0.0,
            inradius: 0.0,
            incenter: Point::zeros(),
            max_curvature: 0.0,
            collar: 0.0,
            scan_cos: Vec::new(),
            scan_sin: Vec::new(),
            scan_support: Vec::new(),
        };

        let mut kmax = f64::NEG_INFINITY;
        let mut area = 0.0;
        let mut perimeter = 0.0;
        let mut centroid = Point::zeros();
        let h = TAU / CURVATURE_SCAN as f64;
        for i in 0..CURVATURE_SCAN {
            let mu = i as f64 * h;
            let x = dom.boundary_point(mu);
            let d1 = dom.boundary_derivative(mu);
            let d2 = dom.boundary_second_derivative(mu);
            let speed = d1.norm();
            let cross = match &dom.shape {
                // x' = (p + p'') t, so the cross product alone cannot see the sign of p + p''
                Shape::Fourier { coeffs } => {
                    let d = fourier_derivs(coeffs, mu);
                    (d[0] + d[2]) * speed * speed
                }
                _ => d1.x * d2.y - d1.y * d2.x,
            };
            if !(cross > 0.0) || !(speed > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "boundary is not strictly convex near mu={mu:.4}"
                )));
            }
            kmax = kmax.max(cross / speed.powi(3));
            let da = 0.5 * (x.x * d1.y - x.y * d1.x) * h;
            area += da;
            centroid += x * (2.0 / 3.0 * da);
            perimeter += speed * h;
        }
        dom.area = area;
        dom.perimeter = perimeter;
        dom.max_curvature = kmax;

        for i in 0..SCAN {
            let theta = TAU * i as f64 / SCAN as f64;
            let (s, c) = theta.sin_cos();
            dom.scan_cos.push(c);
            dom.scan_sin.push(s);
            dom.scan_support.push(dom.support(theta)[0]);
        }

        let (center, r) = match &dom.shape {
            Shape::Disk => (Point::zeros(), 1.0),
            Shape::Ellipse { a, b } => (Point::zeros(), a.min(*b)),
            Shape::Fourier { .. } => dom.find_incenter(centroid / area),
        };
        dom.incenter = center;
        dom.inradius = r;
        dom.collar = (0.2 * r).min(1.0 / (2.0 + 2.0 * kmax));
        Ok(dom)
    }

    /// Compass search for the point deepest inside the domain.
    fn find_incenter(&self, start: Point) -> (Point, f64) {
        let mut x = start;
        let mut best = -self.signed_distance(&x);
        let mut step = 0.25 * best.max(1e-3);
        let dirs = [
            Point::new(1.0, 0.0),
            Point::new(-1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(0.0, -1.0),
            Point::new(0.5f64.sqrt(), 0.5f64.sqrt()),
            Point::new(-(0.5f64.sqrt()), 0.5f64.sqrt()),
            Point::new(0.5f64.sqrt(), -(0.5f64.sqrt())),
            Point::new(-(0.5f64.sqrt()), -(0.5f64.sqrt())),
        ];
        while step > 1e-13 {
            let mut moved = false;
            for d in &dirs {
                let y = x + d * step;
                let v = -self.signed_distance(&y);
                if v > best {
                    best = v;
                    x = y;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        (x, best)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn is_unit_disk(&self) -> bool {
        matches!(self.shape, Shape::Disk)
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    pub fn incenter(&self) -> Point {
        self.incenter
    }

    pub fn max_curvature(&self) -> f64 {
        self.max_curvature
    }

    /// Collar width `delta_0`.
    pub fn collar(&self) -> f64 {
        self.collar
    }

    /// Support function and its first two derivatives.
    pub fn support(&self, theta: f64) -> [f64; 3] {
        match &self.shape {
            Shape::Disk => [1.0, 0.0, 0.0],
            Shape::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                let q = a * a * c * c + b * b * s * s;
                let dq = (b * b - a * a) * (2.0 * theta).sin();
                let ddq = 2.0 * (b * b - a * a) * (2.0 * theta).cos();
                let h = q.sqrt();
                [h, dq / (2.0 * h), ddq / (2.0 * h) - dq * dq / (4.0 * h * h * h)]
            }
            Shape::Fourier { coeffs } => {
                let d = fourier_derivs(coeffs, theta);
                [d[0], d[1], d[2]]
            }
        }
    }

    pub fn boundary_point(&self, mu: f64) -> Point {
        match &self.shape {
            Shape::Disk => unit(mu),
            Shape::Ellipse { a, b } => Point::new(a * mu.cos(), b * mu.sin()),
            Shape::Fourier { coeffs } => {
                let d = fourier_derivs(coeffs, mu);
                let u = unit(mu);
                u * d[0] + perp(u) * d[1]
            }
        }
    }

    pub fn boundary_derivative(&self, mu: f64) -> Point {
        match &self.shape {
            Shape::Disk => perp(unit(mu)),
            Shape::Ellipse { a, b } => Point::new(-a * mu.sin(), b * mu.cos()),
            Shape::Fourier { coeffs } => {
                let d = fourier_derivs(coeffs, mu);
                perp(unit(mu)) * (d[0] + d[2])
            }
        }
    }

    pub fn boundary_second_derivative(&self, mu: f64) -> Point {
        match &self.shape {
            Shape::Disk => -unit(mu),
            Shape::Ellipse { a, b } => Point::new(-a * mu.cos(), -b * mu.sin()),
            Shape::Fourier { coeffs } => {
                let d = fourier_derivs(coeffs, mu);
                let u = unit(mu);
                perp(u) * (d[1] + d[3]) - u * (d[0] + d[2])
            }
        }
    }

    pub fn normal(&self, mu: f64) -> Point {
        match &self.shape {
            Shape::Disk | Shape::Fourier { .. } => unit(mu),
            Shape::Ellipse { a, b } => Point::new(b * mu.cos(), a * mu.sin()).normalize(),
        }
    }

    pub fn curvature(&self, mu: f64) -> f64 {
        match &self.shape {
            Shape::Disk => 1.0,
            Shape::Fourier { coeffs } => {
                let d = fourier_derivs(coeffs, mu);
                1.0 / (d[0] + d[2])
            }
            _ => {
                let d1 = self.boundary_derivative(mu);
                let d2 = self.boundary_second_derivative(mu);
                (d1.x * d2.y - d1.y * d2.x) / d1.norm().powi(3)
            }
        }
    }

    /// Boundary parameter of the point whose outward normal has angle `theta`.
    pub fn mu_from_normal_angle(&self, theta: f64) -> f64 {
        match &self.shape {
            Shape::Disk | Shape::Fourier { .. } => theta.rem_euclid(TAU),
            Shape::Ellipse { a, b } => (b * theta.sin()).atan2(a * theta.cos()).rem_euclid(TAU),
        }
    }

    pub fn nearest(&self, x: &Point) -> Nearest {
        if let Shape::Disk = self.shape {
            let r = x.norm();
            let n = if r > 0.0 { x / r } else { Point::new(1.0, 0.0) };
            return Nearest {
                signed_distance: r - 1.0,
                normal: n,
                point: n,
                mu: n.y.atan2(n.x).rem_euclid(TAU),
            };
        }
        let mut best = 0;
        let mut fbest = f64::NEG_INFINITY;
        for k in 0..SCAN {
            let f = x.x * self.scan_cos[k] + x.y * self.scan_sin[k] - self.scan_support[k];
            if f > fbest {
                fbest = f;
                best = k;
            }
        }
        let dth = TAU / SCAN as f64;
        let mut lo = best as f64 * dth - dth;
        let mut hi = best as f64 * dth + dth;
        let mut theta = best as f64 * dth;
        for _ in 0..80 {
            let u = unit(theta);
            let h = self.support(theta);
            let g = x.dot(&perp(u)) - h[1];
            let gp = -x.dot(&u) - h[2];
            if g > 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
            let newton = theta - g / gp;
            let next = if gp < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let done = (next - theta).abs() < 1e-15 || hi - lo < 1e-15;
            theta = next;
            if done {
                break;
            }
        }
        let u = unit(theta);
        let sd = x.dot(&u) - self.support(theta)[0];
        Nearest {
            signed_distance: sd,
            normal: u,
            point: x - u * sd,
            mu: self.mu_from_normal_angle(theta),
        }
    }

    pub fn signed_distance(&self, x: &Point) -> f64 {
        self.nearest(x).signed_distance
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.signed_distance(x) < 0.0
    }

    /// Distance to the boundary; errors for points strictly outside.
    pub fn distance_to_boundary(&self, x: &Point) -> Result<f64> {
        let sd = self.signed_distance(x);
        if sd > 1e-12 {
            return Err(Error::ExteriorPoint);
        }
        Ok((-sd).max(0.0))
    }

    /// Specular reflection of `v` at the boundary point `xb`.
    pub fn reflect(&self, xb: &Point, v: &Point) -> Result<Point> {
        let nr = self.nearest(xb);
        if nr.signed_distance.abs() > 1e-10 {
            return Err(Error::NotOnBoundary(nr.signed_distance));
        }
        Ok(reflect_across(&nr.normal, v))
    }

    /// First wall crossing of the straight segment `x + t v`, `t in (0, dt]`.
    pub fn boundary_hit(&self, x: &Point, v: &Point, dt: f64) -> Option<(f64, Point)> {
        self.path_hit(x, v, &Point::zeros(), dt)
    }

    /// First wall crossing of the arc `x + t v + t^2 a / 2`, `t in (0, dt]`.
    ///
    /// Returns the last time known to be inside (within 1e-12) and the
    /// position there.
    pub fn path_hit(&self, x: &Point, v: &Point, a: &Point, dt: f64) -> Option<(f64, Point)> {
        let pos = |t: f64| x + v * t + a * (0.5 * t * t);
        let sd0 = self.signed_distance(x);
        if sd0 >= 0.0 {
            return Some((0.0, *x));
        }
        let reach = v.norm() * dt + 0.5 * a.norm() * dt * dt;
        if sd0 + reach * (1.0 + 1e-12) < 0.0 {
            return None;
        }
        let mut prev = 0.0;
        for k in 1..=SCAN {
            let t = dt * k as f64 / SCAN as f64;
            if self.signed_distance(&pos(t)) >= 0.0 {
                let (mut lo, mut hi) = (prev, t);
                while hi - lo > 1e-12 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.signed_distance(&pos(mid)) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some((lo, pos(lo)));
            }
            prev = t;
        }
        None
    }

    pub fn local_frame(&self, x: &Point, v: &Point) -> Result<LocalFrame> {
        let nr = self.nearest(x);
        if nr.signed_distance > 1e-12 {
            return Err(Error::ExteriorPoint);
        }
        let x_perp = -nr.signed_distance;
        if x_perp > self.collar + 1e-12 {
            return Err(Error::OutsideCollar);
        }
        let n = nr.normal;
        Ok(LocalFrame {
            mu: nr.mu,
            x_perp: x_perp.max(0.0),
            v_perp: -v.dot(&n),
            v_tan: v.dot(&perp(n)),
        })
    }

    /// Inverse of the collar map: `x(mu) - x_perp n(mu)`.
    pub fn point_from_frame(&self, mu: f64, x_perp: f64) -> Point {
        self.boundary_point(mu) - self.normal(mu) * x_perp
    }

    pub fn quadrature(&self, n: usize) -> BoundaryQuadrature {
        let h = TAU / n as f64;
        let mut q = BoundaryQuadrature {
            mu: Vec::with_capacity(n),
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            speed: Vec::with_capacity(n),
            curvature: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
        };
        for i in 0..n {
            let mu = i as f64 * h;
            let speed = self.boundary_derivative(mu).norm();
            q.mu.push(mu);
            q.points.push(self.boundary_point(mu));
            q.normals.push(self.normal(mu));
            q.speed.push(speed);
            q.curvature.push(self.curvature(mu));
            q.weights.push(speed * h);
        }
        q
    }
}
